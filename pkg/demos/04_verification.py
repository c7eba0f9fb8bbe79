"""Numerical verification of the discretisation.

Analytic oracles for the potential and heat equations, conservation of the
vacancy count, and observed convergence orders from manufactured solutions.
The same suite is available as ``rramfv validate``.

Run from the repository root::

    python demos/04_verification.py
"""

from rramfv.verification import run_all

for check in run_all(quick=True):
    print(check.line())
