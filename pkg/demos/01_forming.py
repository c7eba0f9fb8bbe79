"""Forming a pristine Ta2O5/TaOx cell.

A -2.1 V, 10 ms pulse is applied through the compliance layer. The script
prints the current and temperature history, the read resistance before and
after, and vacancy and temperature profiles along the device axis.

Run from the repository root::

    python demos/01_forming.py
"""

import numpy as np

from rramfv.analysis import detect_forming_voltage, profile_extract
from rramfv.scenario import Scenario

scn = Scenario()
mesh = scn.mesh()
print(f"mesh: {mesh.nz} x {mesh.ny} cells")

pristine = scn.pristine_state(mesh)
R0 = scn.read(pristine, mesh)
trace = scn.form(snapshot_times=(1e-3, 5e-3, 10e-3))
R1 = scn.read(trace.final_state, mesh)

print(f"read resistance at -0.1 V: {R0:.4g} ohm -> {R1:.4g} ohm")
print(f"current at threshold reached at V2 = {detect_forming_voltage(trace, scn.I_CC):.3f} V")
print(f"peak temperature {trace.T_peak.max():.0f} K, final current {abs(trace.I[-1]) * 1e6:.1f} uA")

print("\n  t (ms)    |I| (uA)   T_peak (K)")
for k in np.linspace(0, len(trace) - 1, 12).astype(int):
    print(f"{trace.t[k] * 1e3:8.3f} {abs(trace.I[k]) * 1e6:11.2f} {trace.T_peak[k]:11.1f}")

# the filament: vacancy density and temperature along y = 0 at the end of the pulse
nd = profile_extract(trace.snapshots[-1], mesh, "n_D", "z", at=0.0, span=(-10e-9, 5e-9))
T = profile_extract(trace.snapshots[-1], mesh, "T", "z", at=0.0, span=(-10e-9, 5e-9))
print("\n  z (nm)   n_D (m^-3)   T (K)")
for z, n, t in zip(nd.coord, nd.values, T.values):
    print(f"{z * 1e9:8.2f} {n:12.3e} {t:8.1f}")
