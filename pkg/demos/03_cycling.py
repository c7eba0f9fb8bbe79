"""Twenty set/reset cycles with cycle-to-cycle variability.

After forming, each cycle applies a seeded lognormal perturbation to the
vacancy density of the switching layer, a -2.1 V set pulse under
compliance, a read, a +1 V reset pulse and another read. The spread of the
two resistance states is summarised by sigma/mu.

Run from the repository root::

    python demos/03_cycling.py [seed]
"""

import sys

import numpy as np

from rramfv.analysis import resistance_ratio, uniformity
from rramfv.scenario import Scenario

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
scn = Scenario(seed=seed)
formed = scn.form().final_state
res = scn.cycle(formed, N=20, keep_traces=False)

print(" cycle      R_HRS (ohm)   R_LRS (ohm)")
for k, (h, l) in enumerate(zip(res.R_HRS, res.R_LRS), start=1):
    print(f"{k:6d} {h:15.1f} {l:13.1f}")
print(f"median ratio {resistance_ratio(res.R_HRS, res.R_LRS):.2f}")
print(f"HRS sigma/mu {uniformity(res.R_HRS):.4f}, LRS sigma/mu {uniformity(res.R_LRS):.4f}")
print(f"LRS range {np.min(res.R_LRS):.0f} to {np.max(res.R_LRS):.0f} ohm")
