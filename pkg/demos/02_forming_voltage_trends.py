"""Forming voltage versus the two material slopes.

K1 sets how quickly the electrical conductivity rises with vacancy density
and K2 does the same for the thermal conductivity. A more conductive
filament heats faster and forms earlier, while better heat removal delays
forming. Each point is a staircase ramp from 0 V stopped at the compliance
threshold.

Run from the repository root::

    python demos/02_forming_voltage_trends.py
"""

from rramfv.analysis import NO_FORMING, detect_forming_voltage
from rramfv.scenario import Scenario


def forming_voltage(K1, K2):
    scn = Scenario().with_materials(K1=K1, K2=K2)
    vf = detect_forming_voltage(scn.forming_sweep().trace, scn.I_CC)
    return "no forming" if vf is NO_FORMING else f"{vf:.2f} V"


print("K2 = 5.75 W/m/K")
for K1 in (6.2, 9.5, 18.8):
    print(f"  K1 = {K1:5.1f} S/m   V_f = {forming_voltage(K1, 5.75)}")

print("K1 = 9.4 S/m")
for K2 in (2.5, 5.75, 11.5):
    print(f"  K2 = {K2:5.2f} W/m/K V_f = {forming_voltage(9.4, K2)}")
