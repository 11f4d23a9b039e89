"""Human-driver models: IDM car following and MOBIL lane changes.

Run:  python demos/02_human_drivers.py
"""

import math

from mergesim.behavior import IdmParams, LongState, MobilParams, idm_accel, mobil_decide, style_params
from mergesim.dynamics import DrivingStyle

idm = IdmParams()
print("IDM defaults:", idm)

# Acceleration falls smoothly from a_max toward hard braking as the gap
# closes on a slower leader.
print("\nego at 25 m/s closing at 5 m/s, acceleration vs bumper gap:")
for gap in (100.0, 60.0, 40.0, 25.0, 15.0, 8.0):
    a = idm_accel(25.0, gap, 5.0, idm)
    print(f"  gap {gap:5.1f} m -> a = {a:6.2f} m/s^2")

print("\nfree road at the desired speed is exact equilibrium:",
      idm_accel(idm.v0, math.inf, 0.0, idm))

# MOBIL weighs the ego's acceleration gain against the braking imposed on
# the new follower.
mobil = MobilParams()
ego = LongState(x=100.0, v=20.0, length=5.0)
slow_leader = LongState(x=120.0, v=8.0, length=5.0)
print("\nblocked by a slow leader, target lane empty ->",
      "change" if mobil_decide(ego, slow_leader, None, None, None, idm, mobil) else "stay")

close_follower = LongState(x=93.0, v=28.0, length=5.0)
print("same but a fast follower sits 2 m behind in the target lane ->",
      "change" if mobil_decide(ego, slow_leader, None, None, close_follower, idm, mobil) else "stay")

# Three driver styles shift the whole parameter set.
print("\nstyle table:")
for style in DrivingStyle:
    i, m = style_params(style)
    print(f"  {style.name:10s} v0={i.v0:4.1f}  T={i.T:3.1f}  a_max={i.a_max:3.1f}  "
          f"b_safe={m.b_safe:3.1f}  gain_threshold={m.gain_threshold:3.1f}")
