"""Tour of the road geometry, the bicycle model, and the action layer.

Run:  python demos/01_road_and_dynamics.py
"""

import math

from mergesim.dynamics import (
    ControlInput,
    HighLevelAction,
    VehicleKind,
    VehicleState,
    execute_action,
    step_bicycle,
)
from mergesim.geometry import MERGE, RAMP, THROUGH, build_layout, ramp_progress

# ---------------------------------------------------------------- the road
# One through lane (y = 0) plus a ramp that runs alongside it as a merge
# lane for 100 m before ending at a barrier.  Six virtual speed coils span
# the merge area.
layout = build_layout()
print("road length      :", layout.through_length, "m")
print("ramp runs        :", layout.ramp_start, "->", layout.merge_start, "m (approach)")
print("merge lane       :", layout.merge_start, "->", layout.merge_end, "m")
print("virtual coils at :", layout.coil_positions)

vehicle = VehicleState(id=0, x=layout.merge_start, y=-4.0, v=25.0, heading=0.0,
                       lane=MERGE, kind=VehicleKind.CAV)
print("\nramp progress at the merge-lane entrance:",
      ramp_progress(layout, vehicle), "of", layout.ramp_total_length, "m")

# ------------------------------------------------------- bicycle stepping
# Kinematic bicycle: slip angle from the front steering angle, position
# advanced with the pre-update speed, speed clamped to [0, 45] m/s.
state = VehicleState(id=1, x=0.0, y=0.0, v=20.0, heading=0.0, lane=THROUGH,
                     kind=VehicleKind.CAV)
print("\nstraight motion, 1 s at 20 m/s in 0.1 s substeps:")
for _ in range(10):
    state = step_bicycle(state, ControlInput(accel=0.0, steer=0.0), dt=0.1)
print(f"  x = {state.x:.3f} m (expected 20.0)")

print("gentle left steer for 1 s:")
for _ in range(10):
    state = step_bicycle(state, ControlInput(accel=0.0, steer=0.05), dt=0.1)
print(f"  y = {state.y:.2f} m, heading = {math.degrees(state.heading):.1f} deg")

# ------------------------------------------------------------ action layer
# Policies emit one of five discrete actions; each resolves to a target
# speed (clamped to [10, 30] m/s) and a target lane.  Lane changes toward
# a lane that does not exist degrade to CRUISING and are flagged.
print("\naction resolution for a through-lane vehicle at x = 100 m, v = 28 m/s:")
probe = VehicleState(id=2, x=100.0, y=0.0, v=28.0, heading=0.0, lane=THROUGH,
                     kind=VehicleKind.CAV)
for action in HighLevelAction:
    t = execute_action(probe, action, layout)
    note = " (masked)" if t.masked else ""
    print(f"  {action.name:10s} -> target_v={t.target_v:5.1f}  lane={t.target_lane.kind.value}{note}")

print("\nthe same vehicle inside the merge window (x = 350 m) may dive right:")
probe.x = 350.0
t = execute_action(probe, HighLevelAction.TURN_RIGHT, layout)
print(f"  TURN_RIGHT -> lane={t.target_lane.kind.value}, masked={t.masked}")
