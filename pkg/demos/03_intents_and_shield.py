"""Intent trajectories and the priority-based safety shield.

Each connected vehicle turns its chosen action into an 8 s trajectory by
rolling the real controller pipeline forward; the shield scores every
vehicle's priority, checks the shared trajectories for overlaps in
priority order, and replaces unsafe intentions by the action with the
largest worst-case safety margin.

Run:  python demos/03_intents_and_shield.py
"""

import numpy as np

from mergesim.dynamics import HighLevelAction, VehicleKind, VehicleState
from mergesim.geometry import MERGE, THROUGH, build_layout
from mergesim.intent import generate_intent, predict_hv
from mergesim.safety import run_sem
from mergesim.scene import merge_end_barrier

layout = build_layout()


def cav(vid, x, lane, v=25.0):
    return VehicleState(id=vid, x=x, y=layout.centerline_y(lane), v=v, heading=0.0,
                        lane=lane, kind=VehicleKind.CAV)


def hv(vid, x, lane, v=25.0):
    return VehicleState(id=vid, x=x, y=layout.centerline_y(lane), v=v, heading=0.0,
                        lane=lane, kind=VehicleKind.HV)


# ------------------------------------------------------------- intents
merging = cav(0, 330.0, MERGE)
intent = generate_intent(merging, HighLevelAction.TURN_LEFT, layout)
print("TURN_LEFT intent of a merge-lane vehicle (one sample per second):")
for k, s in enumerate(intent.samples, start=1):
    print(f"  k={k}: x={s.x:6.1f}  y={s.y:6.2f}  v={s.v:5.2f}  lane={s.lane.kind.value}")

# HV prediction: IDM + MOBIL against a frozen constant-speed snapshot
slow_hv = hv(9, 360.0, MERGE, v=12.0)
prediction = predict_hv(slow_hv, [merging], layout, barrier=merge_end_barrier(layout))
print("\npredicted slow HV ahead on the merge lane:")
print("  speeds:", [round(s.v, 1) for s in prediction.samples])

# ------------------------------------------------------------- the shield
# A through vehicle dives right into the path of the merging vehicle.
# Priorities put the merging vehicle first (merging task + close to the
# lane end), so the through vehicle is the one corrected.
scene_cavs = [cav(0, 340.0, MERGE), cav(1, 335.0, THROUGH)]
proposed = {0: HighLevelAction.TURN_LEFT, 1: HighLevelAction.TURN_RIGHT}
result = run_sem(scene_cavs, [slow_hv], proposed, layout, np.random.default_rng(0))

print("\npriority order:", result.priorities.order())
for entry in result.priorities.entries:
    print(f"  vehicle {entry.agent_id}: score {entry.score:+.3f}")
print("conflicts found:", [(r.ego_id, r.other_id, r.step) for r in result.reports])
for c in result.corrections:
    tag = " [no safe option existed]" if c.all_actions_conflicted else ""
    print(f"corrected vehicle {c.agent_id}: {c.old_action.name} -> {c.new_action.name}{tag}")
print("final joint action:", {i: HighLevelAction(a).name for i, a in result.actions.items()})
