"""One environment episode, step by step.

A decision step: the policy proposes one action per connected vehicle,
intents are generated and shielded, then ten 0.1 s substeps propagate
every vehicle (human drivers run IDM/MOBIL live) with collision checks.

Run:  python demos/04_environment_episode.py
"""

import numpy as np

from mergesim.dynamics import HighLevelAction
from mergesim.env import MergingEnv, TrafficLevel, TrafficMode

env = MergingEnv(mode=TrafficMode(TrafficLevel.EASY), record=True)
obs = env.reset(seed=7)

print("spawned vehicles:")
for v in env.vehicles:
    print(f"  id {v.id} {v.kind.name:3s} lane={v.lane.kind.value:7s} "
          f"x={v.x:6.1f} v={v.v:5.2f}")
print("\nobservation matrix of agent", env.agent_ids[0], "(rows: ego + neighbors):")
print(np.round(obs[env.agent_ids[0]], 3))

rng = np.random.default_rng(1)
step = 0
totals = {aid: 0.0 for aid in env.agent_ids}
while not env.done:
    actions = {aid: int(rng.integers(0, 5)) for aid in env.live_cav_ids}
    out = env.step(actions)
    for aid, r in out.rewards.items():
        totals[aid] += r
    marks = []
    if out.info["corrections"]:
        marks.append(f"{len(out.info['corrections'])} corrected")
    if out.info["exited"]:
        marks.append(f"exited {out.info['exited']}")
    if out.info["collisions"]:
        marks.append(f"COLLISION {out.info['collisions']}")
    shown = {i: HighLevelAction(a).name[:7] for i, a in out.info["final"].items()}
    print(f"t={step:2d} actions={shown} rewards="
          f"{ {i: round(r, 1) for i, r in out.rewards.items()} } {' '.join(marks)}")
    step += 1

print(f"\nterminal cause: {out.info['terminal']} after {step} steps")
print("episode returns per agent:", {i: round(r, 1) for i, r in totals.items()})
print("recorded frames:", len(env.record.substep_states))
