"""A small shared-policy training run (a few thousand steps).

All agents share one actor (local observation in, five action logits out)
and one centralized critic (ego-first concatenation of every agent's
observation).  Rollouts store the proposed action with the shielded
reward; updates use clipped surrogate + value loss + entropy bonus.

Run:  python demos/05_training_small.py        (~1 minute on one core)
"""

import numpy as np

from mergesim.env import MergingEnv, TrafficLevel, TrafficMode
from mergesim.mappo import TrainConfig, evaluate, train

config = TrainConfig(
    total_steps=4000,
    rollout_steps=256,
    epochs=4,
    minibatch=64,
    hidden=64,
    eval_every_episodes=30,
    eval_episodes=2,
    seeds=(0,),
)

env = MergingEnv(mode=TrafficMode(TrafficLevel.EASY), sem_enabled=True)
eval_env = MergingEnv(mode=TrafficMode(TrafficLevel.EASY), sem_enabled=True)


def progress(steps, episodes, curve):
    if curve and curve[-1]["step"] >= steps - config.rollout_steps:
        row = curve[-1]
        print(f"  step {row['step']:5d}  episodes {row['episodes']:4d}  "
              f"eval reward {row['mean_reward']:7.2f}  "
              f"collision rate {row['collision_rate']:.3f}")


print("training (shield on)...")
result = train(config, env, eval_env, seed=0, progress=progress)

print("\nlearning curve (step, eval reward, avg speed, collision rate):")
for row in result.curve:
    print(f"  {row['step']:5d}  {row['mean_reward']:8.2f}  {row['avg_speed']:6.2f}  "
          f"{row['collision_rate']:.3f}")

mean_return, avg_speed, collision_rate, _ = evaluate(
    MergingEnv(mode=TrafficMode(TrafficLevel.EASY)), result.policy, episodes=10
)
print(f"\n10-episode greedy evaluation: return {mean_return:.2f}, "
      f"avg speed {avg_speed:.2f} m/s, collision rate {collision_rate:.4f}")
