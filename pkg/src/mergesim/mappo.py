"""Multi-agent PPO with parameter sharing and a centralized critic.

All CAVs share one actor (acting on their own observation matrix) and one
critic (evaluating an ego-first concatenation of every agent's observation,
zero-padded to the maximum agent count).  Rollouts store the policy's
proposed action together with the shield-corrected environment reward;
the shield's influence reaches the policy through rewards, keeping the
importance ratios well-defined.  Advantages come from generalized
advantage estimation; updates use the clipped surrogate objective plus a
value loss and an entropy bonus.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .env import MergingEnv
from .nets import Adam, Mlp, clip_gradients, log_softmax, sample_categorical, softmax

N_ACTIONS = 5
MAX_AGENTS = 6  # hard-mode maximum, fixes the critic input width


@dataclass
class PolicyParams:
    """Shared actor/critic pair plus the shapes needed to rebuild them."""

    actor: Mlp
    critic: Mlp
    obs_dim: int
    n_actions: int
    global_dim: int
    hidden: int

    def architecture(self) -> dict:
        return {
            "obs_dim": self.obs_dim,
            "n_actions": self.n_actions,
            "global_dim": self.global_dim,
            "hidden": self.hidden,
        }


def init_policy(obs_dim: int, global_dim: int, hidden: int = 128, seed: int = 0) -> PolicyParams:
    rng = np.random.default_rng(seed)
    actor = Mlp(obs_dim, hidden, N_ACTIONS, rng, out_gain=0.01)
    critic = Mlp(global_dim, hidden, 1, rng, out_gain=1.0)
    return PolicyParams(actor, critic, obs_dim, N_ACTIONS, global_dim, hidden)


@dataclass
class TrainConfig:
    total_steps: int = 100_000
    seeds: tuple[int, ...] = (0, 1000, 2024)
    gamma: float = 0.99
    lam: float = 0.95
    clip_eps: float = 0.2
    lr: float = 3e-4
    epochs: int = 10
    minibatch: int = 64
    rollout_steps: int = 256
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    hidden: int = 128
    eval_every_episodes: int = 200
    eval_episodes: int = 3
    curriculum_from: str | None = None
    store_corrected_action: bool = False

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0 and 0.0 < self.lam <= 1.0):
            raise ValueError("gamma and lam must lie in (0, 1]")
        if not (0.0 < self.clip_eps < 1.0):
            raise ValueError("clip_eps must lie in (0, 1)")
        if self.total_steps < 0 or self.rollout_steps <= 0 or self.minibatch <= 0:
            raise ValueError("step counts must be positive")


# -- losses and advantage estimation ----------------------------------------


def gae(rewards, values, dones, gamma: float, lam: float, last_value: float = 0.0) -> np.ndarray:
    """Generalized advantage estimation over one agent stream.

    delta_t = r_t + gamma V_{t+1} - V_t with V after a terminal step taken
    as 0; the exponentially weighted sum truncates at episode boundaries.
    ``last_value`` bootstraps a stream cut off mid-episode.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    if not (len(rewards) == len(values) == len(dones)):
        raise ValueError("rewards, values and dones must have equal length")
    n = len(rewards)
    advantages = np.zeros(n)
    running = 0.0
    next_value = float(last_value)
    for t in range(n - 1, -1, -1):
        if dones[t]:
            running = 0.0
            next_value = 0.0
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * lam * running
        advantages[t] = running
        next_value = values[t]
    return advantages


def clip_loss(new_logp, old_logp, advantages, eps: float) -> float:
    """Negated clipped surrogate objective (to be minimized)."""
    ratio = np.exp(np.asarray(new_logp) - np.asarray(old_logp))
    adv = np.asarray(advantages)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv
    return float(-np.mean(np.minimum(unclipped, clipped)))


def clip_loss_grad(new_logp, old_logp, advantages, eps: float) -> np.ndarray:
    """d(clip_loss)/d(new_logp), per sample."""
    ratio = np.exp(np.asarray(new_logp) - np.asarray(old_logp))
    adv = np.asarray(advantages)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv
    active = unclipped <= clipped  # gradient flows only through the live branch
    return -(active * adv * ratio) / len(ratio)


def value_loss(values, returns) -> float:
    v = np.asarray(values, dtype=np.float64)
    r = np.asarray(returns, dtype=np.float64)
    if v.shape != r.shape:
        raise ValueError("values and returns must align")
    return float(np.mean((v - r) ** 2))


# -- rollout collection ------------------------------------------------------


@dataclass
class RolloutBuffer:
    """Flattened per-agent transitions with computed advantages/returns."""

    obs: np.ndarray = field(default_factory=lambda: np.zeros((0,)))
    glob: np.ndarray = field(default_factory=lambda: np.zeros((0,)))
    actions: np.ndarray = field(default_factory=lambda: np.zeros((0,), dtype=np.int64))
    old_logp: np.ndarray = field(default_factory=lambda: np.zeros((0,)))
    advantages: np.ndarray = field(default_factory=lambda: np.zeros((0,)))
    returns: np.ndarray = field(default_factory=lambda: np.zeros((0,)))
    values: np.ndarray = field(default_factory=lambda: np.zeros((0,)))
    episodes: int = 0
    env_steps: int = 0
    collision_episodes: int = 0

    def __len__(self) -> int:
        return len(self.actions)


def global_state(obs_map: dict[int, np.ndarray], ego_id: int, obs_dim: int) -> np.ndarray:
    """Ego-first concatenation of all agents' observations, zero-padded."""
    out = np.zeros(MAX_AGENTS * obs_dim)
    out[:obs_dim] = obs_map[ego_id].ravel()
    slot = 1
    for aid in sorted(obs_map):
        if aid == ego_id or slot >= MAX_AGENTS:
            continue
        out[slot * obs_dim : (slot + 1) * obs_dim] = obs_map[aid].ravel()
        slot += 1
    return out


def collect_rollout(
    env: MergingEnv,
    policy: PolicyParams,
    n_steps: int,
    rng: np.random.Generator,
    config: TrainConfig,
    greedy: bool = False,
    obs: dict[int, np.ndarray] | None = None,
) -> tuple[RolloutBuffer, dict[int, np.ndarray]]:
    """Run the environment for n_steps decision steps and fill a buffer.

    Streams are kept per (episode, agent); GAE runs per stream with a
    critic bootstrap for streams cut off mid-episode.  Returns the buffer
    and the live observation map so collection can resume seamlessly.
    """
    obs_dim = policy.obs_dim
    streams: dict[tuple[int, int], dict[str, list]] = {}
    open_streams: dict[int, tuple[int, int]] = {}
    episode_idx = 0
    buffer = RolloutBuffer()
    if obs is None or env.done:
        obs = env.reset(seed=int(rng.integers(0, 2**31 - 1)))
    for _ in range(n_steps):
        live = env.live_cav_ids
        if not live:
            obs = env.reset(seed=int(rng.integers(0, 2**31 - 1)))
            episode_idx += 1
            live = env.live_cav_ids
        actions: dict[int, int] = {}
        logps: dict[int, float] = {}
        vals: dict[int, float] = {}
        globs: dict[int, np.ndarray] = {}
        for aid in live:
            x = obs[aid].ravel()[None, :]
            logits = policy.actor(x)[0]
            logp_all = log_softmax(logits)
            if greedy:
                act = int(np.argmax(logits))
            else:
                act = sample_categorical(rng, softmax(logits))
            g = global_state(obs, aid, obs_dim)
            actions[aid] = act
            logps[aid] = float(logp_all[act])
            vals[aid] = float(policy.critic(g[None, :])[0, 0])
            globs[aid] = g
        out = env.step(actions)
        buffer.env_steps += 1
        for aid in live:
            stored_action = actions[aid]
            stored_logp = logps[aid]
            if config.store_corrected_action:
                corrected = out.info["final"][aid]
                if corrected != stored_action:
                    x = obs[aid].ravel()[None, :]
                    logp_all = log_softmax(policy.actor(x))[0]
                    stored_action = corrected
                    stored_logp = float(logp_all[corrected])
            key = (episode_idx, aid)
            stream = streams.setdefault(
                key,
                {"obs": [], "glob": [], "act": [], "logp": [], "rew": [], "val": [], "done": []},
            )
            open_streams[aid] = key
            agent_done = out.done or aid in out.info["exited"] or aid in out.info["collisions"]
            stream["obs"].append(obs[aid].ravel())
            stream["glob"].append(globs[aid])
            stream["act"].append(stored_action)
            stream["logp"].append(stored_logp)
            stream["rew"].append(out.rewards.get(aid, 0.0))
            stream["val"].append(vals[aid])
            stream["done"].append(agent_done)
            if agent_done:
                open_streams.pop(aid, None)
        obs = out.observations
        if out.done:
            buffer.episodes += 1
            if out.info.get("terminal") == "collision":
                buffer.collision_episodes += 1
            obs = env.reset(seed=int(rng.integers(0, 2**31 - 1)))
            episode_idx += 1
            open_streams.clear()
    if not streams:
        return buffer, obs
    # bootstrap values for streams cut off mid-episode
    bootstraps: dict[tuple[int, int], float] = {}
    for aid, key in open_streams.items():
        g = global_state(obs, aid, obs_dim)
        bootstraps[key] = float(policy.critic(g[None, :])[0, 0])
    all_obs, all_glob, all_act, all_logp, all_adv, all_ret, all_val = [], [], [], [], [], [], []
    for key, s in streams.items():
        adv = gae(s["rew"], s["val"], s["done"], config.gamma, config.lam, bootstraps.get(key, 0.0))
        ret = adv + np.asarray(s["val"])
        all_obs.extend(s["obs"])
        all_glob.extend(s["glob"])
        all_act.extend(s["act"])
        all_logp.extend(s["logp"])
        all_adv.append(adv)
        all_ret.append(ret)
        all_val.extend(s["val"])
    buffer.obs = np.asarray(all_obs)
    buffer.glob = np.asarray(all_glob)
    buffer.actions = np.asarray(all_act, dtype=np.int64)
    buffer.old_logp = np.asarray(all_logp)
    advantages = np.concatenate(all_adv)
    buffer.returns = np.concatenate(all_ret)
    buffer.values = np.asarray(all_val)
    std = advantages.std()
    buffer.advantages = (advantages - advantages.mean()) / (std + 1e-8)
    return buffer, obs


# -- updates -----------------------------------------------------------------


def update(
    buffer: RolloutBuffer,
    policy: PolicyParams,
    config: TrainConfig,
    rng: np.random.Generator,
    optimizer: Adam | None = None,
) -> dict[str, float]:
    """K epochs of minibatch gradient steps on the combined objective."""
    if optimizer is None:
        optimizer = Adam(lr=config.lr)
    n = len(buffer)
    if n == 0:
        return {"clip_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "grad_norm": 0.0}
    stats = {"clip_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "grad_norm": 0.0}
    batches = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.minibatch):
            idx = order[start : start + config.minibatch]
            mb_obs = buffer.obs[idx]
            mb_glob = buffer.glob[idx]
            mb_act = buffer.actions[idx]
            mb_old = buffer.old_logp[idx]
            mb_adv = buffer.advantages[idx]
            mb_ret = buffer.returns[idx]
            b = len(idx)

            logits, actor_cache = policy.actor.forward(mb_obs)
            logp_all = log_softmax(logits)
            probs = np.exp(logp_all)
            lp = logp_all[np.arange(b), mb_act]
            l_clip = clip_loss(lp, mb_old, mb_adv, config.clip_eps)
            dlp = clip_loss_grad(lp, mb_old, mb_adv, config.clip_eps)
            onehot = np.zeros_like(probs)
            onehot[np.arange(b), mb_act] = 1.0
            dlogits = dlp[:, None] * (onehot - probs)
            ent = -np.sum(probs * logp_all, axis=1)
            # entropy bonus: subtracting c_e * mean(H) from the loss
            dlogits += (config.entropy_coef / b) * probs * (logp_all + ent[:, None])
            actor_grads = policy.actor.backward(actor_cache, dlogits)

            v, critic_cache = policy.critic.forward(mb_glob)
            v = v[:, 0]
            l_value = value_loss(v, mb_ret)
            dv = (2.0 * config.value_coef / b) * (v - mb_ret)
            critic_grads = policy.critic.backward(critic_cache, dv[:, None])

            total = l_clip + config.value_coef * l_value - config.entropy_coef * float(np.mean(ent))
            if not math.isfinite(total):
                raise RuntimeError(
                    f"non-finite loss: clip={l_clip} value={l_value} "
                    f"adv_range=({mb_adv.min()}, {mb_adv.max()})"
                )
            norm = clip_gradients([actor_grads, critic_grads], config.max_grad_norm)
            optimizer.step_pairs(
                [(policy.actor.params, actor_grads, "actor/"), (policy.critic.params, critic_grads, "critic/")]
            )
            stats["clip_loss"] += l_clip
            stats["value_loss"] += l_value
            stats["entropy"] += float(np.mean(ent))
            stats["grad_norm"] += norm
            batches += 1
    for k in stats:
        stats[k] /= max(batches, 1)
    return stats


# -- evaluation and the train loop -------------------------------------------

EVAL_SEED_BASE = 7_700_000


def evaluate(
    env: MergingEnv,
    policy: PolicyParams,
    episodes: int,
    seed_base: int = EVAL_SEED_BASE,
    record: bool = False,
):
    """Greedy-policy evaluation on fixed seeds: (mean return, avg speed,
    collision rate, records)."""
    env.record_enabled = True
    records = []
    returns = []
    total_steps = 0
    collision_steps = 0
    speed_sum = 0.0
    speed_count = 0
    for i in range(episodes):
        obs = env.reset(seed=seed_base + i)
        agent_totals: dict[int, float] = {}
        while not env.done:
            actions = {}
            for aid in env.live_cav_ids:
                logits = policy.actor(obs[aid].ravel()[None, :])[0]
                actions[aid] = int(np.argmax(logits))
            out = env.step(actions)
            obs = out.observations
            total_steps += 1
            collision_steps += bool(out.info["collisions"])
            for aid, r in out.rewards.items():
                agent_totals[aid] = agent_totals.get(aid, 0.0) + r
        returns.extend(agent_totals.values())
        records.append(env.record)
        for frame in env.record.substep_states[1:]:
            for row in frame:
                if row[1] == "CAV":
                    speed_sum += row[4]
                    speed_count += 1
    mean_return = float(np.mean(returns)) if returns else 0.0
    rate = collision_steps / total_steps if total_steps else 0.0
    avg_speed = speed_sum / speed_count if speed_count else float("nan")
    return mean_return, avg_speed, rate, records


@dataclass
class TrainResult:
    policy: PolicyParams
    curve: list[dict]  # rows: step, episodes, mean_reward, avg_speed, collision_rate
    seed: int
    total_steps: int
    config_hash: str


def config_fingerprint(config: TrainConfig, extra: dict | None = None) -> str:
    payload = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(config).items()}
    if extra:
        payload.update(extra)
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def train(
    config: TrainConfig,
    env: MergingEnv,
    eval_env: MergingEnv,
    seed: int,
    init: PolicyParams | None = None,
    progress=None,
) -> TrainResult:
    """Collect/update until total_steps, evaluating every
    eval_every_episodes training episodes (greedy, fixed seeds)."""
    obs_dim = env.obs_params.n_vehicles * 5
    global_dim = MAX_AGENTS * obs_dim
    if init is not None:
        if (init.obs_dim, init.global_dim, init.hidden) != (obs_dim, global_dim, config.hidden):
            raise ValueError("checkpoint architecture does not match the configuration")
        policy = init
    else:
        policy = init_policy(obs_dim, global_dim, config.hidden, seed)
    optimizer = Adam(lr=config.lr)
    rng = np.random.default_rng(seed)
    curve: list[dict] = []
    steps_done = 0
    episodes_done = 0
    next_eval_at = 0
    obs = None

    def run_eval():
        mean_return, avg_speed, rate, _ = evaluate(eval_env, policy, config.eval_episodes)
        curve.append(
            {
                "step": steps_done,
                "episodes": episodes_done,
                "mean_reward": mean_return,
                "avg_speed": avg_speed,
                "collision_rate": rate,
            }
        )

    run_eval()
    next_eval_at = config.eval_every_episodes
    while steps_done < config.total_steps:
        chunk = min(config.rollout_steps, config.total_steps - steps_done)
        buffer, obs = collect_rollout(env, policy, chunk, rng, config, obs=obs)
        steps_done += buffer.env_steps
        episodes_done += buffer.episodes
        update(buffer, policy, config, rng, optimizer)
        if episodes_done >= next_eval_at:
            run_eval()
            next_eval_at += config.eval_every_episodes
        if progress is not None:
            progress(steps_done, episodes_done, curve)
    run_eval()
    return TrainResult(
        policy=policy,
        curve=curve,
        seed=seed,
        total_steps=steps_done,
        config_hash=config_fingerprint(config),
    )


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(path, result_or_policy, seed: int, step: int, config_hash: str) -> None:
    policy = result_or_policy.policy if isinstance(result_or_policy, TrainResult) else result_or_policy
    meta = {
        "architecture": policy.architecture(),
        "seed": seed,
        "step": step,
        "config_hash": config_hash,
        "format": 1,
    }
    arrays = {f"actor_{k}": v for k, v in policy.actor.params.items()}
    arrays.update({f"critic_{k}": v for k, v in policy.critic.params.items()})
    np.savez(path, meta=json.dumps(meta, sort_keys=True), **arrays)


def load_checkpoint(path) -> tuple[PolicyParams, dict]:
    data = np.load(path, allow_pickle=False)
    meta = json.loads(str(data["meta"]))
    arch = meta["architecture"]
    policy = init_policy(arch["obs_dim"], arch["global_dim"], arch["hidden"], seed=0)
    for k in policy.actor.params:
        policy.actor.params[k] = data[f"actor_{k}"]
    for k in policy.critic.params:
        policy.critic.params[k] = data[f"critic_{k}"]
    return policy, meta
