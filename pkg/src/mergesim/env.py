"""The merging-road POMDP environment.

One decision step = one action per live CAV, optionally shielded by the
safety layer, then ten simulation substeps of controller + bicycle
propagation for every vehicle with rectangle collision detection.  HVs run
IDM/MOBIL live.  Episodes end on any collision, when every CAV has left
the road, or at the step horizon.  Fully deterministic given (seed, mode,
action sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .behavior import IDM_DECEL_FLOOR, LaneEntry, default_style_table, hv_lane_decision, idm_accel
from .dynamics import (
    DEFAULT_GAINS,
    DT_SIM,
    SUBSTEPS_PER_DECISION,
    ControllerGains,
    DrivingStyle,
    HighLevelAction,
    VehicleKind,
    VehicleState,
    advance_bicycle,
    execute_action,
    lane_steer,
    speed_control,
)
from .geometry import MERGE, RAMP, THROUGH, LaneKind, LaneRef, RoadLayout, build_layout, lane_at
from .metrics import EpisodeRecord
from .safety import DEFAULT_SAFETY, SafetyParams, SemResult, run_sem
from .scene import PERCEPTION_RANGE, merge_end_barrier, perceived, states_overlap


class TrafficLevel(Enum):
    EASY = "easy"
    HARD = "hard"


_SPAWN_COUNTS = {TrafficLevel.EASY: (1, 3), TrafficLevel.HARD: (3, 6)}


@dataclass(frozen=True)
class TrafficMode:
    level: TrafficLevel = TrafficLevel.EASY
    heterogeneous: bool = False

    @property
    def spawn_range(self) -> tuple[int, int]:
        return _SPAWN_COUNTS[self.level]


@dataclass(frozen=True)
class RewardParams:
    w_collision: float = 200.0
    w_speed: float = 1.0
    w_headway: float = 4.0
    w_merge: float = 4.0
    t_h: float = 1.2  # time-headway threshold [s]
    v_low: float = 10.0  # stable-speed reward range
    v_high: float = 30.0
    headway_clamp: float = 5.0
    merge_sign: float = -1.0  # the merging term is applied as a penalty


@dataclass(frozen=True)
class ObservationParams:
    n_vehicles: int = 5  # rows of the observation matrix (ego + neighbors)
    position_scale: float = 100.0
    speed_scale: float = 30.0
    perception: float = PERCEPTION_RANGE


@dataclass
class StepOutcome:
    observations: dict[int, np.ndarray]
    rewards: dict[int, float]
    done: bool
    info: dict


def spawn_vehicles(
    rng: np.random.Generator,
    layout: RoadLayout,
    n_cav: int,
    n_hv: int,
    heterogeneous: bool = False,
    v_base: float = 25.0,
    v_jitter: float = 2.0,
    min_spacing: float = 15.0,
    max_attempts: int = 100,
) -> tuple[list[VehicleState], int]:
    """Place vehicles on the through lane or ramp with minimum same-lane spacing.

    Returns (vehicles, dropped): a spawn that cannot be placed within
    ``max_attempts`` is dropped and counted.
    """
    through_band = (10.0, layout.merge_start - 30.0)
    ramp_band = (layout.ramp_start, layout.merge_start - 30.0)
    vehicles: list[VehicleState] = []
    dropped = 0
    next_id = 0
    for kind, count in ((VehicleKind.CAV, n_cav), (VehicleKind.HV, n_hv)):
        for _ in range(count):
            placed = False
            for _ in range(max_attempts):
                on_ramp = bool(rng.integers(0, 2))
                band = ramp_band if on_ramp else through_band
                x = float(rng.uniform(band[0], band[1]))
                lane = (RAMP if x < layout.merge_start else MERGE) if on_ramp else THROUGH
                clear = True
                for other in vehicles:
                    other_ramp = other.lane.kind is not LaneKind.THROUGH
                    if other_ramp == on_ramp and abs(other.x - x) < min_spacing:
                        clear = False
                        break
                if not clear:
                    continue
                v = v_base + float(rng.uniform(0.0, v_jitter))
                style = DrivingStyle.NORMAL
                if kind is VehicleKind.HV and heterogeneous:
                    style = DrivingStyle(int(rng.integers(0, 3)))
                vehicles.append(
                    VehicleState(
                        id=next_id,
                        x=x,
                        y=layout.centerline_y(lane),
                        v=v,
                        heading=0.0,
                        lane=lane,
                        kind=kind,
                        style=style,
                    )
                )
                next_id += 1
                placed = True
                break
            if not placed:
                dropped += 1
    return vehicles, dropped


class MergingEnv:
    """Stepped merging simulator with the intent/safety pipeline in the loop."""

    def __init__(
        self,
        layout: RoadLayout | None = None,
        mode: TrafficMode = TrafficMode(),
        gains: ControllerGains = DEFAULT_GAINS,
        safety: SafetyParams = DEFAULT_SAFETY,
        reward: RewardParams = RewardParams(),
        observation: ObservationParams = ObservationParams(),
        horizon: int = 100,
        dt: float = DT_SIM,
        substeps: int = SUBSTEPS_PER_DECISION,
        sem_enabled: bool = True,
        igm_enabled: bool = True,
        record: bool = False,
        styles=None,
    ):
        self.layout = layout if layout is not None else build_layout()
        self.mode = mode
        self.gains = gains
        self.safety = safety
        self.reward_params = reward
        self.obs_params = observation
        self.horizon = horizon
        self.dt = dt
        self.substeps = substeps
        self.sem_enabled = sem_enabled
        self.igm_enabled = igm_enabled
        self.record_enabled = record
        self.styles = styles if styles is not None else default_style_table()
        self.barrier = merge_end_barrier(self.layout)

        self.rng: np.random.Generator = np.random.default_rng(0)
        self.vehicles: list[VehicleState] = []
        self.agent_ids: tuple[int, ...] = ()
        self.t = 0
        self.done = True
        self.record: EpisodeRecord | None = None
        self._cav_targets: dict[int, tuple[float, float]] = {}
        self._hv_targets: dict[int, LaneRef] = {}

    # -- episode lifecycle ------------------------------------------------

    def reset(self, seed: int, mode: TrafficMode | None = None) -> dict[int, np.ndarray]:
        """Spawn a fresh scene; deterministic given (seed, mode)."""
        if mode is not None:
            self.mode = mode
        self.rng = np.random.default_rng(seed)
        lo, hi = self.mode.spawn_range
        n_cav = int(self.rng.integers(lo, hi + 1))
        n_hv = int(self.rng.integers(lo, hi + 1))
        self.vehicles, dropped = spawn_vehicles(
            self.rng, self.layout, n_cav, n_hv, self.mode.heterogeneous
        )
        self.agent_ids = tuple(v.id for v in self.vehicles if v.kind is VehicleKind.CAV)
        self.t = 0
        self.done = False
        self._cav_targets = {}
        self._hv_targets = {v.id: v.lane for v in self.vehicles if v.kind is VehicleKind.HV}
        self.record = None
        if self.record_enabled:
            self.record = EpisodeRecord(
                dt=self.dt,
                substeps_per_decision=self.substeps,
                seed=seed,
                mode=self.mode.level.value,
                heterogeneous=self.mode.heterogeneous,
                vehicles={
                    v.id: {
                        "kind": "CAV" if v.kind is VehicleKind.CAV else "HV",
                        "length": v.length,
                        "width": v.width,
                        "style": DrivingStyle(v.style).name.lower(),
                    }
                    for v in self.vehicles
                },
                dropped_spawns=dropped,
            )
            self._record_substates()
        return {aid: self.observe(aid) for aid in self.agent_ids}

    # -- observations ------------------------------------------------------

    def observe(self, agent_id: int) -> np.ndarray:
        """N_v x 5 feature matrix [isobservable, x, y, vx, vy]; row 0 is the
        ego (absolute), remaining rows the nearest vehicles (relative),
        normalized and clipped to [-1, 1].  Dead agents observe zeros."""
        p = self.obs_params
        obs = np.zeros((p.n_vehicles, 5), dtype=np.float64)
        ego = self._state_of(agent_id)
        if ego is None:
            return obs
        ps, ss = p.position_scale, p.speed_scale
        obs[0, 0] = 1.0
        obs[0, 1] = ego.x / ps
        obs[0, 2] = ego.y / ps
        obs[0, 3] = ego.v * math.cos(ego.heading) / ss
        obs[0, 4] = ego.v * math.sin(ego.heading) / ss
        row = 1
        for nb in perceived(ego, self.vehicles, p.perception):
            if row >= p.n_vehicles:
                break
            obs[row, 0] = 1.0
            obs[row, 1] = (nb.x - ego.x) / ps
            obs[row, 2] = (nb.y - ego.y) / ps
            obs[row, 3] = (nb.v * math.cos(nb.heading) - ego.v * math.cos(ego.heading)) / ss
            obs[row, 4] = (nb.v * math.sin(nb.heading) - ego.v * math.sin(ego.heading)) / ss
            row += 1
        np.clip(obs, -1.0, 1.0, out=obs)
        return obs

    # -- rewards -----------------------------------------------------------

    def agent_reward(self, state: VehicleState, collided: bool) -> tuple[float, dict[str, float]]:
        """Composite reward and its per-term breakdown for one CAV."""
        rp = self.reward_params
        r_c = -1.0 if collided else 0.0
        r_s = min((state.v - rp.v_low) / (rp.v_high - rp.v_low), 1.0)
        leader, d = self._vehicle_leader(state)
        if leader is None:
            r_h = 0.0
        else:
            r_h = math.log(d / (rp.t_h * max(state.v, 0.1)))
            r_h = min(max(r_h, -rp.headway_clamp), rp.headway_clamp)
        if state.lane.kind is not LaneKind.THROUGH:
            x = min(max(state.x - self.layout.ramp_start, 0.0), self.layout.ramp_total_length)
            L = self.layout.ramp_total_length
            r_m = rp.merge_sign * math.exp(-((x - L) ** 2) / (10.0 * L))
        else:
            r_m = 0.0
        total = rp.w_collision * r_c + rp.w_speed * r_s + rp.w_headway * r_h + rp.w_merge * r_m
        return total, {"collision": r_c, "speed": r_s, "headway": r_h, "merging": r_m}

    # -- stepping ----------------------------------------------------------

    def step(self, actions: dict[int, int | HighLevelAction]) -> StepOutcome:
        """Shield, propagate, score and terminate one decision interval."""
        if self.done:
            raise RuntimeError("step() on a finished episode; call reset()")
        live_cavs = [v for v in self.vehicles if v.kind is VehicleKind.CAV]
        live_hvs = [v for v in self.vehicles if v.kind is VehicleKind.HV]
        if not live_cavs:
            self.done = True
            return StepOutcome(self._all_obs(), {}, True, {"terminal": "all_exited"})

        proposed: dict[int, HighLevelAction] = {}
        ignored = []
        for aid, act in actions.items():
            if any(v.id == aid for v in live_cavs):
                proposed[aid] = HighLevelAction(act)
            else:
                ignored.append(aid)
        for v in live_cavs:
            if v.id not in proposed:
                proposed[v.id] = HighLevelAction.CRUISING

        sem: SemResult | None = None
        intents = None
        if self.igm_enabled:
            from .intent import generate_intent

            intents = {
                v.id: generate_intent(
                    v, proposed[v.id], self.layout, self.gains,
                    self.safety.horizon, self.dt, self.substeps, self.t,
                )
                for v in live_cavs
            }
        if self.sem_enabled and self.igm_enabled:
            sem = run_sem(
                live_cavs,
                live_hvs,
                proposed,
                self.layout,
                self.rng,
                intents=intents,
                gains=self.gains,
                params=self.safety,
                dt=self.dt,
                substeps=self.substeps,
                step=self.t,
                hv_targets=self._hv_targets,
                styles=self.styles,
            )
            final_actions = sem.actions
        else:
            final_actions = dict(proposed)

        masked: dict[int, bool] = {}
        for v in live_cavs:
            targets = execute_action(v, final_actions[v.id], self.layout)
            self._cav_targets[v.id] = (targets.target_v, self.layout.centerline_y(targets.target_lane))
            masked[v.id] = targets.masked

        # HV lane decisions, once per decision interval
        for hv in live_hvs:
            if self._hv_targets.get(hv.id, hv.lane) != hv.lane:
                continue  # change in progress
            entries = [
                LaneEntry(o.x, o.v, o.length, o.lane) for o in self.vehicles if o.id != hv.id
            ]
            entries.append(LaneEntry(self.barrier.x, 0.0, self.barrier.length, MERGE))
            idm, mobil = self.styles[hv.style]
            decision = hv_lane_decision(hv.x, hv.v, hv.length, hv.lane, entries, self.layout, idm, mobil)
            self._hv_targets[hv.id] = decision if decision is not None else hv.lane

        collided_ids, first_collision_substep = self._propagate_interval()

        exited = [v.id for v in self.vehicles if v.x > self.layout.through_length]
        if exited:
            self.vehicles = [v for v in self.vehicles if v.x <= self.layout.through_length]
            for vid in exited:
                self._cav_targets.pop(vid, None)
                self._hv_targets.pop(vid, None)

        rewards: dict[int, float] = {}
        breakdowns: dict[int, dict[str, float]] = {}
        for v in live_cavs:
            total, terms = self.agent_reward(v, v.id in collided_ids)
            rewards[v.id] = total
            breakdowns[v.id] = terms

        self.t += 1
        any_collision = bool(collided_ids)
        cavs_left = any(v.kind is VehicleKind.CAV for v in self.vehicles)
        terminal = None
        if any_collision:
            terminal = "collision"
        elif not cavs_left:
            terminal = "all_exited"
        elif self.t >= self.horizon:
            terminal = "horizon"
        self.done = terminal is not None

        info = {
            "collisions": sorted(collided_ids),
            "collision_substep": first_collision_substep,
            "proposed": {i: int(a) for i, a in proposed.items()},
            "final": {i: int(a) for i, a in final_actions.items()},
            "masked": masked,
            "ignored_actions": ignored,
            "exited": exited,
            "corrections": sem.corrections if sem is not None else [],
            "conflicts": sem.reports if sem is not None else [],
            "terminal": terminal,
            "reward_terms": breakdowns,
        }
        if self.record is not None:
            self.record.decisions.append(
                {
                    "proposed": {i: int(a) for i, a in proposed.items()},
                    "final": {i: int(a) for i, a in final_actions.items()},
                    "masked": {i: bool(m) for i, m in masked.items()},
                    "rewards": dict(rewards),
                    "reward_terms": {i: dict(b) for i, b in breakdowns.items()},
                    "collision": any_collision,
                    "collision_ids": sorted(collided_ids),
                    "corrections": [
                        {
                            "id": c.agent_id,
                            "old": int(c.old_action),
                            "new": int(c.new_action),
                            "all_conflicted": c.all_actions_conflicted,
                            "chosen_conflicted": c.chosen_conflicted,
                        }
                        for c in (sem.corrections if sem is not None else [])
                    ],
                    "conflicts": [
                        {"ego": r.ego_id, "other": r.other_id, "k": r.step, "min_margin": r.min_margin}
                        for r in (sem.reports if sem is not None else [])
                    ],
                    "exited": exited,
                }
            )
            if intents is not None:
                self.record.intents.append(
                    {i: traj.to_record(self.t - 1) for i, traj in intents.items()}
                )
            if terminal is not None:
                self.record.terminal = terminal
        return StepOutcome(self._all_obs(), rewards, self.done, info)

    # -- internals ---------------------------------------------------------

    def _propagate_interval(self) -> tuple[set[int], int | None]:
        """Run the substeps; returns (collided vehicle ids, first collision substep)."""
        layout = self.layout
        gains = self.gains
        kp, k_lat, k_head = gains.kp_speed, gains.k_lat, gains.k_head
        barrier = self.barrier
        collided: set[int] = set()
        first_sub: int | None = None
        for sub in range(self.substeps):
            states = self.vehicles
            n = len(states)
            # synchronized control computation from pre-step states
            ex = [s.x for s in states]
            ev = [s.v for s in states]
            el = [s.length for s in states]
            eramp = [s.lane.kind is not LaneKind.THROUGH for s in states]
            controls = []
            for i, s in enumerate(states):
                if s.kind is VehicleKind.CAV:
                    tv, ty = self._cav_targets[s.id]
                    a = speed_control(tv, s.v, kp)
                    d = lane_steer(s.y, s.v, s.heading, ty, k_lat, k_head)
                else:
                    ego_ramp = eramp[i]
                    best = math.inf
                    bi = -1
                    for j in range(n):
                        if j == i or eramp[j] != ego_ramp:
                            continue
                        dxj = ex[j] - s.x
                        if 0.0 < dxj < best:
                            best = dxj
                            bi = j
                    if ego_ramp:
                        dxb = barrier.x - s.x
                        if 0.0 < dxb < best:
                            best = dxb
                            bi = -2
                    idm, _ = self.styles[s.style]
                    if bi == -1:
                        a = idm_accel(s.v, math.inf, 0.0, idm)
                    else:
                        lead_len = barrier.length if bi == -2 else el[bi]
                        lead_v = 0.0 if bi == -2 else ev[bi]
                        gap = best - 0.5 * (lead_len + s.length)
                        a = IDM_DECEL_FLOOR if gap <= 0.0 else idm_accel(s.v, gap, s.v - lead_v, idm)
                    ty = layout.centerline_y(self._hv_targets.get(s.id, s.lane))
                    d = lane_steer(s.y, s.v, s.heading, ty, k_lat, k_head)
                controls.append((a, d))
            for s, (a, d) in zip(states, controls):
                s.x, s.y, s.v, s.heading = advance_bicycle(
                    s.x, s.y, s.v, s.heading, a, d, self.dt, s.length
                )
                s.lane = lane_at(layout, s.x, s.y, s.lane)
            # collision detection: pairwise footprints plus the lane-end rule
            for i in range(n):
                si = states[i]
                for j in range(i + 1, n):
                    sj = states[j]
                    if abs(sj.x - si.x) > 12.0:
                        continue
                    if states_overlap(si, sj):
                        collided.add(si.id)
                        collided.add(sj.id)
                # lane-end rule: a vehicle still on the ramp side past the
                # merge-lane end has run into the gore area
                if si.y < -0.5 * layout.lane_width and si.x + 0.5 * si.length > layout.merge_end:
                    collided.add(si.id)
            if collided and first_sub is None:
                first_sub = sub
            if self.record is not None:
                self._record_substates()
        return collided, first_sub

    def _record_substates(self) -> None:
        frame = [
            (
                v.id,
                "CAV" if v.kind is VehicleKind.CAV else "HV",
                v.x,
                v.y,
                v.v,
                v.heading,
                v.lane.kind.value,
            )
            for v in self.vehicles
        ]
        self.record.substep_states.append(frame)

    def _all_obs(self) -> dict[int, np.ndarray]:
        return {aid: self.observe(aid) for aid in self.agent_ids}

    def _state_of(self, agent_id: int) -> VehicleState | None:
        for v in self.vehicles:
            if v.id == agent_id:
                return v
        return None

    def _vehicle_leader(self, ego: VehicleState):
        """Nearest vehicle ahead on the ego's centerline (vehicles only)."""
        best = None
        best_dx = math.inf
        ego_ramp = ego.lane.kind is not LaneKind.THROUGH
        for other in self.vehicles:
            if other.id == ego.id:
                continue
            if (other.lane.kind is not LaneKind.THROUGH) != ego_ramp:
                continue
            dx = other.x - ego.x
            if 0.0 < dx < best_dx:
                best = other
                best_dx = dx
        return best, best_dx

    @property
    def live_cav_ids(self) -> tuple[int, ...]:
        return tuple(v.id for v in self.vehicles if v.kind is VehicleKind.CAV)
