"""Priority-ordered intent checking and correction (the safety shield).

Every CAV gets a priority score (merging urgency + closeness to the lane
end + headway danger + tie-breaking noise).  In descending priority order,
each CAV's intent trajectory is tested for overlap against its neighbors'
trajectories: already-finalized intents of higher-priority CAVs, original
intents of not-yet-checked CAVs, IDM/MOBIL predictions for HVs, and the
static merge-end barrier.  On conflict, the action is replaced by the one
whose worst-step safety margin is largest, and the stored intent is
regenerated so lower-priority CAVs check against the corrected trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    DEFAULT_GAINS,
    DT_SIM,
    SUBSTEPS_PER_DECISION,
    ControllerGains,
    HighLevelAction,
    TIE_BREAK_ORDER,
    V_FLOOR,
    VehicleState,
    available_actions,
    execute_action,
)
from .geometry import RoadLayout, is_on_merge_lane, ramp_progress, same_centerline
from .intent import DEFAULT_HORIZON, IntentTrajectory, generate_intent, predict_hv, static_trajectory
from .scene import (
    PERCEPTION_RANGE,
    lead_vehicle,
    merge_end_barrier,
    perceived,
    rectangles_overlap,
)

_TIE_RANK = {action: rank for rank, action in enumerate(TIE_BREAK_ORDER)}

_LANE_CHANGE = (HighLevelAction.TURN_LEFT, HighLevelAction.TURN_RIGHT)


@dataclass(frozen=True)
class SafetyParams:
    alpha_merge: float = 1.0  # weight of the on-merge-lane term
    alpha_end: float = 1.0  # weight of the end-of-lane term
    alpha_headway: float = 0.5  # weight of the headway term
    t_h: float = 1.2  # time-headway threshold [s]
    noise_var: float = 0.001  # variance of the tie-breaking priority noise
    headway_clamp: float = 5.0  # |p_h| bound, keeps no-leader cases finite
    inflation: float = 0.5  # conflict-check rectangle margin [m]
    conflict_substeps: int = 4  # interpolated poses per prediction interval
    perception: float = PERCEPTION_RANGE
    horizon: int = DEFAULT_HORIZON


DEFAULT_SAFETY = SafetyParams()


@dataclass(frozen=True)
class PriorityEntry:
    agent_id: int
    score: float
    noise: float


@dataclass(frozen=True)
class PriorityList:
    """CAV ids with priority scores, sorted strictly descending."""

    entries: tuple[PriorityEntry, ...]

    def order(self) -> tuple[int, ...]:
        return tuple(e.agent_id for e in self.entries)


@dataclass(frozen=True)
class ConflictReport:
    ego_id: int
    other_id: int
    step: int  # first conflicting prediction step, 1-based
    min_margin: float  # minimum center distance over the horizon [m]


@dataclass(frozen=True)
class CorrectionRecord:
    agent_id: int
    old_action: HighLevelAction
    new_action: HighLevelAction
    all_actions_conflicted: bool  # no available action was conflict-free
    chosen_conflicted: bool


@dataclass
class SemResult:
    actions: dict[int, HighLevelAction]
    reports: list[ConflictReport]
    corrections: list[CorrectionRecord]
    priorities: PriorityList
    final_intents: dict[int, IntentTrajectory]
    hv_predictions: dict[int, IntentTrajectory]
    barrier_trajectory: IntentTrajectory | None = None


def priority_score(
    agent: VehicleState,
    d_headway: float,
    layout: RoadLayout,
    rng: np.random.Generator,
    params: SafetyParams = DEFAULT_SAFETY,
) -> PriorityEntry:
    """Priority of one CAV: merging + end-of-lane + headway terms plus noise.

    ``d_headway`` is the center distance to the leader (infinite when there
    is none; the headway term is clamped so that stays finite).
    """
    if is_on_merge_lane(layout, agent):
        p_m = 0.5
        p_e = ramp_progress(layout, agent) / layout.ramp_total_length
    else:
        p_m = 0.0
        p_e = 0.0
    v = max(agent.v, V_FLOOR)
    if math.isinf(d_headway):
        p_h = -params.headway_clamp
    else:
        p_h = -math.log(d_headway / (params.t_h * v))
        p_h = min(max(p_h, -params.headway_clamp), params.headway_clamp)
    noise = rng.normal(0.0, math.sqrt(params.noise_var))
    score = params.alpha_merge * p_m + params.alpha_end * p_e + params.alpha_headway * p_h + noise
    return PriorityEntry(agent_id=agent.id, score=score, noise=noise)


def build_priority_list(
    cavs,
    all_states,
    layout: RoadLayout,
    rng: np.random.Generator,
    params: SafetyParams = DEFAULT_SAFETY,
    barrier=None,
) -> PriorityList:
    """Score every CAV (in id order, so the noise draw is reproducible) and
    sort descending.  The merge-end barrier counts as a leader."""
    if barrier is None:
        barrier = merge_end_barrier(layout)
    entries = []
    for cav in sorted(cavs, key=lambda s: s.id):
        _, d = lead_vehicle(cav, all_states, barrier)
        entries.append(priority_score(cav, d, layout, rng, params))
    entries.sort(key=lambda e: (-e.score, e.agent_id))
    return PriorityList(entries=tuple(entries))


def trajectories_conflict(
    a: IntentTrajectory, b: IntentTrajectory, inflation: float = 0.5, substeps: int = 4
) -> ConflictReport | None:
    """First prediction step at which the two inflated footprints overlap.

    Samples are one decision interval apart, so fast closings could slip
    between them; each segment is therefore also tested at ``substeps``
    interpolated poses, and an overlap anywhere on the segment ending at
    sample k is reported as step k.  Returns None when the trajectories
    never conflict.  Horizons must match.
    """
    if a.horizon != b.horizon:
        raise ValueError(f"horizon mismatch: {a.horizon} vs {b.horizon}")
    first = 0
    min_dist = math.inf
    pa, pb = a.origin, b.origin
    for k in range(a.horizon):
        sa = a.samples[k]
        sb = b.samples[k]
        dist = math.hypot(sb.x - sa.x, sb.y - sa.y)
        if dist < min_dist:
            min_dist = dist
        if first == 0:
            if substeps <= 1:
                points = (((sa.x, sa.y, sa.heading), (sb.x, sb.y, sb.heading)),)
            else:
                points = tuple(
                    (
                        _lerp_sample(pa, sa, j / substeps),
                        _lerp_sample(pb, sb, j / substeps),
                    )
                    for j in range(1, substeps + 1)
                )
            for qa, qb in points:
                if rectangles_overlap(
                    qa[0], qa[1], qa[2], a.length, a.width,
                    qb[0], qb[1], qb[2], b.length, b.width,
                    inflation,
                ):
                    first = k + 1
                    break
        pa, pb = sa, sb
    if first == 0:
        return None
    return ConflictReport(ego_id=a.owner, other_id=b.owner, step=first, min_margin=min_dist)


def _lerp_sample(prev, cur, t: float) -> tuple[float, float, float]:
    return (
        prev.x + (cur.x - prev.x) * t,
        prev.y + (cur.y - prev.y) * t,
        prev.heading + (cur.heading - prev.heading) * t,
    )


def safety_margin(
    action: HighLevelAction,
    ego: VehicleState,
    ego_intent: IntentTrajectory,
    neighbors,
    k: int,
    layout: RoadLayout,
) -> float:
    """Longitudinal safety margin of an action at prediction step k (1-based).

    Lane change: smallest |x_neighbor - x_ego| over neighbors (preceding and
    following, the merge-end barrier included) on the *target* centerline at
    step k; an empty target lane gives +inf.  Otherwise: distance to the
    nearest neighbor ahead on the ego's predicted lane.  Absent neighbors
    contribute +inf.

    A neighbor whose longitudinal offset changes sign during the segment
    ending at k (a pass-through) contributes a zero margin at k: the
    continuous |gap| reached zero between the samples even though the
    endpoint values look clear.
    """
    idx = k - 1
    es = ego_intent.samples[idx]
    ep = ego_intent.samples[idx - 1] if idx > 0 else ego_intent.origin
    ex = es.x
    targets = execute_action(ego, action, layout)
    margin = math.inf
    if targets.effective in _LANE_CHANGE:
        lane_ref = targets.target_lane
    else:
        lane_ref = es.lane
    ahead_only = targets.effective not in _LANE_CHANGE
    for nb in neighbors:
        s = nb.samples[idx]
        if not same_centerline(s.lane, lane_ref):
            continue
        d = s.x - ex
        prev = nb.samples[idx - 1] if idx > 0 else nb.origin
        if (prev.x - ep.x) * d < 0.0:
            return 0.0  # crossed the ego's position inside this segment
        if ahead_only:
            if 0.0 < d < margin:
                margin = d
        else:
            if abs(d) < margin:
                margin = abs(d)
    return margin


@dataclass(frozen=True)
class ActionEvaluation:
    action: HighLevelAction
    intent: IntentTrajectory
    min_margin: float
    conflicted: bool

    @property
    def score(self) -> float:
        """Worst-step margin, pushed below zero when the intention overlaps
        a neighbor trajectory: footprints intersecting means the true
        clearance is negative no matter what the center distances say.
        Conflicted options keep their relative order."""
        if not self.conflicted:
            return self.min_margin
        return min(self.min_margin, _CONFLICT_CAP) - 2.0 * _CONFLICT_CAP


_CONFLICT_CAP = 1e6


def _evaluate_action(
    ego: VehicleState,
    action: HighLevelAction,
    neighbors,
    layout: RoadLayout,
    gains: ControllerGains,
    params: SafetyParams,
    dt: float,
    substeps: int,
    created_at: int,
) -> ActionEvaluation:
    intent = generate_intent(ego, action, layout, gains, params.horizon, dt, substeps, created_at)
    margin = math.inf
    for k in range(1, params.horizon + 1):
        m = safety_margin(action, ego, intent, neighbors, k, layout)
        if m < margin:
            margin = m
    conflicted = any(
        trajectories_conflict(intent, nb, params.inflation, params.conflict_substeps) is not None
        for nb in neighbors
    )
    return ActionEvaluation(action=action, intent=intent, min_margin=margin, conflicted=conflicted)


def _best_evaluation(evals) -> ActionEvaluation:
    return max(evals, key=lambda e: (e.score, -_TIE_RANK[e.action]))


def correct_intention(
    ego: VehicleState,
    actions,
    neighbors,
    layout: RoadLayout,
    gains: ControllerGains = DEFAULT_GAINS,
    params: SafetyParams = DEFAULT_SAFETY,
    dt: float = DT_SIM,
    substeps: int = SUBSTEPS_PER_DECISION,
    created_at: int = 0,
) -> HighLevelAction:
    """Replace an unsafe intention: argmax over available actions of the
    worst-step safety margin (negative when the candidate intention itself
    overlaps a neighbor trajectory), ties broken SLOW_DOWN > CRUISING >
    SPEED_UP > TURN_RIGHT > TURN_LEFT."""
    evals = [
        _evaluate_action(ego, a, neighbors, layout, gains, params, dt, substeps, created_at)
        for a in actions
    ]
    return _best_evaluation(evals).action


def run_sem(
    cavs,
    hvs,
    proposed: dict[int, HighLevelAction],
    layout: RoadLayout,
    rng: np.random.Generator,
    intents: dict[int, IntentTrajectory] | None = None,
    gains: ControllerGains = DEFAULT_GAINS,
    params: SafetyParams = DEFAULT_SAFETY,
    dt: float = DT_SIM,
    substeps: int = SUBSTEPS_PER_DECISION,
    step: int = 0,
    hv_targets: dict[int, object] | None = None,
    styles=None,
) -> SemResult:
    """One full shield pass over a scene.

    ``proposed`` maps CAV id to its policy action; ``intents`` may carry the
    already-generated intent trajectories (they are generated here when
    omitted).  ``hv_targets`` optionally carries lane changes already in
    progress for HVs.  Every CAV exits with some action.
    """
    cavs = list(cavs)
    hvs = list(hvs)
    all_states = cavs + hvs
    barrier = merge_end_barrier(layout)
    barrier_traj = static_trajectory(barrier, params.horizon, step)
    plist = build_priority_list(cavs, all_states, layout, rng, params, barrier)

    if intents is None:
        intents = {}
        for cav in cavs:
            intents[cav.id] = generate_intent(
                cav, proposed[cav.id], layout, gains, params.horizon, dt, substeps, step
            )
    current_intents = dict(intents)

    # HV predictions depend only on the frozen scene, so one prediction per
    # HV serves every ego identically.
    hv_preds = {}
    for hv in hvs:
        tgt = hv_targets.get(hv.id) if hv_targets else None
        hv_preds[hv.id] = predict_hv(
            hv, all_states, layout, gains, params.horizon, dt, substeps, barrier, tgt, step, styles
        )

    by_id = {s.id: s for s in all_states}
    cav_ids = {c.id for c in cavs}
    actions = dict(proposed)
    reports: list[ConflictReport] = []
    corrections: list[CorrectionRecord] = []

    for entry in plist.entries:
        ego = by_id[entry.agent_id]
        nb_trajs = []
        for nb in perceived(ego, all_states, params.perception):
            nb_trajs.append(current_intents[nb.id] if nb.id in cav_ids else hv_preds[nb.id])
        if abs(barrier.x - ego.x) <= params.perception:
            nb_trajs.append(barrier_traj)
        ego_intent = current_intents[ego.id]
        conflicts = []
        for nt in nb_trajs:
            report = trajectories_conflict(ego_intent, nt, params.inflation, params.conflict_substeps)
            if report is not None:
                conflicts.append(report)
        reports.extend(conflicts)
        if not conflicts:
            continue
        evals = [
            _evaluate_action(ego, a, nb_trajs, layout, gains, params, dt, substeps, step)
            for a in available_actions(ego, layout)
        ]
        best = _best_evaluation(evals)
        corrections.append(
            CorrectionRecord(
                agent_id=ego.id,
                old_action=actions[ego.id],
                new_action=best.action,
                all_actions_conflicted=all(e.conflicted for e in evals),
                chosen_conflicted=best.conflicted,
            )
        )
        actions[ego.id] = best.action
        current_intents[ego.id] = best.intent

    return SemResult(
        actions=actions,
        reports=reports,
        corrections=corrections,
        priorities=plist,
        final_intents=current_intents,
        hv_predictions=hv_preds,
        barrier_trajectory=barrier_traj,
    )
