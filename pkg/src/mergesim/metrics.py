"""Evaluation instrumentation over recorded episodes.

All metrics are pure post-processing over EpisodeRecord objects, which the
environment fills in live and the replay reader reconstructs from logs;
computing a metric from a replay must give exactly the live value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import RoadLayout

BREAKDOWN_SPEED = 16.0  # TMS below this marks a bottleneck breakdown [m/s]

# substep state tuple layout: (id, kind, x, y, v, theta, lane)
_ID, _KIND, _X, _Y, _V, _THETA, _LANE = range(7)


@dataclass
class EpisodeRecord:
    """Everything one episode produced: per-substep states, per-decision
    actions/rewards/corrections, and the terminal cause.

    ``substep_states`` holds one frame per substep plus the initial frame;
    frame f is the scene at time f * dt.
    """

    dt: float
    substeps_per_decision: int
    seed: int
    mode: str
    heterogeneous: bool
    vehicles: dict[int, dict]
    dropped_spawns: int = 0
    substep_states: list[list[tuple]] = field(default_factory=list)
    decisions: list[dict] = field(default_factory=list)
    intents: list[dict] = field(default_factory=list)
    terminal: str | None = None

    @property
    def n_steps(self) -> int:
        return len(self.decisions)


@dataclass
class TmsGrid:
    """Time-mean speeds per (coil, time window); NaN marks empty cells."""

    coils: tuple[float, ...]
    window: int  # window length in decision steps
    speeds: np.ndarray
    counts: np.ndarray
    breakdown: np.ndarray  # True where a non-empty cell is below threshold


def collision_rate(records) -> float:
    """Fraction of decision steps flagged with a collision."""
    records = list(records)
    total = sum(r.n_steps for r in records)
    if not records or total == 0:
        raise ValueError("no decision steps to rate")
    flagged = sum(1 for r in records for d in r.decisions if d["collision"])
    return flagged / total


def average_speed(records) -> float:
    """Mean speed over all CAV substep samples (initial frames excluded)."""
    total = 0.0
    count = 0
    for r in records:
        for frame in r.substep_states[1:]:
            for row in frame:
                if row[_KIND] == "CAV":
                    total += row[_V]
                    count += 1
    if count == 0:
        raise ValueError("no CAV substep samples")
    return total / count


def mean_agent_return(records) -> float:
    """Mean over agents of each agent's summed per-step reward."""
    totals: dict[tuple[int, int], float] = {}
    for ep, r in enumerate(records):
        for d in r.decisions:
            for aid, rew in d["rewards"].items():
                totals[(ep, aid)] = totals.get((ep, aid), 0.0) + rew
    if not totals:
        raise ValueError("no rewards recorded")
    return sum(totals.values()) / len(totals)


def default_conflict_zone(layout: RoadLayout) -> tuple[float, float, float, float]:
    """Merge-end +- 10 m longitudinally, covering both lanes laterally."""
    return (
        layout.merge_end - 10.0,
        layout.merge_end + 10.0,
        -1.5 * layout.lane_width,
        0.5 * layout.lane_width,
    )


def _entry_fraction(prev: float, cur: float, lo: float, hi: float) -> float:
    """Fraction of the segment prev->cur at which the coordinate enters [lo, hi]."""
    if prev < lo:
        return (lo - prev) / (cur - prev)
    if prev > hi:
        return (prev - hi) / (prev - cur)
    return 0.0


def _exit_fraction(prev: float, cur: float, lo: float, hi: float) -> float:
    """Fraction of the segment prev->cur at which the coordinate leaves [lo, hi]."""
    if cur < lo:
        return (prev - lo) / (prev - cur)
    if cur > hi:
        return (hi - prev) / (cur - prev)
    return 1.0


def _traversals(record: EpisodeRecord, zone) -> list[tuple[float, float, int]]:
    """Completed zone traversals as (t_enter, t_exit, vehicle id)."""
    x_lo, x_hi, y_lo, y_hi = zone
    tracks: dict[int, list[tuple[int, float, float]]] = {}
    for f, frame in enumerate(record.substep_states):
        for row in frame:
            tracks.setdefault(row[_ID], []).append((f, row[_X], row[_Y]))
    events = []
    dt = record.dt
    for vid, samples in tracks.items():
        inside_prev = False
        t_enter = None
        for i in range(len(samples)):
            f, x, y = samples[i]
            inside = x_lo <= x <= x_hi and y_lo <= y <= y_hi
            if inside and not inside_prev:
                if i == 0:
                    t_enter = f * dt
                else:
                    pf, px, py = samples[i - 1]
                    frac = max(
                        _entry_fraction(px, x, x_lo, x_hi),
                        _entry_fraction(py, y, y_lo, y_hi),
                    )
                    t_enter = (pf + frac * (f - pf)) * dt
            elif inside_prev and not inside:
                pf, px, py = samples[i - 1]
                frac = min(
                    _exit_fraction(px, x, x_lo, x_hi),
                    _exit_fraction(py, y, y_lo, y_hi),
                )
                events.append((t_enter, (pf + frac * (f - pf)) * dt, vid))
                t_enter = None
            inside_prev = inside
        # a traversal still in progress at record end is incomplete: dropped
    events.sort()
    return events


def pet(records, layout: RoadLayout | None = None, zone=None) -> list[float]:
    """Post-encroachment times at the merge conflict zone.

    For consecutive completed traversals by different vehicles, PET is the
    second vehicle's entry time minus the first vehicle's exit time,
    emitted only when non-negative.  Timestamps interpolate linearly at
    zone boundaries.
    """
    if zone is None:
        if layout is None:
            raise ValueError("need a layout or an explicit zone")
        zone = default_conflict_zone(layout)
    values = []
    for record in records:
        events = _traversals(record, zone)
        for first, second in zip(events, events[1:]):
            if first[2] == second[2]:
                continue
            gap = second[0] - first[1]
            if gap >= 0.0:
                values.append(gap)
    return values


def coil_tms(records, layout: RoadLayout, window: int = 5) -> TmsGrid:
    """Time-mean speed of vehicles crossing each virtual coil per window.

    A vehicle crosses a coil when its front bumper passes the coil position
    between consecutive substeps; the speed at the crossing substep is
    recorded into the window of that decision step.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    records = list(records)
    coils = layout.coil_positions
    n_windows = 0
    for r in records:
        n_windows = max(n_windows, -(-r.n_steps // window))
    n_windows = max(n_windows, 1)
    sums = np.zeros((len(coils), n_windows))
    counts = np.zeros((len(coils), n_windows), dtype=np.int64)
    for record in records:
        substeps = record.substeps_per_decision
        half_len = {vid: 0.5 * meta["length"] for vid, meta in record.vehicles.items()}
        prev_front: dict[int, float] = {}
        for f, frame in enumerate(record.substep_states):
            for row in frame:
                vid = row[_ID]
                front = row[_X] + half_len[vid]
                if f > 0 and vid in prev_front:
                    before = prev_front[vid]
                    if before < front:
                        for ci, c in enumerate(coils):
                            if before < c <= front:
                                step = (f - 1) // substeps
                                w = min(step // window, n_windows - 1)
                                sums[ci, w] += row[_V]
                                counts[ci, w] += 1
                prev_front[vid] = front
    with np.errstate(invalid="ignore"):
        speeds = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    breakdown = (counts > 0) & (speeds < BREAKDOWN_SPEED)
    return TmsGrid(coils=coils, window=window, speeds=speeds, counts=counts, breakdown=breakdown)


def eval_summary(records, layout: RoadLayout) -> dict[str, float]:
    """Headline metrics table for a batch of evaluation episodes."""
    records = list(records)
    return {
        "episodes": float(len(records)),
        "mean_return": mean_agent_return(records),
        "collision_rate": collision_rate(records),
        "average_speed": average_speed(records),
        "mean_pet": float(np.mean(p)) if (p := pet(records, layout)) else float("nan"),
    }
