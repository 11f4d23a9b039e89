"""Neighbor queries over a set of vehicle states, plus the merge-lane end.

The merge lane is bounded: a static barrier sits just past merge_end.  It
acts as a stopped leader for ramp/merge vehicles (IDM and safety margins)
and as a conflict body for predicted trajectories.  It is infrastructure,
not a vehicle, so it never appears in observations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .dynamics import VehicleState
from .geometry import MERGE, LaneKind, LaneRef, RoadLayout, same_centerline

PERCEPTION_RANGE = 150.0  # longitudinal sensing/communication radius [m]

BARRIER_ID = -1
# The barrier models the gore/guardrail continuing past the lane end.  It is
# long on purpose: intent samples are one decision interval apart, and a
# short obstacle could fall between consecutive samples of a fast
# trajectory; 30 m + vehicle length + inflation exceeds any one-interval
# jump at the speeds the controllers allow.
BARRIER_LENGTH = 30.0
BARRIER_WIDTH = 3.5


@dataclass(frozen=True)
class Barrier:
    """End-of-merge-lane obstacle.  Quacks like a stationary vehicle."""

    id: int
    x: float
    y: float
    length: float = BARRIER_LENGTH
    width: float = BARRIER_WIDTH
    v: float = 0.0
    heading: float = 0.0
    lane: LaneRef = field(default=MERGE)
    kind: None = None


def merge_end_barrier(layout: RoadLayout) -> Barrier:
    return Barrier(
        id=BARRIER_ID,
        x=layout.merge_end + 0.5 * BARRIER_LENGTH,
        y=-layout.lane_width,
    )


def on_ramp_side(state) -> bool:
    """True when the state's lane affiliation shares the ramp centerline."""
    return state.lane.kind in (LaneKind.RAMP, LaneKind.MERGE)


def lead_vehicle(ego, others, barrier: Barrier | None = None):
    """Nearest vehicle ahead on the ego's centerline.

    Returns (leader_or_None, center_distance).  The barrier counts as a
    leader for ramp/merge vehicles when supplied.
    """
    best = None
    best_dx = math.inf
    lane = ego.lane
    x = ego.x
    for other in others:
        if other is ego or other.id == ego.id:
            continue
        if not same_centerline(lane, other.lane):
            continue
        dx = other.x - x
        if 0.0 < dx < best_dx:
            best = other
            best_dx = dx
    if barrier is not None and on_ramp_side(ego):
        dx = barrier.x - x
        if 0.0 < dx < best_dx:
            best = barrier
            best_dx = dx
    return best, best_dx


def follow_vehicle(ego, others):
    """Nearest vehicle behind on the ego's centerline: (follower, center_distance)."""
    best = None
    best_dx = math.inf
    lane = ego.lane
    x = ego.x
    for other in others:
        if other is ego or other.id == ego.id:
            continue
        if not same_centerline(lane, other.lane):
            continue
        dx = x - other.x
        if 0.0 < dx < best_dx:
            best = other
            best_dx = dx
    return best, best_dx


def neighbors_on_centerline(ego_x: float, lane: LaneRef, others):
    """(leader, follower) around longitudinal position ego_x on a given centerline."""
    leader = None
    follower = None
    lead_dx = math.inf
    follow_dx = math.inf
    for other in others:
        if not same_centerline(lane, other.lane):
            continue
        dx = other.x - ego_x
        if dx > 0.0:
            if dx < lead_dx:
                leader, lead_dx = other, dx
        elif dx < 0.0:
            if -dx < follow_dx:
                follower, follow_dx = other, -dx
    return leader, follower


def perceived(ego, others, radius: float = PERCEPTION_RANGE) -> list:
    """Vehicles within the longitudinal perception radius, nearest first."""
    found = []
    x = ego.x
    for other in others:
        if other is ego or other.id == ego.id:
            continue
        dx = abs(other.x - x)
        if dx <= radius:
            found.append((dx, other.id, other))
    found.sort(key=lambda t: (t[0], t[1]))
    return [t[2] for t in found]


def bumper_gap(rear, front) -> float:
    """Bumper-to-bumper longitudinal gap between two states."""
    return front.x - rear.x - 0.5 * (front.length + rear.length)


def rectangles_overlap(
    ax: float, ay: float, ah: float, al: float, aw: float,
    bx: float, by: float, bh: float, bl: float, bw: float,
    inflation: float = 0.0,
) -> bool:
    """Separating-axis overlap test for two oriented rectangles.

    (x, y) centers, h headings, l/w full length/width; each rectangle is
    grown by ``inflation`` on every side.  Touching edges do not overlap.
    """
    dx = bx - ax
    dy = by - ay
    # cheap circle pre-check
    ra = 0.5 * math.hypot(al, aw) + inflation * math.sqrt(2.0)
    rb = 0.5 * math.hypot(bl, bw) + inflation * math.sqrt(2.0)
    if dx * dx + dy * dy > (ra + rb) * (ra + rb):
        return False
    hl_a = 0.5 * al + inflation
    hw_a = 0.5 * aw + inflation
    hl_b = 0.5 * bl + inflation
    hw_b = 0.5 * bw + inflation
    cos_a = math.cos(ah)
    sin_a = math.sin(ah)
    cos_b = math.cos(bh)
    sin_b = math.sin(bh)
    # axes: (cos, sin) and (-sin, cos) of each rectangle
    for ux, uy in ((cos_a, sin_a), (-sin_a, cos_a), (cos_b, sin_b), (-sin_b, cos_b)):
        # projection of the center offset
        d = abs(dx * ux + dy * uy)
        # projected half-extents of both rectangles
        ea = hl_a * abs(cos_a * ux + sin_a * uy) + hw_a * abs(-sin_a * ux + cos_a * uy)
        eb = hl_b * abs(cos_b * ux + sin_b * uy) + hw_b * abs(-sin_b * ux + cos_b * uy)
        if d >= ea + eb:
            return False
    return True


def states_overlap(a, b, inflation: float = 0.0) -> bool:
    return rectangles_overlap(
        a.x, a.y, a.heading, a.length, a.width,
        b.x, b.y, b.heading, b.length, b.width,
        inflation,
    )
