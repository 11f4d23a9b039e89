"""Road layout and spatial queries for the on-ramp merging scenario.

Coordinate conventions used throughout the package:

* longitudinal ``x`` is arclength along the road (all lanes are straight and
  parallel, so one coordinate serves every lane),
* lateral ``y`` is the signed offset from the through-lane centerline,
  positive to the left.

The ramp approach and the merge lane share one centerline at
``y = -lane_width``; they differ only by the longitudinal interval they
occupy.  The through lane runs the full road length at ``y = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class LaneKind(Enum):
    THROUGH = "through"
    RAMP = "ramp"
    MERGE = "merge"


@dataclass(frozen=True)
class LaneRef:
    """Reference to one lane; ``index`` is 0 everywhere in the default layout."""

    kind: LaneKind
    index: int = 0


THROUGH = LaneRef(LaneKind.THROUGH)
RAMP = LaneRef(LaneKind.RAMP)
MERGE = LaneRef(LaneKind.MERGE)

#: Virtual-coil cross-sections, 325 m to 450 m at 25 m intervals.
DEFAULT_COILS = (325.0, 350.0, 375.0, 400.0, 425.0, 450.0)


@dataclass(frozen=True)
class RoadLayout:
    """Validated merging-road geometry.  Immutable; safe to share."""

    through_length: float
    merge_start: float
    merge_lane_length: float
    ramp_approach_length: float
    lane_width: float
    coil_positions: tuple[float, ...]

    @property
    def merge_end(self) -> float:
        return self.merge_start + self.merge_lane_length

    @property
    def ramp_start(self) -> float:
        return self.merge_start - self.ramp_approach_length

    @property
    def ramp_total_length(self) -> float:
        """Full ramp extent (approach + merge lane), the L of the merging
        penalty and end-of-lane priority terms."""
        return self.ramp_approach_length + self.merge_lane_length

    def centerline_y(self, lane: LaneRef) -> float:
        if lane.kind is LaneKind.THROUGH:
            return 0.0
        return -self.lane_width


def build_layout(
    through_length: float = 520.0,
    merge_start: float = 320.0,
    merge_lane_length: float = 100.0,
    ramp_approach_length: float = 220.0,
    lane_width: float = 4.0,
    coil_positions: tuple[float, ...] | None = None,
) -> RoadLayout:
    """Build and validate a road layout.

    Raises ValueError for degenerate geometry: non-positive lengths, a merge
    lane extending past the road end, a ramp starting before x = 0, or coil
    positions that are not strictly increasing within the road extent.
    """
    coils = DEFAULT_COILS if coil_positions is None else tuple(float(c) for c in coil_positions)
    if through_length <= 0 or merge_lane_length <= 0 or lane_width <= 0:
        raise ValueError("through_length, merge_lane_length and lane_width must be positive")
    if ramp_approach_length <= 0:
        raise ValueError("ramp_approach_length must be positive")
    if merge_start + merge_lane_length > through_length:
        raise ValueError(
            f"merge lane ends at {merge_start + merge_lane_length} m, "
            f"past the road end at {through_length} m"
        )
    if merge_start - ramp_approach_length < 0:
        raise ValueError("ramp approach would start before x = 0")
    for a, b in zip(coils, coils[1:]):
        if b <= a:
            raise ValueError(f"coil positions must be strictly increasing, got {a} then {b}")
    if coils and (coils[0] < 0 or coils[-1] > through_length):
        raise ValueError("coil positions must lie within [0, through_length]")
    return RoadLayout(
        through_length=float(through_length),
        merge_start=float(merge_start),
        merge_lane_length=float(merge_lane_length),
        ramp_approach_length=float(ramp_approach_length),
        lane_width=float(lane_width),
        coil_positions=coils,
    )


def ramp_progress(layout: RoadLayout, state) -> float:
    """Distance travelled along the ramp, in [0, ramp_total_length].

    Defined only for vehicles on the ramp approach or the merge lane;
    raises ValueError for a through-lane vehicle.
    """
    if state.lane.kind is LaneKind.THROUGH:
        raise ValueError(f"vehicle {state.id} is on the through lane, not the ramp")
    x = state.x - layout.ramp_start
    if x < 0.0:
        return 0.0
    if x > layout.ramp_total_length:
        return layout.ramp_total_length
    return x


def is_on_merge_lane(layout: RoadLayout, state) -> bool:
    """True for vehicles on the ramp approach or the merge lane.

    The priority terms treat the whole ramp+merge section as "merge lane":
    a vehicle scoring the end-of-lane term x/L must also receive the flat
    merging term, so both predicates fire for the same vehicle set.
    """
    return state.lane.kind in (LaneKind.RAMP, LaneKind.MERGE)


def ramp_lane_for_x(layout: RoadLayout, x: float) -> LaneRef:
    """Lane kind on the ramp centerline at longitudinal position x."""
    return RAMP if x < layout.merge_start else MERGE


def same_centerline(a: LaneRef, b: LaneRef) -> bool:
    """True when two lane references share a physical centerline
    (RAMP and MERGE are the same strip of asphalt)."""
    if a.kind is LaneKind.THROUGH:
        return b.kind is LaneKind.THROUGH
    return b.kind is not LaneKind.THROUGH


def lane_at(layout: RoadLayout, x: float, y: float, current: LaneRef | None = None) -> LaneRef:
    """Lane affiliation of a position: nearest centerline, ties keep ``current``.

    On the ramp centerline the kind switches from RAMP to MERGE at
    merge_start; past merge_end the affiliation stays MERGE (the barrier
    zone, see mergesim.env).
    """
    d_through = abs(y)
    d_ramp = abs(y + layout.lane_width)
    if d_through < d_ramp:
        return THROUGH
    if d_ramp < d_through:
        return ramp_lane_for_x(layout, x)
    if current is not None:
        return current
    return THROUGH


def left_lane(layout: RoadLayout, lane: LaneRef, x: float) -> LaneRef | None:
    """Lane to the left, or None if there is no adjacent lane there."""
    if lane.kind is LaneKind.MERGE:
        return THROUGH
    return None


def right_lane(layout: RoadLayout, lane: LaneRef, x: float) -> LaneRef | None:
    """Lane to the right, or None.  The merge lane is adjacent to the
    through lane only where it physically exists alongside it."""
    if lane.kind is LaneKind.THROUGH and layout.merge_start <= x < layout.merge_end:
        return MERGE
    return None


def adjacent_lane(layout: RoadLayout, lane: LaneRef, x: float, direction: int) -> LaneRef | None:
    """direction +1 = left, -1 = right."""
    if direction > 0:
        return left_lane(layout, lane, x)
    return right_lane(layout, lane, x)
