"""Piecewise-affine baker-map family on the unit square.

The reversible map stretches four vertical slabs of the square horizontally
and rescales them vertically.  The slab boundaries are fixed by a width
parameter ``ell`` and the vertical rates are tilted by a dissipation
parameter ``q``:

    region A = [0, ell)      ->  x' = x/(2 ell) + 1/2,          y' = (1/2 - q) y + (1/2 + q)
    region B = [ell, 1/2)    ->  x' = (x - ell)/(1 - 2 ell),    y' = (1 - 2 ell - q) y + (2 ell + q)
    region C = [1/2, 3/4)    ->  x' = 2 x - 1/2,                y' = (1/2 + q) y
    region D = [3/4, 1]      ->  x' = 2 x - 3/2,                y' = (2 ell + q) y

The x-dynamics never depends on y, so every x-projected observable is a
function of the symbolic region sequence alone.  An optional
volume-preserving perturbation flips the lower-half y-coordinates inside a
vertical strip; composing it after the baker step destroys invertibility
without touching any x-projected statistic.

All functions here are pure and stateless; array variants operate on numpy
vectors and share the exact comparison order of the scalar code paths.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import DomainError

__all__ = [
    "Region",
    "MapVariant",
    "ReversalScheme",
    "Point",
    "MapParams",
    "ReversibilityReport",
    "classify_region",
    "region_indices",
    "branch_coefficients",
    "jacobian",
    "jacobians",
    "contraction_rate",
    "contraction_rates",
    "baker_step",
    "strip_flip",
    "step",
    "step_arrays",
    "time_reversal",
    "time_reversal_arrays",
    "region_reverse",
    "check_reversibility",
]


class Region(enum.IntEnum):
    """Cells of the Markov partition along the x-axis."""

    A = 0
    B = 1
    C = 2
    D = 3


class MapVariant(enum.Enum):
    """Which dynamics to iterate: the bare baker map or its composition
    with the strip flip (applied after each baker step)."""

    REVERSIBLE = "reversible"
    IRREVERSIBLE = "irreversible"


class ReversalScheme(enum.Enum):
    """Region-level time-reversal action.

    Q4 swaps A and D and fixes B, C (the equilibrium family q = 0).
    Q3 swaps B and C and fixes A, D (the family q = 1/2 - 2 ell, where the
    reversal is only available at region level).
    """

    Q4 = "q4"
    Q3 = "q3"


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class MapParams:
    """Parameters of one map instance.

    ``ell`` in (0, 1/4] sets the partition; ``q`` in [0, 1/2) tilts the
    vertical rates (q = 0 is the equilibrium line).  ``strip_x`` and
    ``strip_eps`` delimit the flip strip [strip_x, strip_x + strip_eps];
    they default to [ell, 1/2], the full B slab.
    """

    ell: float
    q: float = 0.0
    strip_x: float | None = None
    strip_eps: float | None = None

    def __post_init__(self):
        if not 0.0 < self.ell <= 0.25:
            raise DomainError(f"ell must lie in (0, 1/4], got {self.ell}")
        if not 0.0 <= self.q <= 0.5:
            raise DomainError(f"q must lie in [0, 1/2], got {self.q}")
        if self.strip_x is None:
            object.__setattr__(self, "strip_x", self.ell)
        if self.strip_eps is None:
            object.__setattr__(self, "strip_eps", 0.5 - self.ell)
        if not 0.0 <= self.strip_x < 1.0:
            raise DomainError(f"strip_x must lie in [0, 1), got {self.strip_x}")
        if self.strip_eps < 0.0 or self.strip_x + self.strip_eps > 1.0:
            raise DomainError(
                f"strip [{self.strip_x}, {self.strip_x + self.strip_eps}] "
                "must be contained in [0, 1]"
            )
        # all four volume ratios must stay strictly positive; q = 1/2 would
        # collapse region A (and q = 1 - 2 ell region B) to zero volume
        if min(jacobians(self)) <= 0.0:
            raise DomainError(
                f"Jacobians must be strictly positive; got {jacobians(self)} "
                f"for ell={self.ell}, q={self.q}"
            )


@dataclass(frozen=True)
class ReversibilityReport:
    """Result of a Monte Carlo reversibility check."""

    max_deviation: float
    mean_deviation: float
    n_samples: int


def classify_region(x: float, ell: float) -> Region:
    """Return the partition cell containing ``x``.

    Cells are half-open on the right except D, which includes x = 1.
    """
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x}")
    return Region(int(x >= ell) + int(x >= 0.5) + int(x >= 0.75))


def region_indices(x: np.ndarray, ell: float) -> np.ndarray:
    """Vectorized cell lookup; same comparison order as ``classify_region``."""
    return (
        (x >= ell).astype(np.int8) + (x >= 0.5).astype(np.int8) + (x >= 0.75).astype(np.int8)
    )


@lru_cache(maxsize=128)
def branch_coefficients(params: MapParams):
    """Affine coefficients (ax, bx, ay, by) of the four branches,
    indexed by region, so that (x, y) -> (ax x + bx, ay y + by)."""
    ell, q = params.ell, params.q
    ax = np.array([1.0 / (2.0 * ell), 1.0 / (1.0 - 2.0 * ell), 2.0, 2.0])
    bx = np.array([0.5, -ell / (1.0 - 2.0 * ell), -0.5, -1.5])
    ay = np.array([0.5 - q, 1.0 - 2.0 * ell - q, 0.5 + q, 2.0 * ell + q])
    by = np.array([0.5 + q, 2.0 * ell + q, 0.0, 0.0])
    for a in (ax, bx, ay, by):
        a.setflags(write=False)
    return ax, bx, ay, by


def jacobian(region: Region, params: MapParams) -> float:
    """Volume ratio of the branch acting on ``region``."""
    ell, q = params.ell, params.q
    if region == Region.A:
        return 1.0 / (4.0 * ell) - q / (2.0 * ell)
    if region == Region.B:
        return 1.0 - q / (1.0 - 2.0 * ell)
    if region == Region.C:
        return 1.0 + 2.0 * q
    return 4.0 * ell + 2.0 * q


def jacobians(params: MapParams) -> np.ndarray:
    """All four branch volume ratios, indexed by region."""
    ell, q = params.ell, params.q
    return np.array(
        [
            1.0 / (4.0 * ell) - q / (2.0 * ell),
            1.0 - q / (1.0 - 2.0 * ell),
            1.0 + 2.0 * q,
            4.0 * ell + 2.0 * q,
        ]
    )


def contraction_rate(region: Region, params: MapParams) -> float:
    """Local phase-space contraction rate: minus the log volume ratio."""
    return -float(np.log(jacobian(region, params)))


def contraction_rates(params: MapParams) -> np.ndarray:
    """Contraction rates for all four regions."""
    return -np.log(jacobians(params))


def baker_step(p: Point, params: MapParams) -> Point:
    """One application of the reversible baker map."""
    r = classify_region(p.x, params.ell)
    ax, bx, ay, by = branch_coefficients(params)
    x = min(max(ax[r] * p.x + bx[r], 0.0), 1.0)
    y = min(max(ay[r] * p.y + by[r], 0.0), 1.0)
    return Point(x, y)


def strip_flip(p: Point, params: MapParams) -> Point:
    """Flip y -> 1 - y for points in the strip with y < 1/2; identity elsewhere.

    The flip preserves x and phase-space volume but is not invertible:
    the lower strip half has no preimage afterwards.
    """
    if params.strip_x <= p.x <= params.strip_x + params.strip_eps and p.y < 0.5:
        return Point(p.x, 1.0 - p.y)
    return p


def step(p: Point, params: MapParams, variant: MapVariant = MapVariant.REVERSIBLE) -> Point:
    """One iteration of the selected dynamics."""
    q = baker_step(p, params)
    if variant is MapVariant.IRREVERSIBLE:
        q = strip_flip(q, params)
    return q


def step_arrays(
    x: np.ndarray,
    y: np.ndarray,
    params: MapParams,
    variant: MapVariant = MapVariant.REVERSIBLE,
):
    """Vectorized iteration.

    Returns ``(x_new, y_new, regions)`` where ``regions`` holds the cell each
    point occupied *before* the step, i.e. the branch that was applied.
    """
    r = region_indices(x, params.ell)
    ax, bx, ay, by = branch_coefficients(params)
    xn = np.clip(ax[r] * x + bx[r], 0.0, 1.0)
    yn = np.clip(ay[r] * y + by[r], 0.0, 1.0)
    if variant is MapVariant.IRREVERSIBLE and params.strip_eps > 0.0:
        flip = (xn >= params.strip_x) & (xn <= params.strip_x + params.strip_eps) & (yn < 0.5)
        yn = np.where(flip, 1.0 - yn, yn)
    return xn, yn, r


def time_reversal(p: Point) -> Point:
    """Self-inverse time-reversal map.

    Reflects each half square across its main (lower-left to upper-right)
    diagonal: the left half [0,1/2) x [0,1] maps onto the lower half via
    (x, y) -> (y/2, 2x) and the right half onto the upper half via
    (x, y) -> ((y+1)/2, 2x-1).  At q = 0 the baker map satisfies
    ``baker_step(G(baker_step(p))) == G(p)`` for every interior point.
    """
    if p.x < 0.5:
        return Point(0.5 * p.y, 2.0 * p.x)
    return Point(0.5 * (p.y + 1.0), 2.0 * p.x - 1.0)


def time_reversal_arrays(x: np.ndarray, y: np.ndarray):
    """Vectorized ``time_reversal``."""
    left = x < 0.5
    xg = np.where(left, 0.5 * y, 0.5 * (y + 1.0))
    yg = np.where(left, 2.0 * x, 2.0 * x - 1.0)
    return xg, yg


_Q4 = (Region.D, Region.B, Region.C, Region.A)
_Q3 = (Region.A, Region.C, Region.B, Region.D)


def region_reverse(region: Region, scheme: ReversalScheme) -> Region:
    """Image of a region under the time-reversal scheme (an involution)."""
    table = _Q4 if scheme is ReversalScheme.Q4 else _Q3
    return table[region]


def check_reversibility(
    params: MapParams,
    n_samples: int,
    variant: MapVariant = MapVariant.REVERSIBLE,
    seed: int = 0,
) -> ReversibilityReport:
    """Measure how well M G M = G holds over random points.

    Draws uniform points p, applies the selected dynamics F on both ends of
    the reversal, and reports the sup-norm deviation between F(G(F(p))) and
    G(p).  Deviations at rounding level certify reversibility; order-one
    deviations mean the identity fails (q != 0, or the irreversible
    variant inside the strip).
    """
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    gen = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    pts = gen.random((int(n_samples), 2))
    x, y = pts[:, 0], pts[:, 1]
    fx, fy, _ = step_arrays(x, y, params, variant)
    gx, gy = time_reversal_arrays(fx, fy)
    hx, hy, _ = step_arrays(gx, gy, params, variant)
    tx, ty = time_reversal_arrays(x, y)
    dev = np.maximum(np.abs(hx - tx), np.abs(hy - ty))
    return ReversibilityReport(
        max_deviation=float(dev.max()),
        mean_deviation=float(dev.mean()),
        n_samples=int(n_samples),
    )
