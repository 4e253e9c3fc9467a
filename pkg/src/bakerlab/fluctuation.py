"""Finite-n statistics of the contraction-rate time average.

The central object is the probability that the dimensionless average
e_n = (time average)/(stationary mean) falls in a cell (p - delta, p + delta)
of a symmetric grid.  Cell masses come either from simulated trajectory
segments or from the exact chain distribution; both sources share one
binning routine so they can be compared cell by cell.  Masses are kept in
log space: exact deep tails decay like exp(-n zeta) and underflow linear
doubles long before n reaches the supported range.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sstats
from scipy.special import logsumexp

from .errors import (
    DomainError,
    FitError,
    InsufficientFluctuationsError,
    NormalizationError,
)
from .ensemble import SimConfig, lambda_segment_means
from .mapcore import MapParams, contraction_rates
from .markov import ContractionDistribution, mean_contraction_rate

__all__ = [
    "FRConfig",
    "PiHistogram",
    "RateFunction",
    "FRCheck",
    "ParabolaFit",
    "EquivalenceReport",
    "symmetric_grid",
    "time_average",
    "estimate_pi",
    "rate_function",
    "fr_check",
    "fit_parabola",
    "variant_equivalence_test",
]


def symmetric_grid(p_max: float, spacing: float = 0.1) -> np.ndarray:
    """Cell centers -p_max..p_max built from integers so the grid is
    exactly symmetric."""
    if p_max <= 0 or spacing <= 0:
        raise DomainError("p_max and spacing must be positive")
    k = int(round(p_max / spacing))
    return np.arange(-k, k + 1) * spacing


@dataclass(frozen=True)
class FRConfig:
    """Segment length, cell geometry and admissibility threshold for the
    fluctuation statistics."""

    n: int
    p_grid: np.ndarray
    delta: float = 0.05
    min_count: int = 25

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if self.delta <= 0:
            raise DomainError("delta must be positive")
        grid = np.asarray(self.p_grid, dtype=float)
        if grid.ndim != 1 or len(grid) < 3:
            raise DomainError("p_grid must be a 1-d grid with at least 3 cells")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("p_grid must be strictly increasing")
        if np.max(np.abs(grid + grid[::-1])) > 1e-12:
            raise DomainError("p_grid must be symmetric about 0")
        spacing = float(grid[1] - grid[0])
        if np.max(np.abs(np.diff(grid) - spacing)) > 1e-12:
            raise DomainError("p_grid must be uniform")
        if 2.0 * self.delta > spacing + 1e-12:
            raise DomainError("cells overlap: need 2*delta <= grid spacing")
        object.__setattr__(self, "p_grid", grid)

    @property
    def spacing(self) -> float:
        return float(self.p_grid[1] - self.p_grid[0])


def time_average(regions: Sequence[int], params: MapParams) -> float:
    """Contraction-rate time average of one symbolic segment:
    -(1/n) sum log J(region_k)."""
    r = np.asarray(regions, dtype=np.int64)
    if r.size == 0:
        raise DomainError("empty region sequence")
    rates = contraction_rates(params)
    return float(rates[r].mean())


def _bin_values(values: np.ndarray, grid: np.ndarray, delta: float):
    """Cell index for each value, -1 when the value falls in no cell.
    Shared by the simulated and exact sources so both bin identically."""
    spacing = float(grid[1] - grid[0])
    idx = np.round((values - grid[0]) / spacing).astype(np.int64)
    inside = (idx >= 0) & (idx < len(grid))
    clipped = np.clip(idx, 0, len(grid) - 1)
    inside &= np.abs(values - grid[clipped]) < delta + 1e-12
    return np.where(inside, clipped, -1)


@dataclass(frozen=True)
class PiHistogram:
    """Per-cell probability mass of the (normalized) time average."""

    p: np.ndarray
    delta: float
    n: int
    source: str  # "mc" or "exact"
    log_mass: np.ndarray
    counts: np.ndarray | None
    n_segments: int | None
    normalized: bool
    mean_rate: float
    min_count: int

    @property
    def mass(self) -> np.ndarray:
        return np.exp(self.log_mass)

    def admissible(self) -> np.ndarray:
        """Cells with enough support to enter ratio statistics."""
        if self.source == "mc":
            return self.counts >= self.min_count
        return self.log_mass > -np.inf


def estimate_pi(
    config: FRConfig,
    source: SimConfig | ContractionDistribution,
    mode: str = "e_n",
) -> PiHistogram:
    """Cell masses of the time-average statistic.

    A ``SimConfig`` source is evolved and cut into non-overlapping length-n
    segments; a ``ContractionDistribution`` source has its exact atoms
    poured into the same cells.  ``mode="e_n"`` normalizes by the
    stationary mean rate (rejected at equilibrium, where that mean is 0);
    ``mode="raw"`` bins the unnormalized n-step sum.
    """
    if mode not in ("e_n", "raw"):
        raise DomainError(f"unknown mode {mode!r}")

    if isinstance(source, ContractionDistribution):
        if source.n != config.n:
            raise DomainError(f"distribution has n={source.n}, config has n={config.n}")
        mean_rate = source.mean_time_average()
        values = source.sums if mode == "raw" else None
        if mode == "e_n":
            if mean_rate == 0.0 or abs(mean_rate) < 1e-15:
                raise NormalizationError(
                    "mean contraction rate is 0 (equilibrium); bin the raw sums "
                    "with mode='raw' instead"
                )
            values = source.sums / (config.n * mean_rate)
        idx = _bin_values(values, config.p_grid, config.delta)
        log_mass = np.full(len(config.p_grid), -np.inf)
        for i in range(len(config.p_grid)):
            sel = idx == i
            if sel.any():
                log_mass[i] = float(logsumexp(source.log_probs[sel]))
        return PiHistogram(
            p=config.p_grid,
            delta=config.delta,
            n=config.n,
            source="exact",
            log_mass=log_mass,
            counts=None,
            n_segments=None,
            normalized=mode == "e_n",
            mean_rate=mean_rate,
            min_count=config.min_count,
        )

    if isinstance(source, SimConfig):
        params = source.params
        mean_rate = mean_contraction_rate(params.ell, params.q)
        averages = lambda_segment_means(source, config.n)
        if mode == "e_n":
            if mean_rate == 0.0:
                raise NormalizationError(
                    "mean contraction rate is 0 (equilibrium); bin the raw sums "
                    "with mode='raw' instead"
                )
            values = averages / mean_rate
        else:
            values = averages * config.n
        idx = _bin_values(values, config.p_grid, config.delta)
        counts = np.bincount(idx[idx >= 0], minlength=len(config.p_grid)).astype(np.int64)
        with np.errstate(divide="ignore"):
            log_mass = np.log(counts) - np.log(len(values))
        return PiHistogram(
            p=config.p_grid,
            delta=config.delta,
            n=config.n,
            source="mc",
            log_mass=log_mass,
            counts=counts,
            n_segments=len(values),
            normalized=mode == "e_n",
            mean_rate=mean_rate,
            min_count=config.min_count,
        )

    raise DomainError(f"unsupported source type {type(source).__name__}")


@dataclass(frozen=True)
class RateFunction:
    """Finite-n rate function zeta_n(p) = -(1/n) log pi_n; NaN on cells
    without (sufficient) mass."""

    p: np.ndarray
    zeta: np.ndarray
    n: int
    source: str


def rate_function(pi: PiHistogram) -> RateFunction:
    adm = pi.admissible()
    if not adm.any():
        raise DomainError("histogram carries no admissible mass")
    zeta = np.where(adm, -pi.log_mass / pi.n, np.nan)
    return RateFunction(p=pi.p, zeta=zeta, n=pi.n, source=pi.source)


@dataclass(frozen=True)
class FRCheck:
    """Per-cell fluctuation-relation values and the fitted slope.

    ``value[i]`` is log(pi(p)/pi(-p)) / (n * mean_rate) for admissible
    positive p (the asymptotic prediction is value = p); ``ratio`` is
    value/p.  In unnormalized (equilibrium) mode the divisor is just n.
    """

    p: np.ndarray
    value: np.ndarray
    ratio: np.ndarray
    stderr: np.ndarray | None
    slope: float
    n: int
    source: str
    normalized: bool


def fr_check(pi: PiHistogram, mean_rate: float | None = None) -> FRCheck:
    """Compare cell masses at opposite p and fit the through-origin slope
    of the log-ratio statistic against p."""
    if mean_rate is None:
        mean_rate = pi.mean_rate
    if pi.normalized:
        if mean_rate is None or mean_rate <= 0:
            raise NormalizationError("normalized check needs a positive mean rate")
        scale = pi.n * mean_rate
    else:
        scale = float(pi.n)

    adm = pi.admissible()
    m = len(pi.p)
    ps, vals, errs = [], [], []
    for i, p in enumerate(pi.p):
        if p <= 0:
            continue
        j = m - 1 - i
        if adm[i] and adm[j]:
            vals.append((pi.log_mass[i] - pi.log_mass[j]) / scale)
            ps.append(p)
            if pi.source == "mc":
                errs.append(np.sqrt(1.0 / pi.counts[i] + 1.0 / pi.counts[j]) / scale)
    if not ps:
        raise InsufficientFluctuationsError(
            "insufficient negative fluctuations: no admissible (+p, -p) cell pairs"
        )
    p_arr = np.array(ps)
    v_arr = np.array(vals)
    slope = float((p_arr * v_arr).sum() / (p_arr * p_arr).sum())
    return FRCheck(
        p=p_arr,
        value=v_arr,
        ratio=v_arr / p_arr,
        stderr=np.array(errs) if errs else None,
        slope=slope,
        n=pi.n,
        source=pi.source,
        normalized=pi.normalized,
    )


@dataclass(frozen=True)
class ParabolaFit:
    """Least-squares fit zeta(p) ~ a (p-1)^2 + b."""

    a: float
    b: float
    residual: float
    n_points: int


def fit_parabola(rf: RateFunction, p_window: tuple[float, float] | None = None) -> ParabolaFit:
    """Fit the finite cells of a rate function with a parabola centered at
    the mean value p = 1; optionally restricted to a p window."""
    mask = np.isfinite(rf.zeta)
    if p_window is not None:
        mask &= (rf.p >= p_window[0]) & (rf.p <= p_window[1])
    p = rf.p[mask]
    z = rf.zeta[mask]
    if len(p) < 3:
        raise FitError(f"need at least 3 finite cells, got {len(p)}")
    design = np.column_stack([(p - 1.0) ** 2, np.ones(len(p))])
    if np.linalg.matrix_rank(design) < 2:
        raise FitError("degenerate fit: cells are collinear in (p-1)^2")
    coef, _, _, _ = np.linalg.lstsq(design, z, rcond=None)
    resid = float(np.sqrt(np.mean((design @ coef - z) ** 2)))
    return ParabolaFit(a=float(coef[0]), b=float(coef[1]), residual=resid, n_points=len(p))


@dataclass(frozen=True)
class EquivalenceReport:
    """Two-sample chi-square comparison of segment-average histograms."""

    statistic: float
    dof: int
    pvalue: float
    passed: bool
    alpha: float
    identical: bool


def variant_equivalence_test(
    config_a: SimConfig,
    config_b: SimConfig,
    seg_len: int,
    bins: int = 20,
    alpha: float = 0.01,
) -> EquivalenceReport:
    """Test whether two runs produce the same law of segment averages.

    Histograms use shared bin edges spanning the pooled sample; sparsely
    populated edge bins are merged pairwise until every bin has a pooled
    count of at least 10.
    """
    a = lambda_segment_means(config_a, seg_len)
    b = lambda_segment_means(config_b, seg_len)
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if lo == hi:
        identical = bool(np.array_equal(a, b))
        return EquivalenceReport(0.0, 0, 1.0, True, alpha, identical)
    edges = np.linspace(lo, hi, bins + 1)
    edges[-1] = np.nextafter(hi, np.inf)
    ca, _ = np.histogram(a, bins=edges)
    cb, _ = np.histogram(b, bins=edges)

    merged_a, merged_b = [], []
    acc_a = acc_b = 0
    for oa, ob in zip(ca, cb):
        acc_a += oa
        acc_b += ob
        if acc_a + acc_b >= 10:
            merged_a.append(acc_a)
            merged_b.append(acc_b)
            acc_a = acc_b = 0
    if acc_a + acc_b > 0:
        if merged_a:
            merged_a[-1] += acc_a
            merged_b[-1] += acc_b
        else:
            merged_a.append(acc_a)
            merged_b.append(acc_b)
    oa = np.array(merged_a, dtype=float)
    ob = np.array(merged_b, dtype=float)
    na, nb = oa.sum(), ob.sum()
    k1 = np.sqrt(nb / na)
    k2 = np.sqrt(na / nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        contrib = (k1 * oa - k2 * ob) ** 2 / (oa + ob)
    stat = float(np.nansum(contrib))
    dof = max(len(oa) - 1, 1)
    pvalue = float(sstats.chi2.sf(stat, dof))
    return EquivalenceReport(
        statistic=stat,
        dof=dof,
        pvalue=pvalue,
        passed=pvalue >= alpha,
        alpha=alpha,
        identical=bool(np.array_equal(a, b)),
    )
