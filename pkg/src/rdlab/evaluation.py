"""Power functions, decision-theoretic risks, and comparison analytics.

Classification outcomes aggregate into power curves (share reporting a
discontinuity as a function of the true |d|), which feed two risk measures:
the classical risk weights type I and type II error rates by their costs,
while the confidence-based risk averages one minus each reader's perceived
probability of being correct, inferred from wager-versus-fixed bonus
choices under loss aversion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

# Loss-aversion coefficient used to map bonus choices into confidence
# intervals; the wager is preferred when confidence exceeds lam/(1+lam).
DEFAULT_LOSS_AVERSION = 2.0

# Discontinuity grid (multiples of sigma) used by the experiments.
D_LEVELS = (0.0, 0.1944, 0.324, 0.54, 0.9, 1.5)

# Modal |d| level at which type II error rates are aggregated by default.
TYPE2_REFERENCE_LEVEL = 0.324


@dataclass(frozen=True)
class ResponseRecord:
    """One human classification of one graph."""

    responder_id: str
    graph_id: str
    dgp_id: str
    d_multiple: float
    arm: str
    reported_discontinuity: bool
    bonus_choice: str  # "wager" | "fixed"
    magnitude_estimate: Optional[float] = None


@dataclass(frozen=True)
class ClassificationBatch:
    records: tuple

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for r in self.records:
            if r.graph_id in seen:
                raise ValueError(f"graph {r.graph_id} classified more than once")
            seen.add(r.graph_id)

    def for_arm(self, arm: str) -> tuple:
        return tuple(r for r in self.records if r.arm == arm)

    def arms(self) -> list:
        out = []
        for r in self.records:
            if r.arm not in out:
                out.append(r.arm)
        return out


@dataclass(frozen=True)
class PowerPoint:
    d_multiple: float
    p_hat: float
    n: int
    ci_low: float
    ci_high: float

    def __post_init__(self):
        if not (0.0 <= self.ci_low <= self.p_hat <= self.ci_high <= 1.0):
            raise ValueError("confidence bounds must lie in [0,1] and bracket p_hat")


@dataclass(frozen=True)
class RiskTableRow:
    arm: str
    type1: float
    type2_at: float
    risk_equal: float
    risk_kappa4: float


def power_point(classifications: Sequence[bool], level: float = 0.05) -> PowerPoint:
    """Share of discontinuity reports with an exact binomial interval.

    The count of reports is binomial for a fixed graph-generating process,
    so the Clopper-Pearson construction applies directly.
    """
    flags = [bool(c) for c in classifications]
    if not flags:
        raise ValueError("need at least one classification")
    n = len(flags)
    k = sum(flags)
    lo = 0.0 if k == 0 else float(stats.beta.ppf(level / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - level / 2, k + 1, n - k))
    return PowerPoint(float("nan"), k / n, n, lo, hi)


def conservative_normal_interval(
    p_hat: float, n: int, level: float = 0.05
) -> tuple[float, float]:
    """Normal interval that is conservative for a sum of heterogeneous
    Bernoullis: the matching-mean binomial has the larger variance."""
    z = stats.norm.ppf(1 - level / 2)
    half = z * math.sqrt(p_hat * (1 - p_hat) / n)
    return max(0.0, p_hat - half), min(1.0, p_hat + half)


def power_curve(
    batch: ClassificationBatch, arm: str, level: float = 0.05
) -> list[PowerPoint]:
    """Overall power function for one arm, pooling +|d| and -|d|.

    Points use the conservative normal interval; the value at zero is the
    type I error rate and one minus the other values are type II rates.
    """
    records = batch.for_arm(arm)
    if not records:
        return []
    groups: dict[float, list[bool]] = {}
    for r in records:
        key = round(abs(r.d_multiple), 6)
        groups.setdefault(key, []).append(r.reported_discontinuity)
    points = []
    for d in sorted(groups):
        flags = groups[d]
        p_hat = sum(flags) / len(flags)
        lo, hi = conservative_normal_interval(p_hat, len(flags), level)
        points.append(PowerPoint(d, p_hat, len(flags), lo, hi))
    return points


def classical_risk(
    type1: float, type2_at: float, kappa: float = 1.0, phi: float = 1.0
) -> float:
    """Weighted sum of the two error rates under an equal prior on
    encountering continuous and discontinuous graphs."""
    return kappa * type1 + phi * type2_at


def beta_from_bonus(
    choice: str, lam: float = DEFAULT_LOSS_AVERSION
) -> tuple[tuple[float, float], float]:
    """Confidence interval and midpoint implied by a bonus choice.

    Choosing the wager reveals confidence above lam/(1+lam); choosing the
    fixed payment places it between one half and that threshold.
    """
    if lam < 1:
        raise ValueError("loss aversion coefficient must be at least 1")
    threshold = lam / (1.0 + lam)
    if lam == 1:
        warnings.warn("lam=1 makes the fixed-choice interval degenerate at 1/2")
    if choice == "wager":
        interval = (threshold, 1.0)
    elif choice == "fixed":
        interval = (0.5, threshold)
    else:
        raise ValueError(f"unknown bonus choice {choice!r}")
    return interval, (interval[0] + interval[1]) / 2.0


def as_risk(
    batch: ClassificationBatch,
    arm: str,
    d_level: float,
    lam: float = DEFAULT_LOSS_AVERSION,
) -> float:
    """Average of one minus the midpoint confidence over matching records.

    Records match on the arm and on |d| equal to ``d_level``.
    """
    matches = [
        r
        for r in batch.for_arm(arm)
        if round(abs(r.d_multiple), 6) == round(abs(d_level), 6)
    ]
    if not matches:
        raise ValueError(f"no records for arm {arm!r} at |d|={d_level}")
    total = 0.0
    for r in matches:
        _, midpoint = beta_from_bonus(r.bonus_choice, lam)
        total += 1.0 - midpoint
    return total / len(matches)


def risk_table_row(
    batch: ClassificationBatch,
    arm: str,
    type2_mode: str = "at_reference",
) -> RiskTableRow:
    """Classical risk aggregates for one arm.

    ``type2_mode`` picks the type II error rate at the modal |d| level
    ('at_reference') or averaged across all nonzero levels ('average').
    """
    curve = power_curve(batch, arm)
    by_d = {p.d_multiple: p for p in curve}
    if 0.0 not in by_d:
        raise ValueError(f"arm {arm!r} has no zero-discontinuity records")
    type1 = by_d[0.0].p_hat
    type2 = _type2(by_d, type2_mode)
    return RiskTableRow(
        arm=arm,
        type1=type1,
        type2_at=type2,
        risk_equal=classical_risk(type1, type2, kappa=1.0),
        risk_kappa4=classical_risk(type1, type2, kappa=4.0),
    )


def _type2(by_d: dict, mode: str) -> float:
    if mode == "at_reference":
        ref = round(TYPE2_REFERENCE_LEVEL, 6)
        if ref not in by_d:
            raise ValueError(f"no records at the reference level {ref}")
        return 1.0 - by_d[ref].p_hat
    if mode == "average":
        nonzero = [1.0 - p.p_hat for d, p in by_d.items() if d != 0.0]
        if not nonzero:
            raise ValueError("no nonzero-discontinuity records")
        return float(np.mean(nonzero))
    raise ValueError(f"unknown type2 mode {mode!r}")


def as_risk_row(
    batch: ClassificationBatch,
    arm: str,
    type2_mode: str = "at_reference",
    lam: float = DEFAULT_LOSS_AVERSION,
) -> RiskTableRow:
    """Confidence-risk aggregates mirroring the classical weighting."""
    at_zero = as_risk(batch, arm, 0.0, lam)
    if type2_mode == "at_reference":
        at_d = as_risk(batch, arm, TYPE2_REFERENCE_LEVEL, lam)
    else:
        levels = sorted(
            {round(abs(r.d_multiple), 6) for r in batch.for_arm(arm)} - {0.0}
        )
        at_d = float(np.mean([as_risk(batch, arm, d, lam) for d in levels]))
    return RiskTableRow(
        arm=arm,
        type1=at_zero,
        type2_at=at_d,
        risk_equal=at_zero + at_d,
        risk_kappa4=4.0 * at_zero + at_d,
    )


def mse_decomposition(
    estimates: Sequence[float], true_d: float
) -> tuple[float, float, float]:
    """(mse, bias^2, variance) with mse = bias^2 + variance exactly."""
    est = np.asarray(list(estimates), dtype=float)
    if len(est) == 0:
        raise ValueError("need at least one estimate")
    center = float(np.mean(est))
    bias_sq = (center - true_d) ** 2
    variance = float(np.mean((est - center) ** 2))
    mse = bias_sq + variance
    return mse, bias_sq, variance


def round_and_zero(estimate: float, reject: bool) -> float:
    """Zero out non-rejections, otherwise round to the nearest hundredth
    with ties going away from zero."""
    if not reject:
        return 0.0
    return math.copysign(math.floor(abs(estimate) * 100.0 + 0.5) / 100.0, estimate)


def combined_inference(visual: bool, econometric: bool) -> bool:
    """A discontinuity is inferred only when both procedures reject."""
    return bool(visual) and bool(econometric)


def fisher_exact_one_sided(table) -> Optional[float]:
    """One-sided exact test of positive association in a 2x2 table.

    Returns the hypergeometric probability of an agreement cell as large or
    larger than observed, holding the margins fixed.  When a margin is zero
    the conditional distribution is degenerate and None is returned.
    """
    t = np.asarray(table, dtype=int)
    if t.shape != (2, 2) or (t < 0).any():
        raise ValueError("table must be 2x2 with nonnegative integer counts")
    a = int(t[0, 0])
    row1 = int(t[0, 0] + t[0, 1])
    col1 = int(t[0, 0] + t[1, 0])
    total = int(t.sum())
    if row1 == 0 or col1 == 0 or row1 == total or col1 == total:
        return None
    return float(stats.hypergeom.sf(a - 1, total, row1, col1))


def tstat_rescale(
    d_multiple: float,
    sigma: float,
    design_matrix: np.ndarray,
    d_col: Optional[int] = None,
) -> float:
    """Rescale a discontinuity multiple into t-statistic units.

    Divides the raw discontinuity by sigma times the root of the
    discontinuity coefficient's diagonal entry of (X'X)^{-1}, i.e. the
    large-sample standard error of a correctly specified piecewise
    polynomial fit.
    """
    X = np.asarray(design_matrix, dtype=float)
    if d_col is None:
        d_col = X.shape[1] // 2  # [1, x.., D, D*x..] layout
    inv = np.linalg.inv(X.T @ X)
    return float(d_multiple * sigma / (sigma * math.sqrt(inv[d_col, d_col])))


def two_way_cluster_se(
    y: np.ndarray,
    group: np.ndarray,
    cluster_a: Sequence,
    cluster_b: Sequence,
) -> float:
    """SE of the group-difference coefficient under two-way clustering.

    The outcome is regressed on an intercept and the group indicator; the
    variance combines one-way cluster sandwiches by inclusion-exclusion,
    V_A + V_B - V_{A intersect B}.  A negative combined variance is floored
    at the larger one-way variance with a warning.
    """
    y = np.asarray(y, dtype=float)
    g = np.asarray(group, dtype=float)
    X = np.column_stack([np.ones(len(y)), g])
    gram_inv = np.linalg.inv(X.T @ X)
    coef = gram_inv @ (X.T @ y)
    resid = y - X @ coef

    def cluster_variance(ids) -> np.ndarray:
        meat = np.zeros((2, 2))
        ids = np.asarray(ids)
        for c in np.unique(ids):
            mask = ids == c
            s = X[mask].T @ resid[mask]
            meat += np.outer(s, s)
        return gram_inv @ meat @ gram_inv

    va = cluster_variance(cluster_a)
    vb = cluster_variance(cluster_b)
    inter = [f"{a}\x1f{b}" for a, b in zip(cluster_a, cluster_b)]
    vab = cluster_variance(inter)
    combined = va + vb - vab
    var = combined[1, 1]
    if var <= 0:
        var = max(va[1, 1], vb[1, 1])
        warnings.warn("two-way clustered variance was nonpositive; "
                      "falling back to the larger one-way variance")
    return float(math.sqrt(var))


def export_power_csv(batch: ClassificationBatch, arms: Iterable[str]) -> str:
    """Power-curve rows for CSV export; floats fixed at six decimals so
    downstream consumers can compare byte-for-byte."""
    lines = ["section,arm,d,p_hat,ci_low,ci_high,n"]
    for arm in arms:
        for p in power_curve(batch, arm):
            lines.append(
                f"power,{arm},{p.d_multiple:.6f},{p.p_hat:.6f},"
                f"{p.ci_low:.6f},{p.ci_high:.6f},{p.n}"
            )
    return "\n".join(lines) + "\n"


def export_risk_csv(batch: ClassificationBatch, arms: Iterable[str]) -> str:
    """Risk-table rows (classical block then confidence block)."""
    lines = ["section,arm,col1,col2,col3,col4"]
    for arm in arms:
        r = risk_table_row(batch, arm)
        lines.append(
            f"classical,{arm},{r.type1:.6f},{r.type2_at:.6f},"
            f"{r.risk_equal:.6f},{r.risk_kappa4:.6f}"
        )
    for arm in arms:
        r = as_risk_row(batch, arm)
        lines.append(
            f"as,{arm},{r.type1:.6f},{r.type2_at:.6f},"
            f"{r.risk_equal:.6f},{r.risk_kappa4:.6f}"
        )
    return "\n".join(lines) + "\n"
