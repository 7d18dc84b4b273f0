"""Bin-count selection and binned means for RD scatter plots.

Two data-driven selectors are provided.  The IMSE selector minimizes the
integrated mean squared error of the bin-average estimator and grows like
N^(1/3); the mimicking-variance (MV) selector matches the visual variability
of the raw data and grows like N/log(N)^2, so it always wins eventually and
produces many more, smaller bins.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dgp import Dataset
from .errors import CalibrationError, DomainError
from .fitting import ols_poly, poly_deriv, poly_eval


@dataclass(frozen=True)
class BinPlan:
    j_minus: int
    j_plus: int
    spacing: str  # "even" | "quantile"
    edges_left: np.ndarray
    edges_right: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "edges_left", np.asarray(self.edges_left, dtype=float))
        object.__setattr__(self, "edges_right", np.asarray(self.edges_right, dtype=float))
        if len(self.edges_left) != self.j_minus + 1:
            raise ValueError("left edge count must be j_minus + 1")
        if len(self.edges_right) != self.j_plus + 1:
            raise ValueError("right edge count must be j_plus + 1")

    def to_json(self) -> str:
        return json.dumps(
            {
                "j_minus": self.j_minus,
                "j_plus": self.j_plus,
                "spacing": self.spacing,
                "edges_left": self.edges_left.tolist(),
                "edges_right": self.edges_right.tolist(),
            }
        )


@dataclass(frozen=True)
class BinnedSeries:
    """Nonempty bins as (position, mean outcome, count), position increasing."""

    x_pos: np.ndarray
    y_mean: np.ndarray
    count: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_pos", np.asarray(self.x_pos, dtype=float))
        object.__setattr__(self, "y_mean", np.asarray(self.y_mean, dtype=float))
        object.__setattr__(self, "count", np.asarray(self.count, dtype=int))
        if not np.all(np.diff(self.x_pos) > 0):
            raise ValueError("bin positions must be strictly increasing")

    def __len__(self) -> int:
        return len(self.x_pos)

    def to_json(self) -> str:
        return json.dumps(
            {
                "x_pos": self.x_pos.tolist(),
                "y_mean": self.y_mean.tolist(),
                "count": self.count.tolist(),
            }
        )


def imse_bins_from_constants(bias_const: float, var_const: float, n: int) -> int:
    """Bin count minimizing integrated MSE: ceil((2*Bias/Var)^(1/3) N^(1/3)).

    Floored at one bin (zero curvature yields zero from the formula).
    """
    if var_const <= 0:
        raise DomainError("var_const must be positive")
    if bias_const < 0:
        raise DomainError("bias_const must be nonnegative")
    if n < 1:
        raise DomainError("n must be at least 1")
    raw = (2.0 * bias_const / var_const) ** (1.0 / 3.0) * n ** (1.0 / 3.0)
    return max(1, math.ceil(raw))


def mv_bins_from_constants(v_total: float, var_const: float, n: int) -> int:
    """Mimicking-variance bin count: ceil((V/Var) * N / ln(N)^2)."""
    if var_const <= 0:
        raise DomainError("var_const must be positive")
    if v_total <= 0:
        raise DomainError("v_total must be positive")
    if n < 3:
        raise DomainError("n must be at least 3")
    raw = (v_total / var_const) * n / math.log(n) ** 2
    return max(1, math.ceil(raw))


def estimate_bin_constants(
    dataset: Dataset, side: str
) -> tuple[float, float, float]:
    """Plug-in (bias_const, var_const, v_total) for one side.

    A quintic is fit to the side's own observations; the bias constant uses
    its analytic first derivative averaged over the side's sample (which
    approximates the density-weighted integral), the variance constant is
    the mean squared residual (homoskedastic plug-in), and v_total is the
    sample variance of the outcome on that side.
    """
    sx, sy = dataset.side(side)
    if len(sx) < 10:
        raise CalibrationError(f"need at least 10 points on the {side} side")
    coeffs = ols_poly(sx, sy, 5)
    deriv = poly_deriv(coeffs, 1)
    xbar = float(np.max(np.abs(sx)))
    n_total = dataset.n
    bias_const = (xbar**2 / 12.0) * float(np.sum(poly_eval(deriv, sx) ** 2)) / n_total
    resid = sy - poly_eval(coeffs, sx)
    var_const = float(np.mean(resid**2))
    v_total = float(np.var(sy, ddof=1))
    return bias_const, var_const, v_total


def select_bins(dataset: Dataset, selector: str = "mv", spacing: str = "even") -> BinPlan:
    """Choose per-side bin counts and edges for a dataset."""
    if selector not in ("imse", "mv"):
        raise ValueError(f"unknown selector {selector!r}")
    if spacing not in ("even", "quantile"):
        raise ValueError(f"unknown spacing {spacing!r}")
    counts = {}
    for side in ("left", "right"):
        bias_c, var_c, v_tot = estimate_bin_constants(dataset, side)
        sx, _ = dataset.side(side)
        if selector == "imse":
            counts[side] = imse_bins_from_constants(bias_c, var_c, len(sx))
        else:
            counts[side] = mv_bins_from_constants(v_tot, var_c, len(sx))
    lx, _ = dataset.side("left")
    rx, _ = dataset.side("right")
    # more bins than observations is never meaningful (possible only for
    # near-noiseless outcomes, where the variance constant collapses)
    counts["left"] = min(counts["left"], len(lx))
    counts["right"] = min(counts["right"], len(rx))
    if spacing == "even":
        edges_left = np.linspace(lx.min(), 0.0, counts["left"] + 1)
        edges_right = np.linspace(0.0, rx.max(), counts["right"] + 1)
    else:
        edges_left = _quantile_edges(lx, counts["left"], upper=0.0)
        edges_right = _quantile_edges(rx, counts["right"], upper=None)
    return BinPlan(counts["left"], counts["right"], spacing, edges_left, edges_right)


def _quantile_edges(x: np.ndarray, j: int, upper) -> np.ndarray:
    """Edges splitting sorted x into j groups whose sizes differ by <= 1."""
    xs = np.sort(x)
    groups = np.array_split(xs, j)
    edges = [float(xs[0])]
    for a, b in zip(groups[:-1], groups[1:]):
        edges.append((float(a[-1]) + float(b[0])) / 2.0)
    edges.append(float(xs[-1]) if upper is None else upper)
    # guard against duplicate edges when x has ties
    edges = np.array(edges)
    for k in range(1, len(edges)):
        if edges[k] <= edges[k - 1]:
            edges[k] = np.nextafter(edges[k - 1], np.inf)
    return edges


def bin_means(dataset: Dataset, plan: BinPlan) -> BinnedSeries:
    """Average the outcome within each bin of the plan.

    Evenly spaced bins are positioned at their midpoints and empty bins are
    dropped (plotted as gaps).  Quantile bins are rank-balanced: the sorted
    side is split into groups whose sizes differ by at most one (tied
    running-variable values may straddle a group boundary), positioned at
    the mean of the running variable inside the bin, and are never empty.
    Adjacent quantile bins that collapse onto the same position (a value
    repeated across whole groups) are merged.
    """
    parts = []
    for side in ("left", "right"):
        sx, sy = dataset.side(side)
        edges = plan.edges_left if side == "left" else plan.edges_right
        j = len(edges) - 1
        if plan.spacing == "quantile":
            order = np.argsort(sx, kind="stable")
            for group in np.array_split(order, j):
                if len(group) == 0:
                    continue
                parts.append(
                    (float(np.mean(sx[group])), float(np.mean(sy[group])), len(group))
                )
        else:
            idx = np.clip(
                np.searchsorted(edges, sx, side="right") - 1, 0, j - 1
            )
            for k in range(j):
                mask = idx == k
                cnt = int(mask.sum())
                if cnt == 0:
                    continue
                pos = (edges[k] + edges[k + 1]) / 2.0
                parts.append((pos, float(np.mean(sy[mask])), cnt))
    parts.sort(key=lambda t: t[0])
    merged: list[list] = []
    for pos, mean, cnt in parts:
        if merged and pos <= merged[-1][0]:
            p0, m0, c0 = merged[-1]
            total = c0 + cnt
            merged[-1] = [(p0 * c0 + pos * cnt) / total,
                          (m0 * c0 + mean * cnt) / total, total]
        else:
            merged.append([pos, mean, cnt])
    pos, mean, cnt = zip(*merged)
    return BinnedSeries(np.array(pos), np.array(mean), np.array(cnt))


def bin_count_gini(counts) -> float:
    """Gini coefficient of bin occupancy in [0, 1).

    Standard mean-absolute-pairwise-difference form, computed via the
    sorted-values identity.
    """
    c = np.asarray(counts, dtype=float)
    if np.any(c < 0):
        raise DomainError("counts must be nonnegative")
    total = c.sum()
    if total <= 0:
        raise DomainError("counts must sum to a positive number")
    cs = np.sort(c)
    n = len(cs)
    ranks = np.arange(1, n + 1)
    return float((2.0 * np.sum(ranks * cs)) / (n * total) - (n + 1.0) / n)
