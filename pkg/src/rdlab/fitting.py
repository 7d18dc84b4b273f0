"""Polynomial and kernel-weighted least-squares primitives.

Coefficients are always stored in ascending order: ``c[0] + c[1]*x + ...``.
"""

from __future__ import annotations

import numpy as np

from .errors import FitError

# Maximum acceptable design condition number before a fit is declared
# rank-deficient.  Polynomial designs on [-1, 1] stay far below this.
_COND_LIMIT = 1e12


def poly_design(x: np.ndarray, order: int) -> np.ndarray:
    """Vandermonde design ``[1, x, ..., x**order]`` with ascending powers."""
    return np.vander(np.asarray(x, dtype=float), order + 1, increasing=True)


def poly_eval(coeffs: np.ndarray, x) -> np.ndarray:
    return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coeffs)


def poly_deriv(coeffs: np.ndarray, m: int = 1) -> np.ndarray:
    """Coefficients of the m-th derivative, ascending order."""
    return np.polynomial.polynomial.polyder(coeffs, m)


def ols_poly(x: np.ndarray, y: np.ndarray, order: int) -> np.ndarray:
    """Plain least-squares polynomial fit; raises FitError when deficient."""
    X = poly_design(x, order)
    coeffs, _, rank, sv = np.linalg.lstsq(X, np.asarray(y, dtype=float), rcond=None)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if rank < order + 1 or cond > _COND_LIMIT:
        raise FitError(
            f"rank-deficient polynomial design (order {order}, rank {rank})",
            condition_number=cond,
        )
    return coeffs


def wls_coef_weights(X: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Rows mapping y to weighted-least-squares coefficients.

    Returns the matrix ``A = (X'WX)^{-1} X'W`` so that ``coef = A @ y``.
    each coefficient is an explicit linear functional of the responses,
    which later lets estimators expose their weight vectors.
    """
    Xw = X * w[:, None]
    gram = X.T @ Xw
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise FitError("singular weighted design", condition_number=float(cond))
    return np.linalg.solve(gram, Xw.T)


def kernel_weights(kind: str, u: np.ndarray) -> np.ndarray:
    """Kernel weight function on [-1, 1]; integrates to one on its support."""
    u = np.asarray(u, dtype=float)
    if kind == "triangular":
        return np.maximum(1.0 - np.abs(u), 0.0)
    if kind == "uniform":
        return np.where(np.abs(u) <= 1.0, 0.5, 0.0)
    raise ValueError(f"unknown kernel {kind!r}")


def local_linear_curve(
    x: np.ndarray,
    y: np.ndarray,
    grid: np.ndarray,
    bandwidth: float,
    kernel: str = "triangular",
    min_points: int = 10,
) -> tuple[np.ndarray, np.ndarray]:
    """Local linear regression evaluated on a grid.

    Windows with fewer than ``min_points`` observations are widened to the
    ``min_points`` nearest neighbours so sparse regions stay estimable.
    Returns fitted values and pointwise sandwich standard errors.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    values = np.empty(len(grid))
    ses = np.empty(len(grid))
    for i, g in enumerate(grid):
        dist = np.abs(x - g)
        h = bandwidth
        if np.count_nonzero(dist <= h) < min_points:
            h = np.sort(dist)[min(min_points, len(x)) - 1] * (1 + 1e-12)
        mask = dist <= h
        xs, ys = x[mask], y[mask]
        w = kernel_weights(kernel, (xs - g) / h)
        w = np.maximum(w, 1e-8)  # keep boundary points from zeroing out
        X = np.column_stack([np.ones(len(xs)), xs - g])
        A = wls_coef_weights(X, w)
        coef = A @ ys
        resid = ys - X @ coef
        values[i] = coef[0]
        ses[i] = float(np.sqrt(np.sum((A[0] * resid) ** 2)))
    return values, ses


def silverman_bandwidth(x: np.ndarray) -> float:
    """Normal-reference bandwidth 1.06 * spread * n^(-1/5).

    Spread is the smaller of the standard deviation and IQR/1.349.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    sd = float(np.std(x))
    iqr = float(np.subtract(*np.percentile(x, [75, 25])))
    spread = min(sd, iqr / 1.349) if iqr > 0 else sd
    if spread <= 0:
        spread = max(sd, 1e-3)
    return 1.06 * spread * n ** (-0.2)
