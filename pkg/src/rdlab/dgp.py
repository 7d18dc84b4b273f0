"""DGP calibration from microdata and simulation of RD datasets.

A calibrated DGP bundles the empirical running-variable distribution, a
conditional expectation function that is continuous at the cutoff, an error
model, and the sample size.  Simulated datasets inject a known
discontinuity, expressed as a multiple of the error standard deviation, by
shifting the right arm of the CEF.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import CalibrationError
from .fitting import (
    local_linear_curve,
    ols_poly,
    poly_eval,
    silverman_bandwidth,
)
from .rng import rng_from

SCHEMA_VERSION = 1

# Observations with |x| beyond this bound are discarded after normalization.
TRIM_BOUND = 0.99

# Grid resolution per side for nonparametric CEF and variance functions.
GRID_POINTS_PER_SIDE = 401


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Microdata:
    """Raw paired observations around a cutoff."""

    raw_x: np.ndarray
    y: np.ndarray
    cutoff: float
    semi_discrete: bool = False

    def __post_init__(self):
        object.__setattr__(self, "raw_x", np.asarray(self.raw_x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.raw_x.shape != self.y.shape or self.raw_x.ndim != 1:
            raise CalibrationError("raw_x and y must be 1-d arrays of equal length")
        if not (np.isfinite(self.raw_x).all() and np.isfinite(self.y).all()):
            raise CalibrationError("microdata contains non-finite values")
        n_minus = int(np.sum(self.raw_x < self.cutoff))
        n_plus = int(np.sum(self.raw_x >= self.cutoff))
        if n_minus < 20 or n_plus < 20:
            raise CalibrationError(
                f"need at least 20 rows on each side of the cutoff, "
                f"got {n_minus} below and {n_plus} at-or-above"
            )


@dataclass(frozen=True)
class PiecewisePolyCef:
    """Separate polynomials left and right of zero, ascending coefficients."""

    coeffs_left: np.ndarray
    coeffs_right: np.ndarray

    kind = "piecewise_poly"

    def __post_init__(self):
        object.__setattr__(self, "coeffs_left", np.asarray(self.coeffs_left, dtype=float))
        object.__setattr__(self, "coeffs_right", np.asarray(self.coeffs_right, dtype=float))

    @property
    def order(self) -> int:
        return len(self.coeffs_left) - 1

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        left = poly_eval(self.coeffs_left, x)
        right = poly_eval(self.coeffs_right, x)
        return np.where(x < 0, left, right)

    def jump_at_zero(self) -> float:
        """Right limit minus left limit at the cutoff."""
        return float(self.coeffs_right[0] - self.coeffs_left[0])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "order": self.order,
            "coeffs_left": self.coeffs_left.tolist(),
            "coeffs_right": self.coeffs_right.tolist(),
        }


@dataclass(frozen=True)
class GriddedCef:
    """Piecewise-linear interpolant on strictly increasing knots over [-1, 1]."""

    knots: np.ndarray
    values: np.ndarray

    kind = "gridded"

    def __post_init__(self):
        object.__setattr__(self, "knots", np.asarray(self.knots, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if not np.all(np.diff(self.knots) > 0):
            raise CalibrationError("gridded CEF knots must be strictly increasing")
        if len(self.knots) != len(self.values):
            raise CalibrationError("knots and values length mismatch")

    def __call__(self, x) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.knots, self.values)

    def jump_at_zero(self) -> float:
        """Zero by construction: a single interpolant cannot jump."""
        return 0.0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "knots": self.knots.tolist(),
            "values": self.values.tolist(),
            "interpolation": "linear",
        }


CefSpec = Union[PiecewisePolyCef, GriddedCef]


def cef_from_dict(d: dict) -> CefSpec:
    if d["kind"] == "piecewise_poly":
        return PiecewisePolyCef(np.array(d["coeffs_left"]), np.array(d["coeffs_right"]))
    if d["kind"] == "gridded":
        return GriddedCef(np.array(d["knots"]), np.array(d["values"]))
    raise ValueError(f"unknown CEF kind {d['kind']!r}")


@dataclass(frozen=True)
class FanYaoNoise:
    """Heteroskedastic errors with a gridded conditional-variance function."""

    variance_fn: GriddedCef

    kind = "fan_yao"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "variance_fn": self.variance_fn.to_dict()}


NoiseModel = Union[str, FanYaoNoise]  # "homoskedastic" or FanYaoNoise


@dataclass(frozen=True)
class Dgp:
    """A calibrated probability model, complete except for the discontinuity."""

    x_pool: np.ndarray
    cef: CefSpec
    sigma: float
    n: int
    noise_model: NoiseModel
    alpha_left: float
    alpha_right: float
    dgp_id: str = ""
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "x_pool", np.asarray(self.x_pool, dtype=float))
        if np.max(np.abs(self.x_pool)) > TRIM_BOUND:
            raise CalibrationError("x_pool contains values beyond the trim bound")
        if self.n != len(self.x_pool):
            raise CalibrationError("n must equal the x_pool length")
        if self.sigma < 0:
            raise CalibrationError("sigma must be nonnegative")
        gap = abs(self.cef.jump_at_zero())
        if gap >= 1e-9 * (1.0 + abs(self.alpha_left)):
            raise CalibrationError(f"CEF is discontinuous at 0 (gap {gap:.3g})")
        if not self.dgp_id:
            object.__setattr__(self, "dgp_id", "dgp-" + self.content_hash()[:12])

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.x_pool).tobytes())
        h.update(json.dumps(self.cef.to_dict(), sort_keys=True).encode())
        h.update(repr((self.sigma, self.n, self.alpha_left, self.alpha_right)).encode())
        return h.hexdigest()

    def variance_ratio(self) -> float:
        """Error variance over the variance of the systematic part.

        Reported as a diagnostic for every calibrated DGP; large values mean
        noise dominates the CEF's own variation.
        """
        cef_var = float(np.var(self.cef(self.x_pool)))
        if cef_var == 0:
            return float("inf")
        return self.sigma**2 / cef_var

    def to_dict(self) -> dict:
        if isinstance(self.noise_model, FanYaoNoise):
            noise = self.noise_model.to_dict()
        else:
            noise = {"kind": "homoskedastic"}
        return {
            "schema_version": SCHEMA_VERSION,
            "dgp_id": self.dgp_id,
            "x_pool": self.x_pool.tolist(),
            "cef": self.cef.to_dict(),
            "sigma": self.sigma,
            "n": self.n,
            "noise_model": noise,
            "alpha_left": self.alpha_left,
            "alpha_right": self.alpha_right,
            "provenance": self.provenance,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @staticmethod
    def from_dict(d: dict) -> "Dgp":
        noise_d = d.get("noise_model", {"kind": "homoskedastic"})
        if noise_d["kind"] == "fan_yao":
            noise: NoiseModel = FanYaoNoise(cef_from_dict(noise_d["variance_fn"]))
        else:
            noise = "homoskedastic"
        return Dgp(
            x_pool=np.array(d["x_pool"], dtype=float),
            cef=cef_from_dict(d["cef"]),
            sigma=float(d["sigma"]),
            n=int(d["n"]),
            noise_model=noise,
            alpha_left=float(d["alpha_left"]),
            alpha_right=float(d["alpha_right"]),
            dgp_id=d.get("dgp_id", ""),
            provenance=d.get("provenance", {}),
        )

    @staticmethod
    def from_json(text: str) -> "Dgp":
        return Dgp.from_dict(json.loads(text))


@dataclass(frozen=True)
class Dataset:
    """One realization from a (dgp, discontinuity) pair."""

    x: np.ndarray
    y: np.ndarray
    d_multiple: float
    true_d: float  # in raw outcome units (= d_multiple * sigma)
    dgp_id: str
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must have equal length")

    @property
    def n(self) -> int:
        return len(self.x)

    def side(self, which: str) -> tuple[np.ndarray, np.ndarray]:
        """(x, y) restricted to one side: 'left' means x < 0."""
        mask = self.x < 0 if which == "left" else self.x >= 0
        return self.x[mask], self.y[mask]

    def to_json(self) -> str:
        return json.dumps(
            {
                "x": self.x.tolist(),
                "y": self.y.tolist(),
                "d_multiple": self.d_multiple,
                "true_d": self.true_d,
                "dgp_id": self.dgp_id,
                "seed": self.seed,
            }
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y"])
        for xi, yi in zip(self.x, self.y):
            writer.writerow([repr(float(xi)), repr(float(yi))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def normalize_running(micro: Microdata) -> tuple[np.ndarray, float, float]:
    """Map the running variable into [-1, 1] with 0 at the cutoff.

    Each side is scaled by its own extreme so the support is exactly
    [-1, 1]; when the raw supports are asymmetric this induces a density
    jump at 0.  Observations with |x| beyond the trim bound are removed
    from the returned array.
    """
    x, _, scale_left, scale_right = _normalize_all(micro)
    return x[np.abs(x) <= TRIM_BOUND], scale_left, scale_right


def _normalize_all(micro: Microdata) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Per-side normalization without trimming; returns (x, keep-candidates...)."""
    z = micro.raw_x - micro.cutoff
    neg = z < 0
    pos = z > 0
    if not neg.any() or not pos.any():
        raise CalibrationError("cutoff must lie strictly inside the raw_x range")
    scale_left = float(np.abs(z[neg].min()))
    scale_right = float(z[pos].max())
    x = np.where(z < 0, z / scale_left, z / scale_right)
    # z == 0 maps to 0 under either scale
    return x, z, scale_left, scale_right


def single_scale_normalize(micro: Microdata) -> tuple[np.ndarray, float]:
    """Optional symmetric normalization by the single largest |raw - cutoff|."""
    z = micro.raw_x - micro.cutoff
    if not (z < 0).any() or not (z > 0).any():
        raise CalibrationError("cutoff must lie strictly inside the raw_x range")
    scale = float(np.abs(z).max())
    x = z / scale
    return x[np.abs(x) <= TRIM_BOUND], scale


def jitter_semidiscrete(
    x: np.ndarray, n_minus: int, n_plus: int, seed: int
) -> np.ndarray:
    """Add Gaussian noise with sd 1/min(n_minus, n_plus) to each point.

    Used before CEF fitting for semi-discrete running variables.
    """
    if n_minus < 1 or n_plus < 1:
        raise ValueError("side counts must be positive")
    sd = 1.0 / min(n_minus, n_plus)
    if min(n_minus, n_plus) == 1:
        warnings.warn("jitter sd is 1.0: a side has a single observation")
    rng = rng_from(seed, "jitter")
    return np.asarray(x, dtype=float) + rng.normal(0.0, sd, size=len(x))


def fit_piecewise_poly(
    x: np.ndarray, y: np.ndarray, order: int = 5
) -> tuple[np.ndarray, np.ndarray, float, float, float]:
    """Separate OLS polynomial fits on x < 0 and x >= 0.

    Returns (coeffs_left, coeffs_right, rmse, alpha_left, alpha_right) where
    rmse is computed over the pooled residuals of both sides and the alphas
    are the side intercepts.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    left = x < 0
    right = ~left
    for mask, name in ((left, "left"), (right, "right")):
        if len(np.unique(x[mask])) < order + 2:
            raise CalibrationError(
                f"need at least {order + 2} distinct x on the {name} side"
            )
    coeffs_left = ols_poly(x[left], y[left], order)
    coeffs_right = ols_poly(x[right], y[right], order)
    resid = np.where(
        left, y - poly_eval(coeffs_left, x), y - poly_eval(coeffs_right, x)
    )
    rmse = float(np.sqrt(np.mean(resid**2)))
    return coeffs_left, coeffs_right, rmse, float(coeffs_left[0]), float(coeffs_right[0])


def _gridded_cef_from_local_linear(
    x: np.ndarray, y: np.ndarray
) -> tuple[GriddedCef, float, float, np.ndarray, np.ndarray]:
    """Local linear CEF per side on a uniform grid, made continuous at 0.

    Returns the CEF, the pre-shift intercepts, and the pointwise standard
    errors on each side's grid (left then right, for diagnostics).
    """
    left = x < 0
    lx, ly = x[left], y[left]
    rx, ry = x[~left], y[~left]
    grid_left = np.linspace(min(lx.min(), -1e-6), 0.0, GRID_POINTS_PER_SIDE)
    grid_right = np.linspace(0.0, max(rx.max(), 1e-6), GRID_POINTS_PER_SIDE)
    vals_left, se_left = local_linear_curve(lx, ly, grid_left, silverman_bandwidth(lx))
    vals_right, se_right = local_linear_curve(rx, ry, grid_right, silverman_bandwidth(rx))
    alpha_left = float(vals_left[-1])
    alpha_right = float(vals_right[0])
    vals_right = vals_right - (alpha_right - alpha_left)
    knots = np.concatenate([grid_left[:-1], grid_right])
    values = np.concatenate([vals_left[:-1], vals_right])
    # force exact continuity at the shared zero knot
    values[len(grid_left) - 1] = alpha_left
    return GriddedCef(knots, values), alpha_left, alpha_right, se_left, se_right


def fan_yao_variance(
    x: np.ndarray, squared_residuals: np.ndarray, bandwidth: Optional[float] = None
) -> GriddedCef:
    """Conditional-variance function from local-linear smoothing of r^2.

    Each side is smoothed separately; the result is clipped below at
    1e-12 times the mean squared residual so sampled variances stay
    positive.
    """
    x = np.asarray(x, dtype=float)
    r2 = np.asarray(squared_residuals, dtype=float)
    floor = 1e-12 * float(np.mean(r2))
    left = x < 0
    lx, lr = x[left], r2[left]
    rx, rr = x[~left], r2[~left]
    grid_left = np.linspace(lx.min(), 0.0, GRID_POINTS_PER_SIDE)
    grid_right = np.linspace(0.0, rx.max(), GRID_POINTS_PER_SIDE)
    h_left = bandwidth if bandwidth is not None else silverman_bandwidth(lx)
    h_right = bandwidth if bandwidth is not None else silverman_bandwidth(rx)
    vals_left, _ = local_linear_curve(lx, lr, grid_left, h_left)
    vals_right, _ = local_linear_curve(rx, rr, grid_right, h_right)
    knots = np.concatenate([grid_left[:-1], grid_right])
    values = np.concatenate([vals_left[:-1], vals_right])
    values = np.maximum(values, floor)
    return GriddedCef(knots, values)


def calibrate_dgp(
    micro: Microdata,
    cef_kind: str = "piecewise_quintic",
    noise_model: str = "homoskedastic",
    seed: int = 0,
    source_name: str = "",
    normalization: str = "per_side",
) -> Dgp:
    """Full calibration pipeline from microdata to a simulatable DGP.

    Pipeline: normalization (per-side scaling by default; ``"single"``
    rescales both sides by one factor and leaves asymmetric supports
    asymmetric), trimming, optional jitter for semi-discrete running
    variables, CEF fit (global piecewise quintic or local-linear on a
    grid), removal of the intercept discontinuity, and error calibration.
    The error sd is always the quintic-fit RMSE so discontinuity multiples
    stay comparable across CEF kinds.
    """
    if cef_kind not in ("piecewise_quintic", "local_linear"):
        raise ValueError(f"unknown cef_kind {cef_kind!r}")
    if noise_model not in ("homoskedastic", "fan_yao"):
        raise ValueError(f"unknown noise_model {noise_model!r}")
    if normalization not in ("per_side", "single"):
        raise ValueError(f"unknown normalization {normalization!r}")

    if normalization == "single":
        z = micro.raw_x - micro.cutoff
        if not (z < 0).any() or not (z > 0).any():
            raise CalibrationError("cutoff must lie strictly inside the raw_x range")
        scale_left = scale_right = float(np.abs(z).max())
        x_all = z / scale_left
    else:
        x_all, _, scale_left, scale_right = _normalize_all(micro)
    keep = np.abs(x_all) <= TRIM_BOUND
    x = x_all[keep]
    y = micro.y[keep]

    if micro.semi_discrete:
        n_minus = int(np.sum(x < 0))
        n_plus = int(np.sum(x >= 0))
        x = jitter_semidiscrete(x, n_minus, n_plus, seed)
        keep = np.abs(x) <= TRIM_BOUND
        x, y = x[keep], y[keep]

    coeffs_left, coeffs_right, rmse, q_alpha_left, q_alpha_right = fit_piecewise_poly(
        x, y, order=5
    )
    if rmse <= 1e-12 * (1.0 + float(np.max(np.abs(y)))):
        raise CalibrationError(
            "quintic fit has (numerically) zero RMSE; a degenerate error sd "
            "must be requested explicitly via a sampling override"
        )

    if cef_kind == "piecewise_quintic":
        shifted_right = coeffs_right.copy()
        shifted_right[0] = coeffs_left[0]  # exact continuity at 0
        cef: CefSpec = PiecewisePolyCef(coeffs_left, shifted_right)
        alpha_left, alpha_right = q_alpha_left, q_alpha_right
        fitted = np.where(
            x < 0, poly_eval(coeffs_left, x), poly_eval(coeffs_right, x)
        )
    else:
        cef, alpha_left, alpha_right, _, _ = _gridded_cef_from_local_linear(x, y)
        # residuals against the pre-shift fit: undo the shift on the right
        fitted = np.asarray(cef(x), dtype=float)
        fitted[x >= 0] += alpha_right - alpha_left

    if noise_model == "fan_yao":
        resid = y - fitted
        noise: NoiseModel = FanYaoNoise(fan_yao_variance(x, resid**2))
    else:
        noise = "homoskedastic"

    provenance = {
        "source": source_name,
        "source_sha256": _microdata_hash(micro),
        "options": {
            "cef_kind": cef_kind,
            "noise_model": noise_model,
            "normalization": normalization,
            "semi_discrete": micro.semi_discrete,
            "jitter_seed": seed if micro.semi_discrete else None,
            "scale_left": scale_left,
            "scale_right": scale_right,
        },
    }
    return Dgp(
        x_pool=x,
        cef=cef,
        sigma=rmse,
        n=len(x),
        noise_model=noise,
        alpha_left=alpha_left,
        alpha_right=alpha_right,
        provenance=provenance,
    )


def _microdata_hash(micro: Microdata) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(micro.raw_x).tobytes())
    h.update(np.ascontiguousarray(micro.y).tobytes())
    h.update(repr(micro.cutoff).encode())
    return h.hexdigest()


def sample_dataset(
    dgp: Dgp,
    d_multiple: float,
    seed: int,
    sigma_override: Optional[float] = None,
    resample_x: bool = True,
) -> Dataset:
    """Draw one dataset with a discontinuity of ``d_multiple * sigma``.

    Running-variable values are drawn from the empirical pool with
    replacement (or reused as-is with ``resample_x=False``).  The call is a
    pure function of its arguments: x and noise streams are derived from
    ``seed`` alone, so datasets at different ``d_multiple`` with the same
    seed share their draws and differ only by the injected jump.

    ``sigma_override`` rescales the noise only (the jump is always
    ``d_multiple * dgp.sigma``); it exists for noiseless-limit tests.
    """
    if not np.isfinite(d_multiple):
        raise ValueError("d_multiple must be finite")
    n = dgp.n
    if resample_x:
        rng_x = rng_from(seed, "x")
        x = dgp.x_pool[rng_x.integers(0, n, size=n)]
    else:
        x = dgp.x_pool.copy()
    rng_u = rng_from(seed, "noise")
    z = rng_u.standard_normal(n)
    if isinstance(dgp.noise_model, FanYaoNoise):
        sd = np.sqrt(dgp.noise_model.variance_fn(x))
        if sigma_override is not None:
            sd = sd * (sigma_override / dgp.sigma if dgp.sigma > 0 else 0.0)
    else:
        sd = dgp.sigma if sigma_override is None else sigma_override
    jump = d_multiple * dgp.sigma
    y = dgp.cef(x) + jump * (x >= 0) + sd * z
    return Dataset(
        x=x,
        y=y,
        d_multiple=float(d_multiple),
        true_d=float(jump),
        dgp_id=dgp.dgp_id,
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------


def read_microdata_csv(
    path_or_text, cutoff: float, semi_discrete: bool = False
) -> Microdata:
    """Read microdata from CSV with header ``x,y``, one row per observation."""
    if hasattr(path_or_text, "read"):
        text = path_or_text.read()
    else:
        try:
            with open(path_or_text, "r", encoding="utf-8") as fh:
                text = fh.read()
        except (OSError, ValueError):
            text = str(path_or_text)
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if [c.strip().lower() for c in header[:2]] != ["x", "y"]:
        raise CalibrationError("microdata CSV must have header 'x,y'")
    xs, ys = [], []
    for row in reader:
        if not row:
            continue
        xs.append(float(row[0]))
        ys.append(float(row[1]))
    return Microdata(np.array(xs), np.array(ys), cutoff, semi_discrete)


def read_dataset_csv(path, d_multiple=0.0, true_d=0.0, dgp_id="", seed=0) -> Dataset:
    """Read an (x, y) dataset CSV; truth metadata defaults to unknown."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [c.strip().lower() for c in header[:2]] != ["x", "y"]:
            raise ValueError("dataset CSV must have header 'x,y'")
        xs, ys = [], []
        for row in reader:
            if not row:
                continue
            xs.append(float(row[0]))
            ys.append(float(row[1]))
    return Dataset(np.array(xs), np.array(ys), d_multiple, true_d, dgp_id, seed)
