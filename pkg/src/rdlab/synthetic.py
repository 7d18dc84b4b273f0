"""Bundled synthetic microdata and example DGPs.

The original microdata behind published RD studies cannot ship with the
package, so calibration and the experiment harness run on these synthetic
stand-ins.  Each generator produces raw microdata (pre-normalization) from a
known truth, which makes them usable as Monte Carlo ground truth in tests.
"""

from __future__ import annotations

import numpy as np

from .dgp import Dgp, Microdata, PiecewisePolyCef, calibrate_dgp
from .fitting import poly_eval
from .rng import rng_from

# Quintic coefficient sets (ascending) used by the curved examples.  Both
# arms share the intercept so the underlying truth is continuous at 0.
_CURVED_LEFT = np.array([2.0, 0.8, 3.0, -2.0, -1.5, 1.0])
_CURVED_RIGHT = np.array([2.0, -0.5, -2.5, 2.0, 1.0, -0.8])

_MILD_LEFT = np.array([1.0, 0.6, 0.9, -0.4, 0.0, 0.0])
_MILD_RIGHT = np.array([1.0, -0.3, -0.7, 0.5, 0.0, 0.0])


def _scaled(coeffs: np.ndarray, scale: float) -> np.ndarray:
    out = coeffs.copy()
    out[1:] *= scale
    return out


def synthetic_microdata(
    kind: str = "curved",
    n: int = 2000,
    seed: int = 0,
    sigma: float = 0.6,
    cutoff: float = 0.0,
    cef_scale: float = 0.35,
) -> Microdata:
    """Raw microdata drawn from a known continuous truth plus normal noise.

    Kinds: 'flat' (constant CEF), 'linear', 'mild' (cubic curvature),
    'curved' (quintic curvature), 'skewed' (curved CEF with a right-skewed
    running variable).  ``cef_scale`` shrinks the non-constant CEF terms;
    the default keeps the error variance dominant over the CEF's own
    variation, as in real RD microdata.
    """
    rng = rng_from(seed, "micro", kind)
    if kind == "skewed":
        raw = rng.beta(2.0, 5.0, size=n) * 2.0 - 0.7  # bulk left of the cutoff
    else:
        raw = rng.uniform(-1.0, 1.0, size=n)
    if kind == "flat":
        mean = np.full(n, 1.0)
    elif kind == "linear":
        mean = 0.5 + 0.8 * cef_scale * raw
    elif kind == "mild":
        left, right = _scaled(_MILD_LEFT, cef_scale), _scaled(_MILD_RIGHT, cef_scale)
        mean = np.where(raw < 0, poly_eval(left, raw), poly_eval(right, raw))
    elif kind in ("curved", "skewed"):
        left, right = _scaled(_CURVED_LEFT, cef_scale), _scaled(_CURVED_RIGHT, cef_scale)
        mean = np.where(raw < 0, poly_eval(left, raw), poly_eval(right, raw))
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    y = mean + rng.normal(0.0, sigma, size=n)
    return Microdata(raw + cutoff, y, cutoff=cutoff)


def example_dgp(kind: str = "curved", n: int = 2000, seed: int = 0, **calib) -> Dgp:
    """Calibrate a DGP from bundled synthetic microdata."""
    micro = synthetic_microdata(kind, n=n, seed=seed)
    dgp = calibrate_dgp(micro, source_name=f"synthetic:{kind}", **calib)
    return dgp


def direct_dgp(
    kind: str = "curved", n: int = 600, seed: int = 0, sigma: float = 0.6
) -> Dgp:
    """A DGP built directly from known quintic truth, skipping calibration.

    Useful when a test needs exact knowledge of the CEF (for example the
    curvature at 0) rather than a fitted approximation.  The running
    variable pool is a seeded uniform draw on [-0.99, 0.99].
    """
    if kind == "curved":
        left, right = _CURVED_LEFT, _CURVED_RIGHT
    elif kind == "mild":
        left, right = _MILD_LEFT, _MILD_RIGHT
    elif kind == "linear":
        left = right = np.array([0.5, 0.8, 0.0, 0.0, 0.0, 0.0])
    elif kind == "flat":
        left = right = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    else:
        raise ValueError(f"unknown direct kind {kind!r}")
    rng = rng_from(seed, "pool", kind)
    pool = rng.uniform(-0.99, 0.99, size=n)
    return Dgp(
        x_pool=pool,
        cef=PiecewisePolyCef(left, right),
        sigma=sigma,
        n=n,
        noise_model="homoskedastic",
        alpha_left=float(left[0]),
        alpha_right=float(right[0]),
        provenance={"source": f"direct:{kind}", "options": {"sigma": sigma}},
    )


def bundled_dgps(n: int = 1200, seed: int = 11) -> dict[str, Dgp]:
    """The named example DGPs shipped for demos and acceptance checks."""
    return {
        "flat": example_dgp("flat", n=n, seed=seed),
        "linear": example_dgp("linear", n=n, seed=seed + 1),
        "mild": example_dgp("mild", n=n, seed=seed + 2),
        "curved": example_dgp("curved", n=n, seed=seed + 3),
        "skewed": example_dgp("skewed", n=n, seed=seed + 4),
    }
