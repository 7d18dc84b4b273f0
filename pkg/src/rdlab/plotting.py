"""Deterministic SVG rendering of RD binned scatter plots and lineups.

Style constants are fixed (canvas size, margins, fonts, monochrome marks)
so that identical inputs always produce byte-identical documents; golden
files stay stable.  Truth about a graph travels only in a sidecar record,
never inside the SVG.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import binning
from .dgp import Dataset, Dgp, fit_piecewise_poly, sample_dataset
from .fitting import poly_eval
from .rng import derive_seed, rng_from

CANVAS_W, CANVAS_H = 800, 600
MARGIN = {"left": 70, "right": 20, "top": 20, "bottom": 50}
POINT_RADIUS = 3
FONT = "font-family=\"monospace\" font-size=\"12\""

LINEUP_ROWS, LINEUP_COLS = 4, 5
LINEUP_PANEL_W, LINEUP_PANEL_H = 240, 180


@dataclass(frozen=True)
class GraphicalParams:
    """The five-parameter vector controlling plot construction."""

    bin_selector: str = "mv"  # "imse" | "mv"
    spacing: str = "even"  # "even" | "quantile"
    fit_line_order: Optional[int] = None  # None = no fit lines
    vertical_line: bool = True
    y_scale: str = "default"  # "default" | "doubled"

    def __post_init__(self):
        if self.bin_selector not in ("imse", "mv"):
            raise ValueError(f"unknown bin selector {self.bin_selector!r}")
        if self.spacing not in ("even", "quantile"):
            raise ValueError(f"unknown spacing {self.spacing!r}")
        if self.fit_line_order is not None and not 0 <= self.fit_line_order <= 8:
            raise ValueError("fit line order must be in [0, 8]")
        if self.y_scale not in ("default", "doubled"):
            raise ValueError(f"unknown y scale {self.y_scale!r}")

    def to_dict(self) -> dict:
        return {
            "bin_selector": self.bin_selector,
            "spacing": self.spacing,
            "fit_line_order": self.fit_line_order,
            "vertical_line": self.vertical_line,
            "y_scale": self.y_scale,
        }

    @staticmethod
    def from_dict(d: dict) -> "GraphicalParams":
        return GraphicalParams(
            bin_selector=d.get("bin_selector", "mv"),
            spacing=d.get("spacing", "even"),
            fit_line_order=d.get("fit_line_order"),
            vertical_line=bool(d.get("vertical_line", True)),
            y_scale=d.get("y_scale", "default"),
        )

    def label(self) -> str:
        fit = "nofit" if self.fit_line_order is None else f"fit{self.fit_line_order}"
        vline = "vline" if self.vertical_line else "novline"
        return f"{self.bin_selector}-{self.spacing}-{fit}-{vline}-{self.y_scale}"


@dataclass(frozen=True)
class RenderedGraph:
    svg: str
    truth: dict = field(repr=False)
    summary: dict

    def sidecar_json(self) -> str:
        return json.dumps(self.truth, sort_keys=True)


def _fmt(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def _y_range(series: binning.BinnedSeries, y_scale: str) -> tuple[float, float]:
    """Axis range rule: binned-mean extent plus a 5% pad each side; the
    doubled variant further extends the default range by half its width in
    each direction, condensing the data vertically."""
    lo, hi = float(series.y_mean.min()), float(series.y_mean.max())
    spread = hi - lo
    if spread == 0:
        spread = max(1e-9, 0.1 * max(1.0, abs(hi)))
    pad = 0.05 * spread
    lo_d, hi_d = lo - pad, hi + pad
    if y_scale == "doubled":
        w = hi_d - lo_d
        return lo_d - 0.5 * w, hi_d + 0.5 * w
    return lo_d, hi_d


class _Frame:
    """Maps data coordinates into a pixel rectangle."""

    def __init__(self, rect, x_domain, y_domain):
        self.x0, self.y0, self.w, self.h = rect
        self.xd = x_domain
        self.yd = y_domain

    def px(self, x: float) -> float:
        t = (x - self.xd[0]) / (self.xd[1] - self.xd[0])
        return self.x0 + t * self.w

    def py(self, y: float) -> float:
        t = (y - self.yd[0]) / (self.yd[1] - self.yd[0])
        return self.y0 + self.h - t * self.h


def _panel_elements(
    dataset: Dataset,
    series: binning.BinnedSeries,
    gamma: GraphicalParams,
    frame: _Frame,
    with_ticks: bool,
) -> list[str]:
    el = []
    x0, y0, w, h = frame.x0, frame.y0, frame.w, frame.h
    el.append(
        f'<rect class="panel" x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(w)}" '
        f'height="{_fmt(h)}" fill="white" stroke="black" stroke-width="1"/>'
    )
    if with_ticks:
        for tx in (-1.0, -0.5, 0.0, 0.5, 1.0):
            px = frame.px(tx)
            el.append(
                f'<line x1="{_fmt(px)}" y1="{_fmt(y0 + h)}" x2="{_fmt(px)}" '
                f'y2="{_fmt(y0 + h + 5)}" stroke="black"/>'
            )
            el.append(
                f'<text x="{_fmt(px)}" y="{_fmt(y0 + h + 18)}" {FONT} '
                f'text-anchor="middle">{tx:g}</text>'
            )
        for ty in np.linspace(frame.yd[0], frame.yd[1], 5):
            py = frame.py(float(ty))
            el.append(
                f'<line x1="{_fmt(x0 - 5)}" y1="{_fmt(py)}" x2="{_fmt(x0)}" '
                f'y2="{_fmt(py)}" stroke="black"/>'
            )
            el.append(
                f'<text x="{_fmt(x0 - 8)}" y="{_fmt(py + 4)}" {FONT} '
                f'text-anchor="end">{ty:.4g}</text>'
            )
        el.append(
            f'<text x="{_fmt(x0 + w / 2)}" y="{_fmt(y0 + h + 35)}" {FONT} '
            f'text-anchor="middle">x</text>'
        )
        el.append(
            f'<text x="{_fmt(x0 - 55)}" y="{_fmt(y0 + h / 2)}" {FONT} '
            f'text-anchor="middle" transform="rotate(-90 {_fmt(x0 - 55)} '
            f'{_fmt(y0 + h / 2)})">y</text>'
        )
    if gamma.vertical_line:
        px = frame.px(0.0)
        el.append(
            f'<line class="cutoff-line" x1="{_fmt(px)}" y1="{_fmt(y0)}" '
            f'x2="{_fmt(px)}" y2="{_fmt(y0 + h)}" stroke="black" '
            f'stroke-dasharray="4,3" stroke-width="1"/>'
        )
    if gamma.fit_line_order is not None:
        order = gamma.fit_line_order
        coeffs_l, coeffs_r, _, _, _ = fit_piecewise_poly(dataset.x, dataset.y, order)
        for side, coeffs in (("left", coeffs_l), ("right", coeffs_r)):
            sx, _ = dataset.side(side)
            grid = np.linspace(float(sx.min()), float(sx.max()), 200)
            vals = poly_eval(coeffs, grid)
            pts = " ".join(
                f"{_fmt(frame.px(gx))},{_fmt(_clamp(frame.py(gy), y0, y0 + h))}"
                for gx, gy in zip(grid, vals)
            )
            el.append(
                f'<polyline class="fit-line" points="{pts}" fill="none" '
                f'stroke="black" stroke-width="1.5"/>'
            )
    for bx, by in zip(series.x_pos, series.y_mean):
        py = frame.py(float(by))
        if not (y0 <= py <= y0 + h):
            continue  # doubled-scale never clips; guard for extreme inputs
        el.append(
            f'<circle class="bin-point" cx="{_fmt(frame.px(float(bx)))}" '
            f'cy="{_fmt(py)}" r="{POINT_RADIUS}" fill="black"/>'
        )
    return el


def _clamp(v, lo, hi):
    return min(max(v, lo), hi)


def render_rd_plot(
    dataset: Dataset,
    gamma: GraphicalParams,
    graph_id: str = "",
    y_range: Optional[tuple[float, float]] = None,
) -> RenderedGraph:
    """Render one binned scatter plot under the given graphical parameters.

    Bin selection and averaging delegate to the binning module; the x axis
    is fixed to [-1, 1]; axis labels carry no information about the truth.
    """
    plan = binning.select_bins(dataset, gamma.bin_selector, gamma.spacing)
    series = binning.bin_means(dataset, plan)
    yd = y_range if y_range is not None else _y_range(series, gamma.y_scale)
    rect = (
        MARGIN["left"],
        MARGIN["top"],
        CANVAS_W - MARGIN["left"] - MARGIN["right"],
        CANVAS_H - MARGIN["top"] - MARGIN["bottom"],
    )
    frame = _Frame(rect, (-1.0, 1.0), yd)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_W}" '
        f'height="{CANVAS_H}" viewBox="0 0 {CANVAS_W} {CANVAS_H}">',
        f'<rect x="0" y="0" width="{CANVAS_W}" height="{CANVAS_H}" fill="white"/>',
    ]
    parts.extend(_panel_elements(dataset, series, gamma, frame, with_ticks=True))
    parts.append("</svg>")
    svg = "\n".join(parts)
    truth = {
        "graph_id": graph_id,
        "dgp_id": dataset.dgp_id,
        "d_multiple": dataset.d_multiple,
        "seed": dataset.seed,
        "gamma": gamma.to_dict(),
    }
    summary = {
        "n_points": int(len(series)),
        "has_vline": gamma.vertical_line,
        "has_fitlines": gamma.fit_line_order is not None,
        "y_range": [yd[0], yd[1]],
    }
    return RenderedGraph(svg=svg, truth=truth, summary=summary)


# ---------------------------------------------------------------------------
# Lineups
# ---------------------------------------------------------------------------

LINEUP_GAMMA = GraphicalParams(
    bin_selector="mv", spacing="even", fit_line_order=None,
    vertical_line=False, y_scale="default",
)


def plan_lineup(seed: int, n_panels: int = 20) -> tuple[int, list[int]]:
    """Panel seeds and the uniformly random position of the real data.

    Split out from rendering so placement calibration can be simulated
    cheaply.
    """
    answer_index = int(rng_from(seed, "answer").integers(0, n_panels))
    panel_seeds = [derive_seed(seed, "panel", i) for i in range(n_panels)]
    return answer_index, panel_seeds


def render_lineup(
    real_dataset: Dataset, dgp: Dgp, seed: int
) -> tuple[str, tuple[int, int]]:
    """A 4x5 grid hiding the real data among 19 null simulations.

    All decoys are drawn from the DGP with zero discontinuity under
    distinct derived seeds; panels share axis ranges; the answer (1-based
    row, column) is returned separately and never embedded in the SVG.
    """
    n_panels = LINEUP_ROWS * LINEUP_COLS
    answer_index, panel_seeds = plan_lineup(seed, n_panels)
    datasets = []
    for i in range(n_panels):
        if i == answer_index:
            datasets.append(real_dataset)
        else:
            datasets.append(sample_dataset(dgp, 0.0, panel_seeds[i]))
    all_series = []
    for ds in datasets:
        plan = binning.select_bins(ds, LINEUP_GAMMA.bin_selector, LINEUP_GAMMA.spacing)
        all_series.append(binning.bin_means(ds, plan))
    lo = min(float(s.y_mean.min()) for s in all_series)
    hi = max(float(s.y_mean.max()) for s in all_series)
    spread = (hi - lo) or 1.0
    yd = (lo - 0.05 * spread, hi + 0.05 * spread)

    width = LINEUP_COLS * LINEUP_PANEL_W
    height = LINEUP_ROWS * LINEUP_PANEL_H
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for i, (ds, series) in enumerate(zip(datasets, all_series)):
        row, col = divmod(i, LINEUP_COLS)
        rect = (
            col * LINEUP_PANEL_W + 8,
            row * LINEUP_PANEL_H + 8,
            LINEUP_PANEL_W - 16,
            LINEUP_PANEL_H - 16,
        )
        frame = _Frame(rect, (-1.0, 1.0), yd)
        parts.append(f'<g class="lineup-panel" data-panel="{i + 1}">')
        parts.extend(_panel_elements(ds, series, LINEUP_GAMMA, frame, with_ticks=False))
        parts.append("</g>")
    parts.append("</svg>")
    answer = (answer_index // LINEUP_COLS + 1, answer_index % LINEUP_COLS + 1)
    return "\n".join(parts), answer
