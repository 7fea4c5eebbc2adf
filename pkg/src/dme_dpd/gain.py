"""Normalization gain estimates for the inverse-learning loop.

``gain_peak`` is the conventional output-peak ratio. ``gain_dme`` searches the
operating curve for its most linear stretch and averages the gain there, which
keeps the strongly bent low-input region and the compressed top out of ``G``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

GainMethod = Literal["peak", "dme_region"]

DEFAULT_WINDOW_FRAC = 0.3
DEFAULT_STEP_FRAC = 0.05

# Slack for window edges and RMS ties, relative to the data span.
_EDGE_RTOL = 1e-9
_TIE_RTOL = 1e-12


class GainError(ValueError):
    """Raised when a gain cannot be estimated from the given points."""


@dataclass(frozen=True)
class GainEstimate:
    """Normalization gain and how it was obtained.

    Attributes:
        value: Gain ``G`` > 0.
        method: ``peak`` or ``dme_region``.
        region: Input interval ``(x_lo, x_hi)`` used by ``dme_region``.
        region_rms: RMS residual of the line fit inside ``region``.
    """

    value: float
    method: GainMethod
    region: tuple[float, float] | None = None
    region_rms: float | None = None

    def __post_init__(self):
        if not self.value > 0:
            raise GainError(f"gain must be positive, got {self.value!r}")
        if self.method == "dme_region":
            if self.region is None or not self.region[0] < self.region[1]:
                raise GainError("dme_region gain needs a region with x_lo < x_hi")

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "region": list(self.region) if self.region is not None else None,
            "region_rms": self.region_rms,
        }


def _as_points(points) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise GainError("no points given")
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GainError(f"points must have shape (n, 2), got {pts.shape}")
    return pts[:, 0], pts[:, 1]


def gain_peak(points) -> GainEstimate:
    """``G = y/x`` at the maximum-output point; ties go to the larger x.

    Raises:
        GainError: On empty input or a zero input at the peak.
    """
    x, y = _as_points(points)
    idx = np.lexsort((x, y))[-1]
    if x[idx] == 0:
        raise GainError("input magnitude is zero at the output peak")
    return GainEstimate(float(y[idx] / x[idx]), "peak")


def line_fit_rms(x, y) -> float:
    """RMS residual of the least-squares line through ``(x, y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(np.sqrt(np.mean(resid**2)))


def gain_dme(
    points,
    window_frac: float = DEFAULT_WINDOW_FRAC,
    step_frac: float = DEFAULT_STEP_FRAC,
) -> GainEstimate:
    """Region-averaged gain over the most linear window of the operating curve.

    Windows of width ``window_frac`` of the x-span start at the minimum x and
    advance by ``step_frac`` of the span. Each window with at least two points
    gets a least-squares line; the window with the smallest RMS residual wins,
    lowest start on ties. The gain is ``sum(y) / sum(x)`` over its points.

    Raises:
        GainError: On fewer than 20 points, bad fractions, or no valid window.
    """
    if not 0 < step_frac <= window_frac < 1:
        raise GainError("need 0 < step_frac <= window_frac < 1")
    x, y = _as_points(points)
    pts = np.unique(np.column_stack([x, y]), axis=0)
    x, y = pts[:, 0], pts[:, 1]
    if x.size < 20:
        raise GainError(f"need at least 20 distinct points, got {x.size}")
    x_min, x_max = float(x[0]), float(x[-1])
    span = x_max - x_min
    if not span > 0:
        raise GainError("points span no input range")

    # Window membership in span-normalized coordinates keeps the search
    # invariant under joint scaling of x and y.
    pos = (x - x_min) / span
    n_windows = int(np.floor((1.0 - window_frac) / step_frac + _EDGE_RTOL)) + 1
    tie_tol = _TIE_RTOL * float(np.max(np.abs(y)))

    best = None
    for j in range(n_windows):
        lo = j * step_frac
        hi = lo + window_frac
        member = (pos >= lo - _EDGE_RTOL) & (pos <= hi + _EDGE_RTOL)
        if np.count_nonzero(member) < 2:
            continue
        rms = line_fit_rms(x[member], y[member])
        if best is None or rms < best[0] - tie_tol:
            best = (rms, lo, hi, member)
    if best is None:
        raise GainError("no window holds two or more points")

    rms, lo, hi, member = best
    sum_x = float(np.sum(x[member]))
    if not sum_x > 0:
        raise GainError("selected region has zero input magnitude")
    region = (x_min + lo * span, x_min + hi * span)
    return GainEstimate(float(np.sum(y[member]) / sum_x), "dme_region", region, rms)


def estimate_gain(
    points,
    method: GainMethod,
    window_frac: float = DEFAULT_WINDOW_FRAC,
    step_frac: float = DEFAULT_STEP_FRAC,
) -> GainEstimate:
    """Dispatch to :func:`gain_peak` or :func:`gain_dme`."""
    if method == "peak":
        return gain_peak(points)
    if method == "dme_region":
        return gain_dme(points, window_frac, step_frac)
    raise GainError(f"unknown gain method {method!r}")
