"""Single-reflection multipath and the ranging error it induces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .waveform import SampledWaveform

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_RATIO = 0.3
DEFAULT_THRESHOLD = 0.5

Polarity = Literal["in_phase", "inverted"]


class TOAError(ValueError):
    """Raised when a time of arrival cannot be extracted."""


def default_delay_grid() -> np.ndarray:
    """0 to 6 us in 25 ns steps (241 delays)."""
    return np.linspace(0.0, 6e-6, 241)


@dataclass(frozen=True, eq=False)
class MultipathScenario:
    """Reflection strength, polarity and the delays to sweep.

    Attributes:
        peak_ratio: Replica amplitude relative to the direct pulse, in [0, 1).
        delay_grid: Replica delays in seconds.
        polarity: Replica added (``in_phase``) or subtracted (``inverted``).
        threshold_frac: TOA threshold as a fraction of peak.
    """

    peak_ratio: float = DEFAULT_RATIO
    delay_grid: np.ndarray | None = None
    polarity: Polarity = "in_phase"
    threshold_frac: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        grid = default_delay_grid() if self.delay_grid is None else self.delay_grid
        grid = np.array(grid, dtype=float).reshape(-1)
        if not 0 <= self.peak_ratio < 1:
            raise ValueError("peak_ratio must be in [0, 1)")
        if grid.size == 0 or np.any(grid < 0):
            raise ValueError("delays must be nonnegative and nonempty")
        if self.polarity not in ("in_phase", "inverted"):
            raise ValueError(f"unknown polarity {self.polarity!r}")
        if not 0 < self.threshold_frac < 1:
            raise ValueError("threshold_frac must be in (0, 1)")
        grid.flags.writeable = False
        object.__setattr__(self, "delay_grid", grid)


@dataclass(frozen=True, eq=False)
class RangeErrorCurve:
    """Range error per delay and its RMS over the grid."""

    delays_s: np.ndarray
    errors_m: np.ndarray

    @property
    def rms_m(self) -> float:
        return float(np.sqrt(np.mean(self.errors_m**2)))

    def to_dict(self) -> dict:
        return {
            "rms_m": self.rms_m,
            "delays_us": (self.delays_s * 1e6).tolist(),
            "errors_m": self.errors_m.tolist(),
        }

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("delay_us,error_m\n")
            for d, e in zip((self.delays_s * 1e6).tolist(), self.errors_m.tolist()):
                fh.write(f"{d!r},{e!r}\n")


def apply_multipath(
    w: SampledWaveform, delay: float, ratio: float, polarity: Polarity = "in_phase"
) -> SampledWaveform:
    """``w(t) +- ratio * w(t - delay)`` on a grid extended to hold the replica.

    Fractional delays use linear interpolation between samples.
    """
    if delay < 0:
        raise ValueError("delay must be nonnegative")
    shift = delay * w.sample_rate
    n_out = len(w) + int(math.ceil(shift))
    direct = np.zeros(n_out)
    direct[: len(w)] = w.samples
    idx = np.arange(n_out)
    replica = np.interp(idx - shift, np.arange(len(w)), w.samples, left=0.0, right=0.0)
    sign = 1.0 if polarity == "in_phase" else -1.0
    out = direct + sign * ratio * replica
    return SampledWaveform(out, w.sample_rate, w.t0, envelope=polarity == "in_phase")


def toa_estimate(w: SampledWaveform, threshold_frac: float = DEFAULT_THRESHOLD) -> float:
    """Time of the first upward crossing of ``threshold_frac`` of peak.

    Raises:
        TOAError: If the waveform has no positive peak or starts above the
            threshold.
    """
    s = w.samples
    peak = float(np.max(s))
    if not peak > 0:
        raise TOAError("waveform has no positive peak")
    level = threshold_frac * peak
    i = int(np.argmax(s >= level))
    if i == 0:
        raise TOAError("waveform starts above the threshold; no upward crossing")
    frac = (level - s[i - 1]) / (s[i] - s[i - 1])
    return w.t0 + (i - 1 + frac) / w.sample_rate


def range_error_curve(
    w: SampledWaveform, scenario: MultipathScenario = MultipathScenario()
) -> RangeErrorCurve:
    """One-way range error ``c * (TOA(multipath) - TOA(direct))`` per delay.

    Raises:
        TOAError: Naming the first delay at which the TOA fails.
    """
    ref = toa_estimate(w, scenario.threshold_frac)
    errors = np.empty(scenario.delay_grid.size)
    for j, delay in enumerate(scenario.delay_grid):
        rx = apply_multipath(w, float(delay), scenario.peak_ratio, scenario.polarity)
        try:
            toa = toa_estimate(rx, scenario.threshold_frac)
        except TOAError as exc:
            raise TOAError(f"delay {delay * 1e6:.4g} us: {exc}") from exc
        errors[j] = SPEED_OF_LIGHT * (toa - ref)
    return RangeErrorCurve(scenario.delay_grid.copy(), errors)
