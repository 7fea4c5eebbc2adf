"""Pulse envelopes: generation, normalization, and CSV interchange.

Every other module works on :class:`SampledWaveform`, a uniformly sampled
real envelope that carries its own sample rate and time origin.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np
from scipy.interpolate import CubicHermiteSpline

DEFAULT_SAMPLE_RATE = 40e6
DEFAULT_DURATION = 24e-6

# Shape targets of the stretched-front-leg pulse (microseconds).
SFOL_RISE_US = 2.8
SFOL_WIDTH_US = 3.4
SFOL_FALL_US = 3.0

CSV_HEADER = ("time_s", "amplitude")
_SPACING_RTOL = 1e-9

PulseKind = Literal["gaussian", "sfol_file", "sfol_surrogate"]


class WaveformError(ValueError):
    """Raised for invalid waveform data or infeasible pulse requests."""


@dataclass(frozen=True, eq=False)
class SampledWaveform:
    """Uniformly sampled real envelope.

    Attributes:
        samples: Amplitudes in linear units. Stored as a read-only float array.
        sample_rate: Samples per second.
        t0: Time of the first sample relative to the pulse epoch, in seconds.
        envelope: If True, all samples must be nonnegative.
    """

    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0
    envelope: bool = True

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float, copy=True).reshape(-1)
        if arr.size == 0:
            raise WaveformError("waveform must contain at least one sample")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise WaveformError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.envelope and np.any(arr < 0):
            idx = int(np.argmax(arr < 0))
            raise WaveformError(f"envelope sample {idx} is negative ({arr[idx]!r})")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        """Sample instants in seconds."""
        return self.t0 + np.arange(self.samples.size) / self.sample_rate

    @property
    def peak(self) -> float:
        return float(np.max(self.samples))

    def with_samples(self, samples, envelope: bool | None = None) -> SampledWaveform:
        """Return a waveform on the same time grid with new samples."""
        return SampledWaveform(
            samples,
            self.sample_rate,
            self.t0,
            self.envelope if envelope is None else envelope,
        )


@dataclass(frozen=True)
class PulseSpec:
    """Requested pulse kind and target shape parameters.

    Attributes:
        kind: ``gaussian``, ``sfol_file`` or ``sfol_surrogate``.
        rise_time_us: 10% to 90% leading-edge time.
        width_us: 50% to 50% width.
        fall_time_us: 90% to 10% trailing-edge time.
        peak_amplitude: Peak value in linear units.
        file_path: CSV source for ``sfol_file``.
        foot_frac: Duration of the 1% to 10% foot as a fraction of the rise time
            (surrogate only).
        upper_frac: Duration of the 50% to 90% segment as a fraction of the rise
            time (surrogate only).
        top_frac: Duration of the 90% to 100% shoulder as a fraction of the rise
            time (surrogate only).
    """

    kind: PulseKind = "sfol_surrogate"
    rise_time_us: float = SFOL_RISE_US
    width_us: float = SFOL_WIDTH_US
    fall_time_us: float = SFOL_FALL_US
    peak_amplitude: float = 1.0
    file_path: str | None = None
    foot_frac: float = 1.0
    upper_frac: float = 0.1
    top_frac: float = 0.2

    def __post_init__(self):
        if self.kind not in ("gaussian", "sfol_file", "sfol_surrogate"):
            raise WaveformError(f"unknown pulse kind {self.kind!r}")
        for name in ("rise_time_us", "width_us", "fall_time_us", "peak_amplitude"):
            if not getattr(self, name) > 0:
                raise WaveformError(f"{name} must be positive")
        for name in ("foot_frac", "upper_frac", "top_frac"):
            if not getattr(self, name) > 0:
                raise WaveformError(f"{name} must be positive")
        if self.upper_frac + self.top_frac >= 1.0:
            raise WaveformError("upper_frac + top_frac must be below 1")
        if self.kind == "sfol_file" and not self.file_path:
            raise WaveformError("sfol_file pulses need file_path")


def gaussian_sigma(width_us: float) -> float:
    """Standard deviation in seconds for a given half-amplitude width."""
    return width_us * 1e-6 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def _centered_grid(sample_rate: float, duration: float) -> tuple[int, int, float]:
    n = int(round(duration * sample_rate))
    if n < 3:
        raise WaveformError("duration holds fewer than three samples")
    center = n // 2
    return n, center, -center / sample_rate


def _check_support(samples: np.ndarray, what: str) -> None:
    peak = samples.max()
    if samples[0] >= 0.01 * peak or samples[-1] >= 0.01 * peak:
        raise WaveformError(
            f"window too short for {what}: edge amplitude reaches 1% of peak"
        )


def generate_gaussian(
    spec: PulseSpec,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    duration: float = DEFAULT_DURATION,
) -> SampledWaveform:
    """Gaussian envelope whose half-amplitude width equals ``spec.width_us``.

    The peak falls exactly on the center sample, which is the time origin.

    Raises:
        WaveformError: If ``spec.kind`` is not gaussian, or the window is shorter
            than four widths or clips the pulse above 1% of peak.
    """
    if spec.kind != "gaussian":
        raise WaveformError(f"expected a gaussian spec, got {spec.kind!r}")
    if duration < 4 * spec.width_us * 1e-6:
        raise WaveformError("duration must be at least four pulse widths")
    n, center, t0 = _centered_grid(sample_rate, duration)
    t = (np.arange(n) - center) / sample_rate
    sigma = gaussian_sigma(spec.width_us)
    samples = spec.peak_amplitude * np.exp(-(t**2) / (2 * sigma**2))
    _check_support(samples, "gaussian pulse")
    return SampledWaveform(samples, sample_rate, t0)


def _monotone_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Interior knot slopes by the Fritsch-Carlson weighted harmonic mean."""
    h = np.diff(x)
    d = np.diff(y) / h
    m = np.zeros_like(y)
    for i in range(1, len(x) - 1):
        if d[i - 1] * d[i] > 0:
            w1 = 2 * h[i] + h[i - 1]
            w2 = h[i] + 2 * h[i - 1]
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i])
    m[0] = d[0]
    m[-1] = 0.0
    return m


@dataclass(frozen=True)
class _SurrogateShape:
    knots: np.ndarray
    levels: np.ndarray
    slopes: np.ndarray
    plateau: float
    sigma_fall: float

    @property
    def support(self) -> tuple[float, float]:
        """Times of the leading and trailing 1% points relative to peak onset."""
        trail = self.plateau + self.sigma_fall * math.sqrt(2 * math.log(100.0))
        return float(self.knots[0]), trail


def _surrogate_shape(spec: PulseSpec) -> _SurrogateShape:
    rise = spec.rise_time_us * 1e-6
    width = spec.width_us * 1e-6
    fall = spec.fall_time_us * 1e-6
    # Half-Gaussian trailing edge: 90% -> 10% spans sigma * (a10 - a90).
    sigma_fall = fall / (math.sqrt(2 * math.log(10.0)) - math.sqrt(2 * math.log(1 / 0.9)))
    half_fall = sigma_fall * math.sqrt(2 * math.log(2.0))
    t_upper = spec.upper_frac * rise
    t_top = spec.top_frac * rise
    plateau = width - half_fall - t_upper - t_top
    if plateau < 0:
        raise WaveformError(
            f"infeasible shape: rise {spec.rise_time_us} us, width {spec.width_us} us, "
            f"fall {spec.fall_time_us} us leave no room for a flat top"
        )
    t90 = -t_top
    t50 = t90 - t_upper
    t10 = t90 - rise
    t01 = t10 - spec.foot_frac * rise
    knots = np.array([t01, t10, t50, t90, 0.0])
    levels = np.array([0.01, 0.1, 0.5, 0.9, 1.0])
    return _SurrogateShape(knots, levels, _monotone_slopes(knots, levels), plateau, sigma_fall)


def _surrogate_unit(shape: _SurrogateShape, t: np.ndarray) -> np.ndarray:
    knots, slopes = shape.knots, shape.slopes
    spline = CubicHermiteSpline(knots, shape.levels, slopes)
    out = np.empty_like(t)
    foot = t < knots[0]
    # Exponential foot matches value and slope at the 1% knot.
    out[foot] = 0.01 * np.exp(slopes[0] / 0.01 * (t[foot] - knots[0]))
    lead = (t >= knots[0]) & (t <= 0.0)
    out[lead] = spline(t[lead])
    top = (t > 0.0) & (t <= shape.plateau)
    out[top] = 1.0
    tail = t > shape.plateau
    out[tail] = np.exp(-((t[tail] - shape.plateau) ** 2) / (2 * shape.sigma_fall**2))
    return out


def generate_sfol_surrogate(
    spec: PulseSpec,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    duration: float = DEFAULT_DURATION,
) -> SampledWaveform:
    """Smooth stand-in for a stretched-front-leg pulse.

    The leading edge is a monotone C1 cubic through the 1%, 10%, 50%, 90% and
    100% points. A long low foot and a steep upper segment concentrate the rise
    time below the half-amplitude point. A flat top sets the 50% width and a
    half-Gaussian sets the fall time. The 1%-to-1% support is centered in the
    window.

    Raises:
        WaveformError: For a wrong kind, an infeasible shape tuple, or a window
            that clips the pulse.
    """
    if spec.kind != "sfol_surrogate":
        raise WaveformError(f"expected an sfol_surrogate spec, got {spec.kind!r}")
    shape = _surrogate_shape(spec)
    lead, trail = shape.support
    n, center, t0 = _centered_grid(sample_rate, duration)
    t = (np.arange(n) - center) / sample_rate
    samples = spec.peak_amplitude * _surrogate_unit(shape, t + 0.5 * (lead + trail))
    _check_support(samples, "surrogate pulse")
    return SampledWaveform(samples, sample_rate, t0)


def generate_pulse(
    spec: PulseSpec,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    duration: float = DEFAULT_DURATION,
) -> SampledWaveform:
    """Dispatch on ``spec.kind``. File pulses are scaled to ``peak_amplitude``."""
    if spec.kind == "gaussian":
        return generate_gaussian(spec, sample_rate, duration)
    if spec.kind == "sfol_surrogate":
        return generate_sfol_surrogate(spec, sample_rate, duration)
    w = peak_normalize(load_waveform(spec.file_path))
    return w.with_samples(w.samples * spec.peak_amplitude)


def peak_normalize(w: SampledWaveform) -> SampledWaveform:
    """Scale so the maximum sample is exactly 1.0."""
    peak = float(np.max(w.samples))
    if not peak > 0:
        raise WaveformError("cannot normalize a waveform without a positive peak")
    if peak == 1.0:
        return w
    return w.with_samples(w.samples / peak)


def save_waveform(w: SampledWaveform, path: str | Path) -> None:
    """Write ``time_s,amplitude`` CSV using round-trippable float text."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for t, a in zip(w.times.tolist(), w.samples.tolist()):
            writer.writerow((repr(t), repr(a)))


def load_waveform(path: str | Path, envelope: bool = True) -> SampledWaveform:
    """Read a waveform CSV written by :func:`save_waveform` or a scope export.

    Raises:
        WaveformError: On a bad header, malformed or non-finite rows, a time
            column that is not strictly increasing, or spacing that deviates
            from uniform by more than 1e-9 relative.
    """
    path = Path(path)
    times, amps = [], []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise WaveformError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for row_idx, row in enumerate(reader):
            if not row:
                continue
            if len(row) != 2:
                raise WaveformError(f"{path}: row {row_idx} has {len(row)} fields")
            try:
                t, a = float(row[0]), float(row[1])
            except ValueError as exc:
                raise WaveformError(f"{path}: row {row_idx} is not numeric") from exc
            if not (math.isfinite(t) and math.isfinite(a)):
                raise WaveformError(f"{path}: row {row_idx} holds a non-finite value")
            times.append(t)
            amps.append(a)
    if len(times) < 2:
        raise WaveformError(f"{path}: need at least two samples")
    t = np.asarray(times)
    steps = np.diff(t)
    if np.any(steps <= 0):
        row_idx = int(np.argmax(steps <= 0)) + 1
        raise WaveformError(f"{path}: time column not increasing at row {row_idx}")
    dt = (t[-1] - t[0]) / (t.size - 1)
    dev = np.abs(steps - dt) / dt
    if np.any(dev > _SPACING_RTOL):
        row_idx = int(np.argmax(dev)) + 1
        raise WaveformError(
            f"{path}: nonuniform sample spacing at row {row_idx} "
            f"(relative deviation {dev.max():.3g})"
        )
    # Timestamps carry rounding; snap the rate to 12 significant digits.
    sample_rate = float(f"{1.0 / dt:.12g}")
    return SampledWaveform(np.asarray(amps), sample_rate, float(t[0]), envelope)
