"""Pulse evaluation: shape parameters, waveform error, band power, compliance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import correlate

from .waveform import SampledWaveform

OFFSETS_MHZ = (-2.0, -0.8, 0.8, 2.0)
BAND_MHZ = 0.5
DEFAULT_PRF_HZ = 700.0
DEFAULT_RESOLUTION_HZ = 1e3
MAX_RESOLUTION_HZ = 25e3

RISE_LIMIT_US = 3.0
WIDTH_RANGE_US = (3.0, 4.0)
FALL_LIMIT_US = 3.5
# 100 W power class limits in a 0.5 MHz band.
LIMITS_DBM = {0.8: 13.0, 2.0: -7.0}
# Relative limits used without an absolute power mapping: the 100 W limits
# re-expressed against the 22.65 dBm carrier band of a nominal 3.5 us
# Gaussian pulse at 100 W peak and 700 Hz PRF.
LIMITS_DBC = {0.8: -9.65, 2.0: -29.65}


class MetricError(ValueError):
    """Raised for waveforms a metric cannot be computed on."""


@dataclass(frozen=True)
class ShapeParameters:
    """Pulse shape in microseconds."""

    rise_time_us: float
    width_us: float
    fall_time_us: float

    def to_dict(self) -> dict:
        return {
            "rise_time_us": self.rise_time_us,
            "width_us": self.width_us,
            "fall_time_us": self.fall_time_us,
        }


def _upward_crossing(s: np.ndarray, level: float, start: int = 0) -> float:
    """Fractional index of the first upward crossing of ``level`` at or after start."""
    above = np.flatnonzero(s[start:] >= level)
    if above.size == 0:
        raise MetricError(f"no upward crossing of level {level:.4g}")
    i = start + int(above[0])
    if i == 0:
        return 0.0
    return i - 1 + (level - s[i - 1]) / (s[i] - s[i - 1])


def _downward_crossing(s: np.ndarray, level: float) -> float:
    """Fractional index of the last downward crossing of ``level``."""
    above = np.flatnonzero(s >= level)
    if above.size == 0:
        raise MetricError(f"no downward crossing of level {level:.4g}")
    i = int(above[-1])
    if i == s.size - 1:
        return float(i)
    return i + (s[i] - level) / (s[i] - s[i + 1])


def measure_shape(w: SampledWaveform) -> ShapeParameters:
    """10-90% rise, 50% width and 90-10% fall with interpolated crossings.

    Raises:
        MetricError: If the pulse has no positive peak, more than one region
            above 90% of peak, or touches a window edge above 10%.
    """
    s = w.samples
    peak = float(np.max(s))
    if not peak > 0:
        raise MetricError("waveform has no positive peak")
    high = (s >= 0.9 * peak).astype(np.int8)
    regions = int(np.count_nonzero(np.diff(high) == 1) + high[0])
    if regions != 1:
        raise MetricError(f"expected one region above 90% of peak, found {regions}")
    if s[0] >= 0.1 * peak or s[-1] >= 0.1 * peak:
        raise MetricError("pulse is clipped by the window above 10% of peak")
    dt_us = 1e6 / w.sample_rate
    lead10 = _upward_crossing(s, 0.1 * peak)
    lead50 = _upward_crossing(s, 0.5 * peak)
    lead90 = _upward_crossing(s, 0.9 * peak)
    trail90 = _downward_crossing(s, 0.9 * peak)
    trail50 = _downward_crossing(s, 0.5 * peak)
    trail10 = _downward_crossing(s, 0.1 * peak)
    return ShapeParameters(
        float((lead90 - lead10) * dt_us),
        float((trail50 - lead50) * dt_us),
        float((trail10 - trail90) * dt_us),
    )


def _normalized(w: SampledWaveform) -> np.ndarray:
    peak = float(np.max(w.samples))
    if not peak > 0:
        raise MetricError("zero-energy waveform")
    return w.samples / peak


def aligned_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Shift ``b`` onto ``a`` by the cross-correlation peak, zero-extending both.

    Returns the two arrays on their union support and the lag of ``b``.
    """
    cc = correlate(a, b, mode="full", method="direct")
    lag = int(np.argmax(cc)) - (b.size - 1)
    start = min(0, lag)
    stop = max(a.size, lag + b.size)
    out_a = np.zeros(stop - start)
    out_b = np.zeros(stop - start)
    out_a[-start : -start + a.size] = a
    out_b[lag - start : lag - start + b.size] = b
    return out_a, out_b, lag


def rms_error(w: SampledWaveform, ref: SampledWaveform) -> float:
    """RMS difference of peak-normalized, correlation-aligned waveforms.

    Raises:
        MetricError: On differing sample rates or a zero-energy input.
    """
    if not math.isclose(w.sample_rate, ref.sample_rate, rel_tol=1e-12):
        raise MetricError("waveforms have different sample rates")
    a, b, _ = aligned_pair(_normalized(w), _normalized(ref))
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass(frozen=True, eq=False)
class EnergySpectrum:
    """Two-sided energy spectral density on an ascending frequency grid.

    Attributes:
        freqs_hz: Bin frequencies.
        esd: Energy per hertz in squared amplitude times seconds.
    """

    freqs_hz: np.ndarray
    esd: np.ndarray

    @property
    def df(self) -> float:
        return float(self.freqs_hz[1] - self.freqs_hz[0])

    def total_energy(self) -> float:
        return float(np.sum(self.esd) * self.df)

    def band_energy(self, center_hz: float, width_hz: float) -> float:
        """Trapezoidal integral of the ESD over ``center +- width/2``.

        The band edges are interpolated linearly between bins.
        """
        lo, hi = center_hz - width_hz / 2, center_hz + width_hz / 2
        f, e = self.freqs_hz, self.esd
        inside = (f > lo) & (f < hi)
        fx = np.concatenate([[lo], f[inside], [hi]])
        ex = np.concatenate([np.interp([lo], f, e), e[inside], np.interp([hi], f, e)])
        return float(np.trapezoid(ex, fx))


def energy_spectral_density(
    w: SampledWaveform, resolution_hz: float = DEFAULT_RESOLUTION_HZ
) -> EnergySpectrum:
    """ESD from a zero-padded FFT with bin spacing at most ``resolution_hz``.

    The negative half mirrors the positive half, so the spectrum of the real
    envelope is exactly symmetric.
    """
    if not 0 < resolution_hz <= MAX_RESOLUTION_HZ:
        raise MetricError(f"resolution must be in (0, {MAX_RESOLUTION_HZ:g}] Hz")
    n_min = max(len(w), int(math.ceil(w.sample_rate / resolution_hz)))
    nfft = 1 << (n_min - 1).bit_length()
    half = np.abs(np.fft.rfft(w.samples, nfft) * w.dt) ** 2
    pos_freqs = np.fft.rfftfreq(nfft, w.dt)
    # Bins -nfft/2 .. nfft/2 - 1; the Nyquist bin sits on the negative side.
    esd = np.concatenate([half[:0:-1], half[:-1]])
    freqs = np.concatenate([-pos_freqs[:0:-1], pos_freqs[:-1]])
    return EnergySpectrum(freqs, esd)


@dataclass(frozen=True)
class SpectrumReport:
    """Band powers at carrier offsets.

    Attributes:
        offsets_mhz: Band centers.
        band_power_db: Band power relative to the carrier band, in dBc.
        absolute_dbm: Band power under the peak-power mapping, if configured.
    """

    offsets_mhz: tuple[float, ...]
    band_power_db: tuple[float, ...]
    absolute_dbm: tuple[float, ...] | None = None
    band_mhz: float = BAND_MHZ
    prf_hz: float = DEFAULT_PRF_HZ

    def at(self, offset_mhz: float, absolute: bool = False) -> float:
        values = self.absolute_dbm if absolute else self.band_power_db
        if values is None:
            raise MetricError("no absolute mapping in this report")
        return values[self.offsets_mhz.index(offset_mhz)]

    def to_dict(self) -> dict:
        return {
            "offsets_mhz": list(self.offsets_mhz),
            "band_mhz": self.band_mhz,
            "prf_hz": self.prf_hz,
            "band_power_dbc": list(self.band_power_db),
            "absolute_dbm": None if self.absolute_dbm is None else list(self.absolute_dbm),
        }


def _db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def channel_power(
    w: SampledWaveform,
    offsets=OFFSETS_MHZ,
    band: float = BAND_MHZ,
    prf: float = DEFAULT_PRF_HZ,
    peak_power_w: float | None = None,
    resolution_hz: float = DEFAULT_RESOLUTION_HZ,
) -> SpectrumReport:
    """Average power in ``band``-MHz bands at each offset.

    Band energy times ``prf`` gives average power. Values are reported in dBc
    against the band centered on the carrier. With ``peak_power_w`` the
    envelope peak is mapped to that many watts and dBm values are added.

    Raises:
        MetricError: If a band reaches past Nyquist, or band is not positive.
    """
    if not band > 0:
        raise MetricError("band must be positive")
    offsets = tuple(float(o) for o in offsets)
    nyquist_mhz = w.sample_rate / 2e6
    for o in offsets:
        if abs(o) + band / 2 > nyquist_mhz:
            raise MetricError(f"offset {o} MHz exceeds Nyquist ({nyquist_mhz:g} MHz)")
    spectrum = energy_spectral_density(w, resolution_hz)
    carrier = spectrum.band_energy(0.0, band * 1e6) * prf
    if not carrier > 0:
        raise MetricError("zero-energy waveform")
    powers = [spectrum.band_energy(o * 1e6, band * 1e6) * prf for o in offsets]
    dbc = tuple(_db(p / carrier) for p in powers)
    absolute = None
    if peak_power_w is not None:
        # Envelope amplitude squared scales to watts at the peak.
        scale = peak_power_w / float(np.max(w.samples)) ** 2
        absolute = tuple(_db(p * scale / 1e-3) for p in powers)
    return SpectrumReport(offsets, dbc, absolute, band, prf)


@dataclass(frozen=True)
class ComplianceRules:
    """Thresholds for :func:`check_compliance`.

    Attributes:
        rise_limit_us: Rise time must be strictly below this.
        width_range_us: Inclusive width bounds.
        fall_limit_us: Fall time must be strictly below this.
        peak_power_w: Peak power for absolute spectrum limits; ``None``
            switches to relative limits.
        prf_hz: Pulse repetition frequency for band powers.
        limits_dbm: Offset magnitude (MHz) to absolute band limit.
        limits_dbc: Offset magnitude (MHz) to relative band limit.
    """

    rise_limit_us: float = RISE_LIMIT_US
    width_range_us: tuple[float, float] = WIDTH_RANGE_US
    fall_limit_us: float = FALL_LIMIT_US
    peak_power_w: float | None = 100.0
    prf_hz: float = DEFAULT_PRF_HZ
    limits_dbm: dict = field(default_factory=lambda: dict(LIMITS_DBM))
    limits_dbc: dict = field(default_factory=lambda: dict(LIMITS_DBC))

    @property
    def absolute(self) -> bool:
        return self.peak_power_w is not None

    def spectrum_limits(self) -> dict:
        return self.limits_dbm if self.absolute else self.limits_dbc


@dataclass(frozen=True)
class Verdict:
    """Pass/fail with signed margin; positive margin means headroom."""

    passed: bool
    margin: float

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "margin", float(self.margin))

    def to_dict(self) -> dict:
        return {"passed": self.passed, "margin": self.margin}


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    """Everything measured on one transmitted pulse."""

    shape: ShapeParameters
    rms_error: float
    spectrum: SpectrumReport
    compliance: dict[str, Verdict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "shape": self.shape.to_dict(),
            "rms_error": self.rms_error,
            "spectrum": self.spectrum.to_dict(),
            "compliance": {k: v.to_dict() for k, v in self.compliance.items()},
        }


def _spectrum_rule_name(offset: float) -> str:
    return f"spectrum_pm{offset:g}MHz"


def check_compliance(report: EvaluationReport, rules: ComplianceRules = ComplianceRules()):
    """Shape and spectrum verdicts computed only from the report numbers.

    Returns:
        Mapping of rule name to :class:`Verdict`. Spectrum rules use the worst
        of the positive and negative offset.
    """
    shape = report.shape
    lo, hi = rules.width_range_us
    out = {
        "rise_time": Verdict(
            shape.rise_time_us < rules.rise_limit_us, rules.rise_limit_us - shape.rise_time_us
        ),
        "width": Verdict(
            lo <= shape.width_us <= hi, min(shape.width_us - lo, hi - shape.width_us)
        ),
        "fall_time": Verdict(
            shape.fall_time_us < rules.fall_limit_us, rules.fall_limit_us - shape.fall_time_us
        ),
    }
    spec = report.spectrum
    for offset, limit in sorted(rules.spectrum_limits().items()):
        values = [
            spec.at(o, absolute=rules.absolute)
            for o in spec.offsets_mhz
            if math.isclose(abs(o), offset)
        ]
        if not values:
            continue
        margin = limit - max(values)
        out[_spectrum_rule_name(offset)] = Verdict(margin >= 0, margin)
    return out


def evaluate(
    w: SampledWaveform,
    reference: SampledWaveform,
    rules: ComplianceRules = ComplianceRules(),
    resolution_hz: float = DEFAULT_RESOLUTION_HZ,
) -> EvaluationReport:
    """Measure ``w`` against ``reference`` and attach compliance verdicts."""
    spectrum = channel_power(
        w, prf=rules.prf_hz, peak_power_w=rules.peak_power_w, resolution_hz=resolution_hz
    )
    report = EvaluationReport(measure_shape(w), rms_error(w, reference), spectrum)
    return EvaluationReport(
        report.shape, report.rms_error, report.spectrum, check_compliance(report, rules)
    )


def save_esd_csv(spectrum: EnergySpectrum, path, max_offset_hz: float = 5e6) -> None:
    """Write ``frequency_hz,esd`` rows within ``+-max_offset_hz``."""
    keep = np.abs(spectrum.freqs_hz) <= max_offset_hz
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("frequency_hz,esd\n")
        for f, e in zip(spectrum.freqs_hz[keep].tolist(), spectrum.esd[keep].tolist()):
            fh.write(f"{f!r},{e!r}\n")
