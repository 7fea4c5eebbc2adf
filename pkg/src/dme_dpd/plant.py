"""Simulated DME transmit chain: a static expansive-saturating curve plus a short FIR.

The static curve ``g(x) = linear_gain * x**p / (1 + (x/s)**q)**(p/q)`` is
convex near zero when ``p > 1`` and saturates towards ``linear_gain * s**p``
for large inputs. The FIR that follows models memory in the pulse-shaping
circuits and amplifier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .waveform import SampledWaveform

SATURATION_SHARPNESS = 4.0

# Pinned preset used by every acceptance check. Milder expansion than p = 1.6
# keeps the plant inside what an order-2 memory polynomial can invert.
REFERENCE_PLANT = {
    "linear_gain": 1.0,
    "expansion_exponent": 1.14,
    "saturation_level": 2.0,
    "fir_taps": (0.6, 0.3, 0.1),
    "noise_std": 0.0,
    "seed": 0,
}


class PlantError(ValueError):
    """Raised for invalid plant parameters or plant inputs."""


@dataclass(frozen=True)
class PlantModel:
    """Hammerstein transmitter surrogate.

    Attributes:
        linear_gain: Scale of the static curve, > 0.
        expansion_exponent: Small-signal exponent ``p`` >= 1.
        saturation_level: Input level ``s`` where compression sets in. ``inf``
            disables saturation.
        fir_taps: Memory filter taps. Must sum to 1.
        noise_std: Relative std of multiplicative Gaussian output noise.
        seed: Seed for the noise generator.
    """

    linear_gain: float = 1.0
    expansion_exponent: float = 1.0
    saturation_level: float = math.inf
    fir_taps: tuple[float, ...] = (1.0,)
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        taps = tuple(float(t) for t in self.fir_taps)
        object.__setattr__(self, "fir_taps", taps)
        if not self.linear_gain > 0:
            raise PlantError("linear_gain must be positive")
        if not self.expansion_exponent >= 1:
            raise PlantError("expansion_exponent must be >= 1")
        if not self.saturation_level > 0:
            raise PlantError("saturation_level must be positive")
        if not taps:
            raise PlantError("fir_taps must be nonempty")
        if abs(math.fsum(taps) - 1.0) > 1e-12:
            raise PlantError(f"fir_taps must sum to 1, got {math.fsum(taps)!r}")
        if self.noise_std < 0:
            raise PlantError("noise_std must be nonnegative")

    @classmethod
    def reference(cls) -> PlantModel:
        """The pinned ``reference_plant`` preset."""
        return cls(**REFERENCE_PLANT)

    def static_curve(self, x) -> np.ndarray:
        """Memoryless nonlinearity ``g`` evaluated elementwise."""
        x = np.asarray(x, dtype=float)
        p = self.expansion_exponent
        q = SATURATION_SHARPNESS
        out = self.linear_gain * x**p
        if math.isfinite(self.saturation_level):
            out = out / (1.0 + (x / self.saturation_level) ** q) ** (p / q)
        return out

    def to_dict(self) -> dict:
        return {
            "linear_gain": self.linear_gain,
            "expansion_exponent": self.expansion_exponent,
            "saturation_level": (
                self.saturation_level if math.isfinite(self.saturation_level) else None
            ),
            "fir_taps": list(self.fir_taps),
            "noise_std": self.noise_std,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class PlantResponse:
    """Plant input, output, and their paired magnitudes sorted by input."""

    input: SampledWaveform
    output: SampledWaveform

    @property
    def pairs(self) -> np.ndarray:
        """``(n, 2)`` array of ``(x_i, y_i)`` sorted by x, then y."""
        return sorted_pairs(self.input.samples, self.output.samples)


def sorted_pairs(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.lexsort((y, x))
    return np.column_stack([x[order], y[order]])


def apply_plant(model: PlantModel, u: SampledWaveform) -> PlantResponse:
    """Drive the plant with envelope ``u``.

    Raises:
        PlantError: If ``u`` has negative samples.
    """
    x = u.samples
    if np.any(x < 0):
        idx = int(np.argmax(x < 0))
        raise PlantError(f"plant input sample {idx} is negative ({x[idx]!r})")
    y = np.convolve(model.static_curve(x), model.fir_taps)[: x.size]
    if model.noise_std > 0:
        rng = np.random.default_rng(model.seed)
        y = y * (1.0 + model.noise_std * rng.standard_normal(x.size))
    # Noise or negative taps can dip below zero; the output is an envelope.
    y = np.maximum(y, 0.0)
    return PlantResponse(u, u.with_samples(y, envelope=True))


def measure_operating_curve(model: PlantModel, probe: SampledWaveform) -> np.ndarray:
    """Paired instantaneous magnitudes ``(probe(n), response(n))`` sorted by x."""
    return apply_plant(model, probe).pairs
