"""Indirect learning loop: predistort, transmit, normalize, fit, copy.

Iteration ``i`` drives the plant with ``u_i = P_i(x)`` and normalizes the
output by ``G`` to ``z_i = y_i / G``. A postdistorter is then fit from
``z_i`` back to ``u_i`` and copied in as ``P_{i+1}``. Iteration 0 uses the
identity predistorter, so it measures the raw plant and supplies the
operating curve for the gain estimate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .dpd import (
    DEFAULT_MEMORY,
    DEFAULT_ORDER,
    PredistorterModel,
    Variant,
    apply_predistorter,
    solve_least_squares,
)
from .gain import (
    DEFAULT_STEP_FRAC,
    DEFAULT_WINDOW_FRAC,
    GainEstimate,
    GainMethod,
    estimate_gain,
    line_fit_rms,
)
from .plant import PlantModel, apply_plant, sorted_pairs
from .waveform import SampledWaveform

log = logging.getLogger(__name__)

GainPolicy = Literal["first_iteration_only", "every_iteration"]

DIVERGENCE_FACTOR = 10.0
# RMS values below this are treated as exact agreement.
RMS_FLOOR = 1e-12


class LearningError(RuntimeError):
    """Raised when the loop fails; carries the iteration it failed in."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


class LearningDivergence(LearningError):
    """RMS error grew past the divergence limit."""


@dataclass(frozen=True)
class LearningConfig:
    """Settings for :func:`run_inverse_learning`.

    Attributes:
        max_iterations: Upper bound on executed iterations.
        convergence_tol: Stop once ``|r_i - r_{i-1}| <= tol * r_{i-1}``.
        nonlinearity_order: K.
        memory_depth: M.
        variant: ``mp`` or ``mp_bias``.
        gain_method: ``peak`` or ``dme_region``.
        gain_policy: Estimate ``G`` once or at every iteration.
        window_frac: Window width for ``dme_region``.
        step_frac: Window step for ``dme_region``.
        rcond: Singular-value cutoff for the postdistorter fit. The regressors
            of a smooth pulse are nearly collinear, and fitting the weakest
            directions makes the loop oscillate.
        clip_negative: Clip negative predistorter output to zero before the
            plant, which only accepts envelopes.
    """

    max_iterations: int = 20
    convergence_tol: float = 1e-4
    nonlinearity_order: int = DEFAULT_ORDER
    memory_depth: int = DEFAULT_MEMORY
    variant: Variant = "mp_bias"
    gain_method: GainMethod = "dme_region"
    gain_policy: GainPolicy = "first_iteration_only"
    window_frac: float = DEFAULT_WINDOW_FRAC
    step_frac: float = DEFAULT_STEP_FRAC
    rcond: float | None = 1e-3
    clip_negative: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")
        if self.gain_policy not in ("first_iteration_only", "every_iteration"):
            raise ValueError(f"unknown gain policy {self.gain_policy!r}")


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """State of one executed iteration."""

    iteration: int
    predistorter: PredistorterModel
    rms_error: float
    gain: GainEstimate
    clipped_samples: int

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "rms_error": self.rms_error,
            "gain": self.gain.to_dict(),
            "clipped_samples": self.clipped_samples,
            "predistorter": self.predistorter.to_dict(),
        }


@dataclass(eq=False)
class LearningTrace:
    """Per-iteration history and the convergence point, if reached."""

    records: list[IterationRecord] = field(default_factory=list)
    converged_at: int | None = None

    @property
    def rms_errors(self) -> list[float]:
        return [r.rms_error for r in self.records]

    def to_dict(self) -> dict:
        return {
            "converged_at": self.converged_at,
            "records": [r.to_dict() for r in self.records],
        }


@dataclass(frozen=True, eq=False)
class IterationSignals:
    """Waveforms of one iteration, for optional dumping."""

    iteration: int
    predistorted: SampledWaveform
    output: SampledWaveform
    normalized: SampledWaveform


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(a**2)))


def run_inverse_learning(
    x: SampledWaveform,
    plant: PlantModel,
    cfg: LearningConfig = LearningConfig(),
    signals: list[IterationSignals] | None = None,
) -> tuple[PredistorterModel, LearningTrace]:
    """Train a predistorter for ``plant`` on pulse ``x``.

    Args:
        x: Desired transmitted envelope.
        plant: Transmitter model.
        cfg: Loop settings.
        signals: If given, receives the waveforms of every iteration.

    Returns:
        The predistorter of the last executed iteration and the full trace.

    Raises:
        LearningDivergence: If the RMS error exceeds ten times its iteration-0
            value.
        LearningError: If the plant, gain or fit fails; the message names the
            iteration.
    """
    K, M = cfg.nonlinearity_order, cfg.memory_depth
    model = PredistorterModel.identity(K, M, cfg.variant)
    trace = LearningTrace()
    gain: GainEstimate | None = None
    for i in range(cfg.max_iterations):
        try:
            u = apply_predistorter(model, x)
            clipped = int(np.count_nonzero(u.samples < 0))
            if clipped and cfg.clip_negative:
                u = u.with_samples(np.maximum(u.samples, 0.0))
            y = apply_plant(plant, u.with_samples(u.samples, envelope=True)).output
            if gain is None or cfg.gain_policy == "every_iteration":
                gain = estimate_gain(
                    sorted_pairs(x.samples, y.samples),
                    cfg.gain_method,
                    cfg.window_frac,
                    cfg.step_frac,
                )
        except LearningError:
            raise
        except ValueError as exc:
            raise LearningError(str(exc), i) from exc

        z = y.samples / gain.value
        rms = _rms(z - x.samples)
        trace.records.append(IterationRecord(i, model, rms, gain, clipped))
        if signals is not None:
            signals.append(IterationSignals(i, u, y, y.with_samples(z)))
        log.debug("iteration %d: rms %.6g, G %.6g, clipped %d", i, rms, gain.value, clipped)

        r0 = trace.records[0].rms_error
        if i > 0 and rms > DIVERGENCE_FACTOR * max(r0, RMS_FLOOR):
            raise LearningDivergence(
                f"rms error {rms:.4g} exceeds {DIVERGENCE_FACTOR:g}x the initial {r0:.4g}", i
            )
        if i > 0:
            prev = trace.records[i - 1].rms_error
            if abs(rms - prev) <= cfg.convergence_tol * prev or max(rms, prev) <= RMS_FLOOR:
                trace.converged_at = i
                break
        try:
            model = solve_least_squares(
                z, u.samples, K, M, cfg.variant, cfg.rcond, anchor=model
            )
        except ValueError as exc:
            raise LearningError(str(exc), i) from exc
    return trace.records[-1].predistorter, trace


def linearity_check(
    x: SampledWaveform, plant: PlantModel, model: PredistorterModel, gain: float
) -> np.ndarray:
    """Operating curve ``(x, y/G)`` after predistortion, sorted by x."""
    u = apply_predistorter(model, x)
    u = u.with_samples(np.maximum(u.samples, 0.0), envelope=True)
    y = apply_plant(plant, u).output
    return sorted_pairs(x.samples, y.samples / gain)


def curve_residual(points) -> float:
    """Line-fit RMS residual of an operating curve."""
    pts = np.asarray(points, dtype=float)
    return line_fit_rms(pts[:, 0], pts[:, 1])
