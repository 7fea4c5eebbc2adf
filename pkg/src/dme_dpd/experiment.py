"""End-to-end experiment stages shared by the CLI and the acceptance suite."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import RunConfig
from .dpd import PredistorterModel, apply_predistorter
from .gain import gain_dme, gain_peak
from .learning import (
    IterationSignals,
    LearningError,
    curve_residual,
    linearity_check,
    run_inverse_learning,
)
from .metrics import EvaluationReport, evaluate
from .multipath import RangeErrorCurve, range_error_curve
from .plant import PlantModel, apply_plant
from .waveform import SampledWaveform, generate_pulse, peak_normalize

log = logging.getLogger(__name__)

RECOMMENDED = ("dme_region", "mp_bias")


def combination_name(gain_method: str, variant: str) -> str:
    return f"{gain_method}+{variant}"


def transmit(model: PredistorterModel, x: SampledWaveform, plant: PlantModel) -> SampledWaveform:
    """Plant output for pulse ``x`` through ``model``, negatives clipped first."""
    u = apply_predistorter(model, x)
    u = u.with_samples(np.maximum(u.samples, 0.0), envelope=True)
    return apply_plant(plant, u).output


@dataclass(eq=False)
class CombinationResult:
    gain_method: str
    variant: str
    model: PredistorterModel | None = None
    trace: object = None
    transmitted: SampledWaveform | None = None
    evaluation: EvaluationReport | None = None
    linearization: dict | None = None
    signals: list[IterationSignals] = field(default_factory=list)
    error: str | None = None
    seconds: float = 0.0

    @property
    def name(self) -> str:
        return combination_name(self.gain_method, self.variant)

    def to_dict(self) -> dict:
        out = {"gain_method": self.gain_method, "variant": self.variant}
        if self.error is not None:
            out.update(status="failed", error=self.error)
            return out
        out.update(
            status="ok",
            converged_at=self.trace.converged_at,
            final_rms_error=self.trace.rms_errors[-1],
            model=self.model.to_dict(),
            evaluation=self.evaluation.to_dict(),
            linearization=self.linearization,
            trace=self.trace.to_dict(),
        )
        return out


def run_combination(
    cfg: RunConfig,
    x: SampledWaveform,
    plant: PlantModel,
    gain_method: str,
    variant: str,
    keep_signals: bool = False,
) -> CombinationResult:
    """Train and evaluate one gain-method/model-variant pair; never raises."""
    res = CombinationResult(gain_method, variant)
    start = time.perf_counter()
    try:
        signals = [] if keep_signals else None
        model, trace = run_inverse_learning(
            x, plant, cfg.learning_config(gain_method, variant), signals
        )
        res.model, res.trace = model, trace
        res.signals = signals or []
        res.transmitted = transmit(model, x, plant)
        res.evaluation = evaluate(
            res.transmitted, x, cfg.compliance_rules(), cfg.metrics.resolution_hz
        )
        gain = trace.records[0].gain.value
        identity = PredistorterModel.identity(
            model.nonlinearity_order, model.memory_depth, variant
        )
        pre = curve_residual(linearity_check(x, plant, identity, gain))
        post = curve_residual(linearity_check(x, plant, model, gain))
        res.linearization = {"pre_residual": pre, "post_residual": post, "ratio": post / pre}
    except (LearningError, ValueError) as exc:
        res.error = f"{type(exc).__name__}: {exc}"
        log.error("%s failed: %s", res.name, res.error)
    res.seconds = time.perf_counter() - start
    return res


@dataclass(eq=False)
class DpdRun:
    """In-memory results of a full ``dpd-run``."""

    config: RunConfig
    pulse: SampledWaveform
    baseline_output: SampledWaveform
    baseline: EvaluationReport
    gains: dict
    results: list[CombinationResult]
    multipath: dict[str, RangeErrorCurve]
    timings: dict

    def result(self, gain_method: str, variant: str) -> CombinationResult:
        for r in self.results:
            if (r.gain_method, r.variant) == (gain_method, variant):
                return r
        raise KeyError(combination_name(gain_method, variant))

    @property
    def failures(self) -> list[str]:
        return [r.name for r in self.results if r.error is not None]

    def spectral_ranking(self) -> list[tuple[str, float]]:
        """Successful combinations ordered by worst +-2 MHz margin, best first."""
        rows = [
            (r.name, r.evaluation.compliance["spectrum_pm2MHz"].margin)
            for r in self.results
            if r.error is None
        ]
        return sorted(rows, key=lambda row: -row[1])

    def record(self) -> dict:
        """Deterministic RunRecord; wall-clock timings are kept separately."""
        ranking = self.spectral_ranking()
        return {
            "tool": {"name": "dme_dpd", "version": __version__},
            "config": self.config.snapshot(),
            "gain_estimates": {k: v.to_dict() for k, v in self.gains.items()},
            "baseline": self.baseline.to_dict(),
            "combinations": [r.to_dict() for r in self.results],
            "multipath": {k: v.to_dict() for k, v in self.multipath.items()},
            "summary": {
                "failed": self.failures,
                "spectral_ranking_pm2MHz": [
                    {"combination": name, "margin_db": m} for name, m in ranking
                ],
                "best_pm2MHz": ranking[0][0] if ranking else None,
            },
        }


def multipath_curves(
    cfg: RunConfig, transmitted: SampledWaveform | None
) -> dict[str, RangeErrorCurve]:
    """Range-error curves for the Gaussian, the target pulse and, if given, the transmitted pulse."""
    scenario = cfg.scenario()
    rate, duration = cfg.sampling.sample_rate_hz, cfg.sampling.duration_s
    pulses = {
        "gaussian": generate_pulse(cfg.gaussian_spec(), rate, duration),
        "sfol": generate_pulse(cfg.pulse_spec(), rate, duration),
    }
    if transmitted is not None:
        pulses["transmitted"] = peak_normalize(transmitted)
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        curves = list(pool.map(lambda w: range_error_curve(w, scenario), pulses.values()))
    return dict(zip(pulses, curves))


def run_dpd(cfg: RunConfig, keep_signals: bool = False) -> DpdRun:
    """Baseline, every configured combination, and multipath curves."""
    t_start = time.perf_counter()
    rate, duration = cfg.sampling.sample_rate_hz, cfg.sampling.duration_s
    x = generate_pulse(cfg.pulse_spec(), rate, duration)
    plant = cfg.plant_model()
    rules = cfg.compliance_rules()

    y0 = apply_plant(plant, x).output
    baseline = evaluate(y0, x, rules, cfg.metrics.resolution_hz)
    points = np.column_stack([x.samples, y0.samples])
    gains = {
        "peak": gain_peak(points),
        "dme_region": gain_dme(points, cfg.learning.window_frac, cfg.learning.step_frac),
    }

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        futures = [
            pool.submit(run_combination, cfg, x, plant, g, v, keep_signals)
            for g, v in cfg.combinations
        ]
        results = [f.result() for f in futures]

    transmitted = None
    for r in results:
        if (r.gain_method, r.variant) == RECOMMENDED and r.error is None:
            transmitted = r.transmitted
    t_mp = time.perf_counter()
    curves = multipath_curves(cfg, transmitted)
    timings = {r.name: r.seconds for r in results}
    timings["multipath"] = time.perf_counter() - t_mp
    timings["total"] = time.perf_counter() - t_start
    return DpdRun(cfg, x, y0, baseline, gains, results, curves, timings)
