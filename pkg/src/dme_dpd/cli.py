"""Command-line front end: ``generate``, ``dpd-run``, ``multipath``, ``report``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .dpd import ModelError, PredistorterModel
from .experiment import RECOMMENDED, combination_name, multipath_curves, run_dpd, transmit
from .metrics import (
    ComplianceRules,
    EvaluationReport,
    ShapeParameters,
    SpectrumReport,
    check_compliance,
)
from .waveform import WaveformError, generate_pulse, save_waveform

log = logging.getLogger("dme_dpd")

RUN_RECORD = "run_record.json"
TIMINGS = "timings.json"
MULTIPATH_SUMMARY = "multipath_summary.json"


class CliError(RuntimeError):
    """Fatal condition reported to the user with a nonzero exit."""


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def _output_dir(cfg: RunConfig, override: str | None) -> Path:
    out = Path(override or cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise CliError(f"output directory {out} is not writable")
    return out


def _model_path(out: Path, gain_method: str, variant: str) -> Path:
    return out / "models" / f"{gain_method}_{variant}.json"


def cmd_generate(cfg: RunConfig, out: Path) -> int:
    rate, duration = cfg.sampling.sample_rate_hz, cfg.sampling.duration_s
    pulses = {
        "gaussian.csv": generate_pulse(cfg.gaussian_spec(), rate, duration),
        f"{cfg.pulse.kind}.csv": generate_pulse(cfg.pulse_spec(), rate, duration),
    }
    for name, w in pulses.items():
        save_waveform(w, out / name)
        print(out / name)
    return 0


def cmd_dpd_run(cfg: RunConfig, out: Path, dump_waveforms: bool = False) -> int:
    run = run_dpd(cfg, keep_signals=dump_waveforms)
    (out / "models").mkdir(exist_ok=True)
    for r in run.results:
        if r.error is not None:
            continue
        _write_json(_model_path(out, r.gain_method, r.variant), r.model.to_dict())
        save_waveform(r.transmitted, out / f"transmitted_{r.gain_method}_{r.variant}.csv")
        if dump_waveforms:
            wdir = out / "iterations" / f"{r.gain_method}_{r.variant}"
            wdir.mkdir(parents=True, exist_ok=True)
            for sig in r.signals:
                save_waveform(sig.predistorted, wdir / f"iter{sig.iteration:02d}_u.csv")
                save_waveform(sig.output, wdir / f"iter{sig.iteration:02d}_y.csv")
    for name, curve in run.multipath.items():
        curve.save_csv(out / f"multipath_{name}.csv")
    _write_json(out / RUN_RECORD, run.record())
    _write_json(out / TIMINGS, run.timings)
    print(format_table(run.record()))
    if run.failures:
        for name in run.failures:
            print(f"stage failed: {name}", file=sys.stderr)
        return 1
    return 0


def cmd_multipath(
    cfg: RunConfig, out: Path, model_path: str | None, transmitted: bool = True
) -> int:
    tx = None
    if transmitted:
        path = Path(model_path) if model_path else _model_path(out, *RECOMMENDED)
        if not path.is_file():
            raise CliError(
                f"no trained model at {path}; run dpd-run first or pass --model"
            )
        try:
            model = PredistorterModel.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, ModelError) as exc:
            raise CliError(f"cannot read model {path}: {exc}") from exc
        rate, duration = cfg.sampling.sample_rate_hz, cfg.sampling.duration_s
        x = generate_pulse(cfg.pulse_spec(), rate, duration)
        tx = transmit(model, x, cfg.plant_model())
    curves = multipath_curves(cfg, tx)
    summary = {name: {"rms_m": c.rms_m, "points": int(c.delays_s.size)} for name, c in curves.items()}
    for name, curve in curves.items():
        curve.save_csv(out / f"multipath_{name}.csv")
    _write_json(out / MULTIPATH_SUMMARY, summary)
    for name, s in summary.items():
        print(f"{name:12s} rms {s['rms_m']:8.3f} m over {s['points']} delays")
    return 0


def _report_from_dict(data: dict) -> EvaluationReport:
    spec = data["spectrum"]
    return EvaluationReport(
        ShapeParameters(**data["shape"]),
        data["rms_error"],
        SpectrumReport(
            tuple(spec["offsets_mhz"]),
            tuple(spec["band_power_dbc"]),
            None if spec["absolute_dbm"] is None else tuple(spec["absolute_dbm"]),
            spec["band_mhz"],
            spec["prf_hz"],
        ),
    )


def reverify(record: dict) -> list[str]:
    """Recompute every stored verdict from stored numbers; return mismatches."""
    cfg = RunConfig.model_validate(record["config"])
    rules: ComplianceRules = cfg.compliance_rules()
    rows = [("baseline", record["baseline"])]
    rows += [
        (combination_name(c["gain_method"], c["variant"]), c["evaluation"])
        for c in record["combinations"]
        if c["status"] == "ok"
    ]
    problems = []
    for name, ev in rows:
        fresh = check_compliance(_report_from_dict(ev), rules)
        for rule, verdict in fresh.items():
            stored = ev["compliance"].get(rule)
            if stored is None or stored["passed"] != verdict.passed or stored["margin"] != verdict.margin:
                problems.append(f"{name}: {rule}")
    return problems


def format_table(record: dict) -> str:
    """Plain-text summary: RMS error, shape and band powers per row."""
    absolute = record["config"]["metrics"]["peak_power_w"] is not None
    unit = "dBm" if absolute else "dBc"
    key = "absolute_dbm" if absolute else "band_power_dbc"
    head = (
        f"{'case':22s} {'rms':>8s} {'rise':>6s} {'width':>6s} {'fall':>6s} "
        + " ".join(f"{o:>+7.1f}" for o in record["baseline"]["spectrum"]["offsets_mhz"])
        + f"  [{unit}]"
    )
    lines = [head]

    def row(name, ev):
        s = ev["shape"]
        powers = " ".join(f"{p:7.2f}" for p in ev["spectrum"][key])
        return (
            f"{name:22s} {ev['rms_error']:8.5f} {s['rise_time_us']:6.3f} "
            f"{s['width_us']:6.3f} {s['fall_time_us']:6.3f} {powers}"
        )

    lines.append(row("no DPD", record["baseline"]))
    for c in record["combinations"]:
        name = combination_name(c["gain_method"], c["variant"])
        if c["status"] == "ok":
            lines.append(row(name, c["evaluation"]))
        else:
            lines.append(f"{name:22s} FAILED: {c['error']}")
    for name, curve in record["multipath"].items():
        lines.append(f"multipath {name:12s} rms {curve['rms_m']:.3f} m")
    best = record["summary"]["best_pm2MHz"]
    lines.append(f"best +-2 MHz margin: {best}")
    return "\n".join(lines)


def cmd_report(path: Path) -> int:
    if path.is_dir():
        path = path / RUN_RECORD
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read run record {path}: {exc}") from exc
    print(format_table(record))
    problems = reverify(record)
    if problems:
        for p in problems:
            print(f"verdict mismatch: {p}", file=sys.stderr)
        return 1
    print("all stored verdicts reproduce from stored numbers")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dme-dpd", description="Predistortion experiments for pulsed DME transmitters."
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--output", help="output directory (overrides output_dir)")
    common.add_argument("--preset", choices=["reference_plant"], help="plant preset")
    common.add_argument("--seed", type=int, help="seed for plant noise")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write pulse CSV files")
    p_run = sub.add_parser("dpd-run", parents=[common], help="train and evaluate predistorters")
    p_run.add_argument(
        "--dump-waveforms", action="store_true", help="write per-iteration waveforms as CSV"
    )
    p_mp = sub.add_parser("multipath", parents=[common], help="multipath range-error curves")
    p_mp.add_argument("--model", help="trained model JSON for the transmitted pulse")
    p_mp.add_argument(
        "--no-transmitted", action="store_true", help="skip the transmitted pulse"
    )
    p_rep = sub.add_parser("report", help="print and re-verify a run record")
    p_rep.add_argument("record", help="run_record.json or the directory holding it")
    return parser


def _setup_logging() -> None:
    level = os.environ.get("DME_DPD_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(Path(args.record))
        cfg = load_config(args.config, plant=args.preset, seed=args.seed)
        out = _output_dir(cfg, args.output)
        if args.command == "generate":
            return cmd_generate(cfg, out)
        if args.command == "dpd-run":
            return cmd_dpd_run(cfg, out, args.dump_waveforms)
        return cmd_multipath(cfg, out, args.model, not args.no_transmitted)
    except (CliError, ConfigError, WaveformError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
