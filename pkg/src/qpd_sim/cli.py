"""``qpd-sim`` command line.

    qpd-sim <subcommand> [--config FILE] [--seed N] --out DIR [--threads N]

Each run writes ``config.ini`` (the resolved configuration), ``seed.txt``,
``report.json`` and the CSV data of the subcommand into DIR. Exit codes:
0 success, 2 configuration error, 3 numerical or fit failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from qpd_sim import calib, cliffords, parity, spectral
from qpd_sim.config import ConfigError, RunConfig, default_config, load_config
from qpd_sim.qdyn import IntegrationError

logger = logging.getLogger("qpd_sim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

NUMERIC_ERRORS = (IntegrationError, spectral.FitError, calib.CalibrationError, cliffords.ChannelError,
                  FloatingPointError, np.linalg.LinAlgError)


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


class Run:
    def __init__(self, cfg: RunConfig, out: Path, threads: int):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.report = {}

    def write(self, name: str, text: str) -> None:
        (self.out / name).write_text(text)

    def finish(self) -> None:
        self.write("report.json", json.dumps(_clean(self.report), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_mapping_sim(run: Run) -> None:
    cfg = run.cfg
    params = cfg.transmon()
    m = cfg["mapping"]
    nominal = cfg.gate()
    gate = cfg.gate(amplitude=0.0) if m["force_delta_zero"] else nominal
    res = calib.simulate_mapping(params, gate, cfg.microwave(), m["decoherence"], cfg["pulses"]["dt_ns"],
                                 m["dephasing"], target_gate=nominal)
    run.write("bloch_checkpoints.csv", res.checkpoints_csv())
    run.report.update({
        "fidelity_even": res.fidelity[calib.PARITIES[0]],
        "fidelity_odd": res.fidelity[calib.PARITIES[1]],
        "average_mapping_fidelity": res.average,
        "target_even": res.targets[calib.PARITIES[0]],
        "target_odd": res.targets[calib.PARITIES[1]],
    })


def _channel_model(cfg: RunConfig):
    r = cfg["rb"]
    params = cfg.transmon()
    kind = r["channel"]
    if kind == "ideal":
        return cliffords.IdealChannels()
    if kind == "depolarizing":
        return cliffords.DepolarizingChannels(r["depolarizing_p"])
    if kind == "analytic":
        slot = cfg.microwave().span
        gate = cfg.gate()
        pz = calib.pseudo_z_channels(params, gate.flat_top, gate.amplitude, gate.sigma, mw=cfg.microwave())
        return cliffords.PhysicalGateChannels.analytic(slot * 1e-3, params.t1, params.t2_echo, {"pseudo-Z": pz})
    return cliffords.PhysicalGateChannels.lindblad(params, cfg.microwave(), cfg.gate(),
                                                   dt=cfg["pulses"]["dt_ns"])


def _rb(run: Run, model, interleaved):
    r = run.cfg["rb"]
    conf = cliffords.RbConfig(r["depths"], r["n_sequences"], run.cfg.seed, interleaved, r["shots"] or None)
    res = cliffords.run_rb(conf, model, run.threads)
    if not res.fit.converged:
        raise spectral.FitError(f"decay fit did not converge (residual {res.fit.residual_norm:.3g})")
    return res


def cmd_rb(run: Run) -> None:
    model = _channel_model(run.cfg)
    res = _rb(run, model, None)
    run.write("rb_reference.csv", res.to_csv())
    run.report.update({"reference": res.fit.report(), "average_gate_fidelity": cliffords.rb_fidelity(res.fit.decay)})


def cmd_irb(run: Run) -> None:
    model = _channel_model(run.cfg)
    ref = _rb(run, model, None)
    run.write("rb_reference.csv", ref.to_csv())
    run.report["reference"] = ref.fit.report()
    run.report["average_gate_fidelity"] = cliffords.rb_fidelity(ref.fit.decay)
    gates = {}
    for name in run.cfg["rb"]["interleaved"]:
        res = _rb(run, model, name)
        run.write(f"irb_{name.replace('/', '_')}.csv", res.to_csv())
        gates[name] = {"fit": res.fit.report(), "fidelity": cliffords.irb_fidelity(res.fit.decay, ref.fit.decay)}
    run.report["interleaved"] = gates


def _measured_trace(cfg: RunConfig) -> parity.ParityTrace:
    t = cfg["tunneling"]
    n = int(round(t["duration_s"] * 1e6 / t["dt_us"]))
    ideal = parity.generate_ideal_segmented(parity.TunnelingModel.from_tau(t["tau_ms"]), t["dt_us"], n, cfg.seed)
    return parity.measure_trace(ideal, cfg.fidelity(), cliffords.sequence_rng(cfg.seed, 2))


def cmd_trace(run: Run) -> None:
    tr = _measured_trace(run.cfg)
    name = "trace." + run.cfg["tunneling"]["trace_format"]
    parity.write_trace(tr, run.out / name, seed=run.cfg.seed)
    run.report.update({"trace_file": name, "n_samples": tr.n, "dt_us": tr.dt,
                       "mean": float(tr.samples.mean())})


def cmd_psd(run: Run) -> None:
    cfg = run.cfg
    s = cfg["psd"]
    if s["trace_file"]:
        try:
            tr, _ = parity.read_trace(s["trace_file"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"[psd] trace_file: {exc}") from exc
    else:
        tr = _measured_trace(cfg)
    psd = spectral.periodogram(tr, s["segment_len"], s["overlap"])
    run.write("psd.csv", psd.to_csv())
    fit = spectral.fit_lorentzian(psd, cfg.fidelity())
    run.report.update(fit.report())
    run.report["f_eff_calculated"] = cfg.fidelity().f_eff


def _grid(lo, hi, step):
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def cmd_calibrate(run: Run, which: str) -> None:
    cfg = run.cfg
    c = cfg["calibrate"]
    params = cfg.transmon()
    p = cfg["pulses"]
    if which == "degeneracy":
        grid = np.linspace(c["voltage_min"], c["voltage_max"], c["voltage_points"])
        res = calib.find_degeneracy(params, grid, c["monitor_delay_ns"], p["volts_per_2e"],
                                    method=c["method"], threads=run.threads)
        run.write("degeneracy_sweep.csv", res.to_csv())
        run.report.update({"maxima_volts": res.located, "maxima_ng": res.extra["maxima_ng"]})
    elif which == "duration":
        grid = _grid(c["duration_min_ns"], c["duration_max_ns"], c["duration_step_ns"])
        res = calib.calibrate_duration(params, grid, cfg.gate_amplitude(), p["gate_sigma_ns"], c["method"],
                                       cfg.microwave(), run.threads)
        run.write("duration_sweep.csv", res.to_csv())
        run.report.update({"crossings_ns": res.located, "crossing_ns": res.located[0]})
    elif which == "irb-duration":
        grid = _grid(c["irb_duration_min_ns"], c["irb_duration_max_ns"], c["irb_duration_step_ns"])
        res = calib.optimize_duration_irb(params, grid, c["irb_depth"], cfg["rb"]["n_sequences"], cfg.seed,
                                          cfg.gate_amplitude(), p["gate_sigma_ns"], method=c["method"],
                                          threads=run.threads)
        run.write("irb_duration_sweep.csv", res.to_csv())
        run.report.update({"optimum_ns": res.located[0], "depth": c["irb_depth"]})
    elif which == "ramsey-vs-echo":
        sigma = None if c["detuning_sigma_khz"] < 0 else c["detuning_sigma_khz"] * 1e-6
        noise = calib.QuasiStaticNoise(c["quasi_static_noise"], sigma)
        t = cfg["tunneling"]
        rows = []
        for i in range(c["comparison_runs"]):
            tc = calib.TraceConfig(t["tau_ms"], t["dt_us"], t["duration_s"], cfg.fidelity(),
                                   cfg["psd"]["segment_len"], cfg.seed + i)
            out = calib.compare_ramsey_echo(params, noise, tc, cfg.gate(), cfg.microwave())
            rows.append(out.report())
        lines = ["run,seed,f_eff_ramsey,f_eff_echo"]
        lines += [f"{i},{cfg.seed + i},{r['f_eff_ramsey']:.12g},{r['f_eff_echo']:.12g}" for i, r in enumerate(rows)]
        run.write("ramsey_vs_echo.csv", "\n".join(lines) + "\n")
        run.report.update({
            "runs": rows,
            "echo_wins": sum(r["f_eff_echo"] > r["f_eff_ramsey"] for r in rows),
            "mean_f_eff_ramsey": float(np.mean([r["f_eff_ramsey"] for r in rows])),
            "mean_f_eff_echo": float(np.mean([r["f_eff_echo"] for r in rows])),
        })
    else:  # argparse restricts the choices
        raise ConfigError(f"unknown calibration {which!r}")
    run.report["calibration"] = which


COMMANDS = {
    "mapping-sim": cmd_mapping_sim,
    "rb": cmd_rb,
    "irb": cmd_irb,
    "trace": cmd_trace,
    "psd": cmd_psd,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qpd-sim", description="Charge-parity detection simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI file (default: built-in paper-device profile)")
        p.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("-v", "--verbose", action="store_true")

    for name in COMMANDS:
        common(sub.add_parser(name))
    cal = sub.add_parser("calibrate")
    cal.add_argument("which", choices=["degeneracy", "duration", "irb-duration", "ramsey-vs-echo"])
    common(cal)
    dump = sub.add_parser("default-config", help="print the paper-device profile")
    dump.add_argument("--out", help="write to this file instead of stdout")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "default-config":
        text = default_config().to_ini()
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else default_config()
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed: must be an unsigned 64-bit integer")
            cfg = cfg.with_seed(args.seed)
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run = Run(cfg, out, args.threads)
    run.write("config.ini", cfg.to_ini())
    run.write("seed.txt", f"{cfg.seed}\n")
    run.report["command"] = args.command
    try:
        if args.command == "calibrate":
            cmd_calibrate(run, args.which)
        else:
            COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        run.report["error"] = f"{type(exc).__name__}: {exc}"
        run.finish()
        return EXIT_NUMERIC
    run.finish()
    print(json.dumps(_clean(run.report), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
