"""INI run configuration with a built-in ``paper-device`` profile.

Every key has a type and a default; unknown sections or keys are rejected,
and values are checked against the module preconditions before any run.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass
from typing import Any

from qpd_sim import pulses
from qpd_sim.cliffords import NAMED_CLIFFORDS
from qpd_sim.parity import FidelityModel
from qpd_sim.qdyn import TransmonParams


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s: str) -> tuple:
    return tuple(int(x) for x in s.replace(",", " ").split())



def _names(s: str) -> tuple:
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# section -> key -> (parser, default)
SCHEMA: dict = {
    "run": {
        "profile": (str, "paper-device"),
        "seed": (int, 0),
    },
    "device": {
        "f01_ghz": (float, 3.51589),
        "eta_ghz": (float, 0.33),
        "eps10_mhz": (float, 1.192),
        "eps10_sign": (int, -1),
        "t1_us": (float, 80.0),
        "t2_echo_us": (float, 47.0),
        "t2_ramsey_us": (float, 8.7),
        "levels": (int, 3),
    },
    "pulses": {
        "mw_duration_ns": (float, 20.0),
        "mw_buffer_ns": (float, 5.0),
        "drag": (float, 0.5),
        "gate_volts": (float, pulses.DEFAULT_GATE_VOLTS),
        "volts_per_2e": (float, pulses.DEFAULT_VOLTS_PER_2E),
        "gate_duration_ns": (float, 217.0),
        "gate_sigma_ns": (float, 5.0),
        "ng0": (float, pulses.NG_DEGENERACY),
        "dt_ns": (float, 0.01),
    },
    "mapping": {
        "decoherence": (_bool, True),
        "force_delta_zero": (_bool, False),
        "dephasing": (str, "echo"),
    },
    "rb": {
        "depths": (_ints, (1, 5, 10, 20, 40, 60, 80, 100, 150, 200)),
        "n_sequences": (int, 30),
        "channel": (str, "lindblad"),
        "depolarizing_p": (float, 0.9992),
        "interleaved": (_names, ("X/2", "Y/2", "pseudo-Z")),
        "shots": (int, 0),
    },
    "tunneling": {
        "tau_ms": (float, 30.2),
        "dt_us": (float, 4.0),
        "duration_s": (float, 30.0),
        "f_g": (float, 0.995),
        "f_e": (float, 0.951),
        "f_m": (float, 0.9937),
        "trace_format": (str, "csv"),
    },
    "psd": {
        "segment_len": (int, 1 << 16),
        "overlap": (float, 0.5),
        "trace_file": (str, ""),
    },
    "calibrate": {
        "voltage_min": (float, 0.0),
        "voltage_max": (float, 3.35),
        "voltage_points": (int, 101),
        "monitor_delay_ns": (float, 800.0),
        "duration_min_ns": (float, 195.0),
        "duration_max_ns": (float, 235.0),
        "duration_step_ns": (float, 1.0),
        "irb_duration_min_ns": (float, 205.0),
        "irb_duration_max_ns": (float, 231.0),
        "irb_duration_step_ns": (float, 2.0),
        "irb_depth": (int, 50),
        "method": (str, "ideal"),
        "quasi_static_noise": (_bool, True),
        "detuning_sigma_khz": (float, -1.0),
        "comparison_runs": (int, 1),
    },
}


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, section):
        return self.values[section]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    def with_seed(self, seed: int) -> "RunConfig":
        vals = {s: dict(v) for s, v in self.values.items()}
        vals["run"]["seed"] = int(seed)
        cfg = RunConfig(vals)
        cfg.validate()
        return cfg

    # -- derived objects -------------------------------------------------

    def transmon(self) -> TransmonParams:
        d = self["device"]
        return TransmonParams(
            f01=d["f01_ghz"], eta=d["eta_ghz"], eps10=d["eps10_mhz"], eps10_sign=d["eps10_sign"],
            t1=d["t1_us"], t2_echo=d["t2_echo_us"], t2_ramsey=d["t2_ramsey_us"], levels=d["levels"],
        )

    def microwave(self) -> pulses.MicrowavePulse:
        p = self["pulses"]
        return pulses.MicrowavePulse(duration=p["mw_duration_ns"], buffer=p["mw_buffer_ns"],
                                     drag_coefficient=p["drag"], eta=self["device"]["eta_ghz"])

    def gate_amplitude(self) -> float:
        p = self["pulses"]
        return float(pulses.volts_to_charge(p["gate_volts"], p["volts_per_2e"]))

    def gate(self, flat_top=None, amplitude=None) -> pulses.GatePulseNetZero:
        p = self["pulses"]
        return pulses.GatePulseNetZero.build(
            self.gate_amplitude() if amplitude is None else amplitude,
            p["gate_duration_ns"] if flat_top is None else flat_top, p["gate_sigma_ns"], p["ng0"],
        )

    def fidelity(self) -> FidelityModel:
        t = self["tunneling"]
        return FidelityModel(t["f_g"], t["f_e"], t["f_m"])

    # -- validation ------------------------------------------------------

    def validate(self) -> None:
        def need(cond, field, msg):
            if not cond:
                raise ConfigError(f"{field}: {msg}")

        try:
            self.transmon()
        except ValueError as exc:
            raise ConfigError(f"[device]: {exc}") from exc
        p = self["pulses"]
        for k in ("mw_duration_ns", "gate_duration_ns", "gate_sigma_ns", "dt_ns", "volts_per_2e"):
            need(p[k] > 0, f"[pulses] {k}", "must be positive")
        need(p["mw_buffer_ns"] >= 0, "[pulses] mw_buffer_ns", "must be non-negative")
        need(p["dt_ns"] <= 1.0, "[pulses] dt_ns", "must not exceed 1 ns")
        need(self["mapping"]["dephasing"] in ("echo", "ramsey"), "[mapping] dephasing", "must be echo or ramsey")
        r = self["rb"]
        d = r["depths"]
        need(len(d) >= 3 and all(x >= 1 for x in d), "[rb] depths", "need at least three positive depths")
        need(all(b > a for a, b in zip(d, d[1:])), "[rb] depths", "must be strictly increasing")
        need(r["n_sequences"] >= 1, "[rb] n_sequences", "must be >= 1")
        need(r["channel"] in ("ideal", "depolarizing", "analytic", "lindblad"), "[rb] channel",
             "must be one of ideal, depolarizing, analytic, lindblad")
        need(0 <= r["depolarizing_p"] <= 1, "[rb] depolarizing_p", "must lie in [0, 1]")
        for g in r["interleaved"]:
            need(g in NAMED_CLIFFORDS, "[rb] interleaved", f"unknown gate {g!r}")
        need(r["shots"] >= 0, "[rb] shots", "must be non-negative")
        t = self["tunneling"]
        for k in ("tau_ms", "dt_us", "duration_s"):
            need(t[k] > 0, f"[tunneling] {k}", "must be positive")
        for k in ("f_g", "f_e", "f_m"):
            need(0 <= t[k] <= 1, f"[tunneling] {k}", "must lie in [0, 1]")
        need(t["trace_format"] in ("csv", "npz"), "[tunneling] trace_format", "must be csv or npz")
        s = self["psd"]
        need(s["segment_len"] >= 16, "[psd] segment_len", "must be at least 16")
        need(0 <= s["overlap"] < 1, "[psd] overlap", "must lie in [0, 1)")
        c = self["calibrate"]
        need(c["voltage_max"] > c["voltage_min"], "[calibrate] voltage_max", "must exceed voltage_min")
        need(c["voltage_points"] >= 5, "[calibrate] voltage_points", "must be >= 5")
        need(c["monitor_delay_ns"] >= 0, "[calibrate] monitor_delay_ns", "must be non-negative")
        need(c["duration_max_ns"] > c["duration_min_ns"] > 0, "[calibrate] duration_max_ns",
             "need 0 < duration_min_ns < duration_max_ns")
        need(c["duration_step_ns"] > 0, "[calibrate] duration_step_ns", "must be positive")
        need(c["irb_duration_max_ns"] > c["irb_duration_min_ns"] > 0, "[calibrate] irb_duration_max_ns",
             "need 0 < irb_duration_min_ns < irb_duration_max_ns")
        need(c["irb_duration_step_ns"] > 0, "[calibrate] irb_duration_step_ns", "must be positive")
        need(c["irb_depth"] >= 1, "[calibrate] irb_depth", "must be >= 1")
        need(c["method"] in ("ideal", "lindblad"), "[calibrate] method", "must be ideal or lindblad")
        need(c["comparison_runs"] >= 1, "[calibrate] comparison_runs", "must be >= 1")
        need(math.isfinite(c["detuning_sigma_khz"]), "[calibrate] detuning_sigma_khz", "must be finite")
        need(0 <= self.seed < 2**64, "[run] seed", "must be an unsigned 64-bit integer")

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        for section, keys in SCHEMA.items():
            cp[section] = {k: _fmt(self.values[section][k]) for k in keys}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def default_config() -> RunConfig:
    """The ``paper-device`` profile."""
    cfg = RunConfig({s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})
    cfg.validate()
    return cfg


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values = default_config().values
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"[{section}]: unknown section")
        for key, raw in cp[section].items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"[{section}] {key}: unknown key")
            conv = SCHEMA[section][key][0]
            try:
                values[section][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} ({exc})") from exc
    if values["run"]["profile"] != "paper-device":
        raise ConfigError(f"[run] profile: unknown profile {values['run']['profile']!r}")
    cfg = RunConfig(values)
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def get(cfg: RunConfig, section: str, key: str) -> Any:
    return cfg.values[section][key]
