"""Command-line front end.

Every command is deterministic given its flags. Parameters resolve in the
order: built-in defaults, ``--preset``, ``--config`` file (``key = value``
lines), explicit flags.

Exit status: 0 on success, 2 for invalid input, 3 for regime errors,
4 for resource caps.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bath import GAMMA_E, bath_from_concentration, theta
from .coherence import coherence_curve, coherence_time
from .dephasing import envelope, modified_model, udd_model
from .errors import DomainError, UddmagError
from .io import schedule_text, sidecar_text, table_text
from .montecarlo import mc_envelope, mc_fast_field_rate
from .sensitivity import MODES, MeasurementConfig, sensitivity_curve
from .sequences import cdd, free_induction, hahn, suppression_report, udd

PRESETS = {
    "fig2a": {"concentration": 0.011, "pulses": "0,1,2,3,5,10,20", "points": 400},
    "fig2b": {"concentration": 0.011, "n_max": 50},
    "fig3a": {"concentration": 0.011, "C": 1.0, "pulse_width": 0.0, "pulse_error": 0.0, "n_max": 40},
    "fig3b": {"concentration": 0.011, "C": 1.0, "pulse_width": 50e-9, "pulse_error": 0.01, "n_max": 40},
}

DEFAULTS = {
    "concentration": 0.011,
    "C": 1.0,
    "pulse_width": 0.0,
    "pulse_error": 0.01,
    "seed": 0,
    "output": None,
    "format": "csv",
    "n_max": 40,
    "pulses": "0,1,2,5,10",
    "points": 200,
    "fit_points": 10,
    "t_max": None,
    "mode": "telegraph",
    "theta_ext": None,
    "penalty": True,
    "kind": "udd",
    "n": 1,
    "level": 1,
    "tau": 1.0,
    "noise": "smooth",
    "sequence": "hahn",
    "n_traj": 100_000,
    "n_jobs": 1,
    "tau_ext": 1e-6,
}

_INT_KEYS = {"seed", "n_max", "points", "fit_points", "n", "level", "n_traj", "n_jobs"}
_FLOAT_KEYS = {"concentration", "C", "pulse_width", "pulse_error", "t_max", "theta_ext", "tau", "tau_ext"}
_BOOL_KEYS = {"penalty"}


@dataclass(frozen=True)
class RunConfig:
    concentration: float
    C: float
    pulse_width: float
    pulse_error: float
    seed: int
    output_path: str | None
    format: str

    def validate(self) -> None:
        if not 0 < self.concentration <= 1:
            raise DomainError(f"concentration must lie in (0, 1], got {self.concentration}")
        if self.format not in ("csv", "json"):
            raise DomainError(f"format must be csv or json, got {self.format!r}")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")
        MeasurementConfig(C=self.C, pulse_width=self.pulse_width, pulse_error=self.pulse_error)

    def measurement(self) -> MeasurementConfig:
        return MeasurementConfig(C=self.C, pulse_width=self.pulse_width, pulse_error=self.pulse_error)


def _coerce(key: str, value):
    if value is None or not isinstance(value, str):
        return value
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise DomainError(f"invalid value for {key}: {value!r}") from None
    if key in _BOOL_KEYS:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise DomainError(f"invalid boolean for {key}: {value!r}")
    return value


def read_config_file(path) -> dict:
    """Parse a flat UTF-8 ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise DomainError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve(args: argparse.Namespace) -> dict:
    params = dict(DEFAULTS)
    if args.preset:
        params.update(PRESETS[args.preset])
    if args.config:
        params.update(read_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return params


def run_config(params: dict) -> RunConfig:
    cfg = RunConfig(
        concentration=params["concentration"],
        C=params["C"],
        pulse_width=params["pulse_width"],
        pulse_error=params["pulse_error"],
        seed=params["seed"],
        output_path=params["output"],
        format=params["format"],
    )
    cfg.validate()
    return cfg


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.output_path:
        Path(cfg.output_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _pulse_list(text: str) -> list[int]:
    try:
        counts = [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise DomainError(f"invalid pulse list {text!r}") from None
    if not counts or any(n < 0 for n in counts):
        raise DomainError("pulse list must contain non-negative integers")
    return counts


def cmd_bath(params: dict) -> None:
    cfg = run_config(params)
    env = bath_from_concentration(cfg.concentration)
    t2_star = math.sqrt(2.0) / (GAMMA_E * env.sigma0)
    row = (cfg.concentration, env.sigma0, env.tau_c, theta(env), t2_star)
    _emit(table_text("bath", ["concentration", "sigma0_T", "tau_c_s", "theta_int", "t2_star_s"], [row], cfg.format), cfg)


def _make_sequence(kind: str, n: int, level: int, tau: float):
    if kind == "udd":
        if n < 0:
            raise DomainError("-n must be non-negative")
        return udd(n, tau)
    if kind == "hahn":
        return hahn(tau)
    if kind == "cdd":
        return cdd(level, tau)
    if kind == "free":
        return free_induction(tau)
    raise DomainError(f"unknown sequence kind {kind!r}")


def cmd_sequence(params: dict) -> None:
    cfg = run_config(params)
    seq = _make_sequence(params["kind"], params["n"], params["level"], params["tau"])
    _emit(schedule_text(seq, suppression_report(seq)), cfg)


def cmd_envelope(params: dict) -> None:
    cfg = run_config(params)
    env = bath_from_concentration(cfg.concentration)
    t_max = params["t_max"] or env.tau_c
    if params["points"] < 2:
        raise DomainError("points must be at least 2")
    times = np.linspace(0.0, t_max, params["points"])
    rows = []
    for n in _pulse_list(params["pulses"]):
        d = envelope(udd_model(n, env), times)
        rows += [(n, float(t), float(v)) for t, v in zip(times, d)]
    _emit(table_text("envelope", ["pulses", "t_s", "envelope"], rows, cfg.format), cfg)


def cmd_coherence(params: dict) -> None:
    cfg = run_config(params)
    env = bath_from_concentration(cfg.concentration)
    n_max = params["n_max"]
    if n_max < 1:
        raise DomainError("n_max must be at least 1")
    pts = coherence_curve(range(1, n_max + 1), env, n_jobs=params["n_jobs"])
    rows = [(p.pulses, p.t2, p.capped) for p in pts]
    _emit(table_text("coherence", ["pulses", "t2_s", "capped"], rows, cfg.format), cfg)


def cmd_sensitivity(params: dict) -> None:
    cfg = run_config(params)
    mode = params["mode"]
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}; expected one of {MODES}")
    env = bath_from_concentration(cfg.concentration)
    pts = sensitivity_curve(env, cfg.measurement(), params["n_max"], mode, params["theta_ext"], params["penalty"])
    rows = [(p.pulses, p.tau, p.eta, p.mode, p.penalty) for p in pts]
    cols = ["pulses", "tau_s", "eta_T_per_sqrtHz", "mode", "penalty"]
    _emit(table_text("sensitivity", cols, rows, cfg.format), cfg)
    best = min(pts, key=lambda p: p.eta)
    print(f"optimum: {best.pulses} pulses, tau = {best.tau:.6g} s, eta = {best.eta:.6g} T/sqrt(Hz)", file=sys.stderr)


def _sidecar(cfg: RunConfig, n_traj: int, kind: str, parameters: dict) -> None:
    text = sidecar_text(cfg.seed, n_traj, kind, parameters, __version__)
    if cfg.output_path:
        Path(cfg.output_path + ".json").write_text(text, encoding="utf-8")
    else:
        sys.stderr.write(text)


def _template(params):
    name = params["sequence"]
    return _make_sequence(name, params["n"], params["level"], 1.0)


def cmd_mc_envelope(params: dict) -> None:
    cfg = run_config(params)
    env = bath_from_concentration(cfg.concentration)
    template = _template(params)
    # default window: twice the analytic coherence time
    t_max = params["t_max"] or 2.0 * coherence_time(modified_model(template, env)).t2
    times = np.linspace(0.0, t_max, params["points"])
    est = mc_envelope(template.scaled, env, params["noise"], params["n_traj"], times, cfg.seed, n_jobs=params["n_jobs"])
    rows = [(float(t), float(e), float(s)) for t, e, s in zip(est.times, est.envelope, est.stderr)]
    _emit(table_text("mc_envelope", ["t_s", "envelope", "stderr"], rows, cfg.format), cfg)
    _sidecar(
        cfg,
        est.n_traj,
        est.kind,
        {
            "command": "montecarlo envelope",
            "concentration": cfg.concentration,
            "sequence": template.label,
            "t_max_s": t_max,
            "points": params["points"],
        },
    )


def cmd_mc_fast_rate(params: dict) -> None:
    cfg = run_config(params)
    theta_ext = params["theta_ext"]
    if theta_ext is None:
        theta_ext = 20.0
    tau_ext = params["tau_ext"]
    sigma_ext = 1.0 / (GAMMA_E * tau_ext * theta_ext)
    template = _template(params)
    fit = mc_fast_field_rate(
        sigma_ext, tau_ext, template, GAMMA_E, params["n_traj"], cfg.seed, n_points=params["fit_points"], n_jobs=params["n_jobs"]
    )
    formula = 0.5 * GAMMA_E**2 * sigma_ext**2 * tau_ext
    rows = [(float(t), float(e), float(s)) for t, e, s in zip(fit.times, fit.envelope, fit.envelope_stderr)]
    _emit(table_text("mc_fast_rate", ["t_s", "envelope", "stderr"], rows, cfg.format), cfg)
    _sidecar(
        cfg,
        params["n_traj"],
        "ou",
        {
            "command": "montecarlo fast-rate",
            "theta_ext": theta_ext,
            "tau_ext_s": tau_ext,
            "sigma_ext_T": sigma_ext,
            "sequence": template.label,
            "fitted_rate_per_s": fit.rate,
            "fitted_rate_stderr_per_s": fit.stderr,
            "formula_rate_per_s": formula,
        },
    )


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value parameter file")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--concentration", type=float, help="13C fraction, e.g. 0.011")
    p.add_argument("--C", dest="C", type=float, help="readout efficiency")
    p.add_argument("--pulse-width", type=float, help="pi-pulse duration in seconds")
    p.add_argument("--pulse-error", type=float, help="fractional contrast loss per pulse")
    p.add_argument("--seed", type=int)
    p.add_argument("--output", "-o", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--n-jobs", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uddmag", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"uddmag {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bath", help="bath parameters for a 13C concentration")
    _common(p)
    p.set_defaults(func=cmd_bath)

    p = sub.add_parser("sequence", help="pulse schedule and suppression report")
    _common(p)
    p.add_argument("--kind", choices=("udd", "hahn", "cdd", "free"))
    p.add_argument("-n", type=int, help="pulse count (udd)")
    p.add_argument("-l", "--level", type=int, help="recursion level (cdd)")
    p.add_argument("--tau", type=float, help="interrogation time in seconds")
    p.set_defaults(func=cmd_sequence)

    p = sub.add_parser("envelope", help="analytic decoherence envelopes")
    _common(p)
    p.add_argument("--pulses", help="comma-separated pulse counts")
    p.add_argument("--t-max", type=float)
    p.add_argument("--points", type=int)
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("coherence", help="coherence time against pulse count")
    _common(p)
    p.add_argument("--n-max", type=int)
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("sensitivity", help="optimised sensitivity against pulse count")
    _common(p)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--n-max", type=int)
    p.add_argument("--theta-ext", type=float)
    p.add_argument("--no-penalty", dest="penalty", action="store_const", const=False, default=None)
    p.set_defaults(func=cmd_sensitivity)

    mc = sub.add_parser("montecarlo", help="Monte Carlo oracle runs")
    mcsub = mc.add_subparsers(dest="mc_command", required=True)
    for name, func, help_ in (
        ("envelope", cmd_mc_envelope, "empirical envelope of the 13C bath"),
        ("fast-rate", cmd_mc_fast_rate, "fitted decay rate in a fast OU field"),
    ):
        p = mcsub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--sequence", choices=("free", "hahn", "udd", "cdd"))
        p.add_argument("-n", type=int, help="pulse count (udd)")
        p.add_argument("-l", "--level", type=int, help="recursion level (cdd)")
        p.add_argument("--n-traj", type=int)
        if name == "envelope":
            p.add_argument("--points", type=int)
            p.add_argument("--noise", choices=("smooth", "ou"))
            p.add_argument("--t-max", type=float)
        else:
            p.add_argument("--points", dest="fit_points", type=int, help="fit windows")
            p.add_argument("--theta-ext", type=float)
            p.add_argument("--tau-ext", type=float)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = resolve(args)
        args.func(params)
    except UddmagError as exc:
        print(f"uddmag: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"uddmag: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
