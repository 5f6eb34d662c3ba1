"""Command-line entry point.

One experiment = one subcommand run into one output directory.  Every
output file embeds a hash of the effective configuration, and re-running
with the same configuration reproduces files byte for byte (fixed summation
order, no parallel reductions into shared accumulators; sweep workers never
write, the parent serialises all output in a fixed order).

Subcommands
-----------
simulate-dkg      integrate the chain, streaming energy/norm diagnostics
simulate-dnls     integrate an envelope model, streaming the conserved norm
justify           co-integrate chain + envelope, report the error history;
                  accepts an eps sweep and fits the scaling exponent
justify-extended  same on the extended horizon A |log rho| / rho, checked
                  against a reference constant measured on the plain horizon
normalform        square-root coefficients (Omega, b_m) + decay certificate
thresholds        smallness constants of the normal-form step
soliton           Newton-solve a stationary envelope profile
breather-return   period-return errors of the constructed breather
sweep             parallel variant of ``justify --sweep`` (worker count from
                  the DKLAB_WORKERS environment variable)

Configuration values may come from a flat key-value file (``--config``,
lines of ``name = value`` with ``#`` comments, names matching the long
option names); explicit command-line flags override file values.

Exit codes: 0 success, 1 errors (bad input, numerical failure), 2 when a
requested bound check did not hold.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import approximation, integrators, normal_form, solitons
from .dnls_models import (
    EnvelopeState,
    GeneralizedDnls,
    NormalFormDnls,
    StandardDnls,
    l2_conserved,
    warn_outside_asymptotic_range,
)
from .errors import (
    BlowUpError,
    NewtonDivergenceError,
    NewtonSingularError,
    RegimeError,
    ThresholdError,
)
from .lattice_core import LatticeState, ModelParams, energy_dkg, l2_norm

__all__ = ["ExperimentConfig", "parse_and_validate", "run", "main"]

_WORKERS_ENV = "DKLAB_WORKERS"

try:  # version for --version and output metadata
    from importlib.metadata import version as _dist_version

    _VERSION = _dist_version("dklab")
except Exception:  # pragma: no cover - missing metadata in odd installs
    _VERSION = "0.1.0"


class _CliError(Exception):
    """Invalid command line or config file; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep exit-code policy out of argparse's hands
        raise _CliError(message)


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    params: dict
    outdir: Path
    seed: int
    config_hash: str


# -- parsing -------------------------------------------------------------------


def _read_config_file(path: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _CliError(f"{path}:{lineno}: expected 'name = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise _CliError(f"{path}:{lineno}: empty key")
        pairs[key.replace("_", "-")] = value
    return pairs


def _config_tokens(pairs: dict[str, str], parser: argparse.ArgumentParser) -> list[str]:
    """Turn file pairs into CLI tokens understood by ``parser`` (placed
    before the user's flags so that explicit flags win)."""
    known = {}
    for action in parser._actions:  # noqa: SLF001 - argparse has no public API for this
        for opt in action.option_strings:
            if opt.startswith("--"):
                known[opt[2:]] = action
    tokens: list[str] = []
    for key, value in pairs.items():
        action = known.get(key)
        if action is None:
            raise _CliError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):  # noqa: SLF001
            if value.lower() in ("1", "true", "yes", "on"):
                tokens.append(f"--{key}")
            elif value.lower() not in ("0", "false", "no", "off"):
                raise _CliError(f"config key {key!r} expects a boolean, got {value!r}")
        else:
            tokens.extend([f"--{key}", value])
    return tokens


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--out", default="out", help="output directory (default: out)")
    sp.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    sp.add_argument("--config", default=None, help="flat key=value config file")


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise _CliError(f"expected a comma-separated float list, got {text!r}") from exc


def _seed_sites(text: str) -> dict[int, float]:
    out: dict[int, float] = {}
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if ":" in tok:
            site, sign = tok.split(":", 1)
            out[int(site)] = float(sign)
        else:
            out[int(tok)] = 1.0
    if not out:
        raise _CliError(f"no seed sites in {text!r}")
    return out


def _build_parser() -> _Parser:
    parser = _Parser(prog="dklab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dklab {_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate-dkg", help="integrate the chain")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--rho", type=float, default=0.05)
    p.add_argument("--n", type=int, default=64, help="half-size N (2N+1 sites)")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=100.0)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--init", choices=("breather", "onehot", "random"), default="breather")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--omega-s", type=float, default=1.5)
    p.add_argument("--save-states", action="store_true",
                   help="also stream full states to states.jsonl")
    _add_common(p)

    p = sub.add_parser("simulate-dnls", help="integrate an envelope model")
    p.add_argument("--model", choices=("standard", "generalized", "normalform"),
                   default="standard")
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--dt", type=float, default=None,
                   help="default 1e-3 * min(1, 1/nu), resolving the nonlinear "
                        "frequency shift")
    p.add_argument("--t-end", type=float, default=10.0,
                   help="horizon in the model's own clock")
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--init", choices=("soliton", "onehot"), default="soliton")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--omega-s", type=float, default=1.5)
    _add_common(p)

    for name in ("justify", "sweep"):
        p = sub.add_parser(
            name,
            help="error-scaling experiment" if name == "justify"
            else "parallel eps-sweep of the justify experiment",
        )
        p.add_argument("--epsilon", type=float, default=0.05)
        p.add_argument("--sweep", type=_float_list, default=None,
                       help="comma-separated eps values (overrides --epsilon)")
        p.add_argument("--regime", choices=("standard", "generalized"), default="standard")
        p.add_argument("--rho-rule", choices=("eps", "eps2"), default=None,
                       help="rho = eps or eps^2 (default matches the regime)")
        p.add_argument("--rho", type=float, default=None,
                       help="explicit rho (single-eps runs only)")
        p.add_argument("--n", type=int, default=64)
        p.add_argument("--tau0", type=float, default=1.0)
        p.add_argument("--dt", type=float, default=1e-3)
        p.add_argument("--stride", type=int, default=100)
        p.add_argument("--omega-s", type=float, default=1.5)
        p.add_argument("--amplitude-scale", type=float, default=1.0,
                       help="scale applied to the unit-nonlinearity soliton profile")
        p.add_argument("--a0", choices=("soliton", "onehot"), default="soliton")
        p.add_argument("--c0-scale", type=float, default=0.0,
                       help="initial chain perturbation in units of the error scale")
        p.add_argument("--svg", action="store_true", help="emit a log-log SVG plot")
        _add_common(p)

    p = sub.add_parser("justify-extended", help="extended-horizon error bound check")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--regime", choices=("standard", "generalized"), default="standard")
    p.add_argument("--rho-rule", choices=("eps", "eps2"), default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--big-a", type=float, default=0.5, help="horizon constant A")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--tau0", type=float, default=1.0,
                   help="plain horizon used when measuring the reference constant")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--omega-s", type=float, default=1.5)
    p.add_argument("--amplitude-scale", type=float, default=1.0)
    p.add_argument("--a0", choices=("soliton", "onehot"), default="soliton")
    p.add_argument("--c-const", type=float, default=None,
                   help="reference constant C; measured from a plain-horizon run if omitted")
    _add_common(p)

    p = sub.add_parser("normalform", help="square-root coefficients and decay table")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--n", type=int, default=32)
    _add_common(p)

    p = sub.add_parser("thresholds", help="normal-form smallness constants")
    p.add_argument("--epsilon", type=float, default=1e-3,
                   help="small couplings keep f(eps) > 1 with fitted constants")
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--c-zeta0", type=float, default=None,
                   help="decay constant of the quadratic seeds (default: fitted)")
    p.add_argument("--c-h1", type=float, default=1.0,
                   help="decay constant of the quartic seeds (no fit available)")
    _add_common(p)

    p = sub.add_parser("soliton", help="stationary envelope profile by Newton")
    p.add_argument("--omega-s", type=float, default=1.5)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--seed-sites", type=_seed_sites, default={0: 1.0},
                   help="e.g. '0' or '0:1,1:-1'")
    _add_common(p)

    p = sub.add_parser("breather-return", help="period-return errors of the breather")
    p.add_argument("--omega-s", type=float, default=1.5)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--periods", type=int, default=3)
    p.add_argument("--dt", type=float, default=1e-3)
    _add_common(p)

    return parser


def _validate(command: str, params: dict) -> None:
    eps = params.get("epsilon")
    if eps is not None and command != "thresholds" and not (0.0 < eps < 0.5):
        raise _CliError(
            f"--epsilon {eps} out of range: the diagonal-free normalisation "
            "restricts the coupling to (0, 1/2)"
        )
    if command == "thresholds" and eps is not None and not (0.0 < eps < 0.5):
        raise _CliError(f"--epsilon {eps} must lie in (0, 1/2)")
    rho = params.get("rho")
    if rho is not None and not (0.0 < rho <= 1.0):
        raise _CliError(f"--rho {rho} must lie in (0, 1]")
    if params.get("dt") is not None and not (0.0 < params["dt"] <= 0.1):
        raise _CliError(
            f"--dt {params['dt']} must lie in (0, 0.1] to resolve the unit "
            "carrier frequency"
        )
    if params.get("n") is not None and params["n"] < 1:
        raise _CliError("--n must be a positive integer")
    if command in ("justify", "sweep", "justify-extended"):
        horizon = "T0" if command != "justify-extended" else "T0star"
        for e in params.get("sweep") or [params["epsilon"]]:
            cfg = approximation.JustificationConfig(
                epsilon=e,
                rho=_rho_for(params, e),
                a0=np.zeros(3, dtype=complex),
                regime=params["regime"],
                horizon=horizon,
                tau0=params.get("tau0", 1.0),
                big_a=params.get("big_a", 0.5),
                alpha=params.get("alpha", 0.5),
                dt=params["dt"],
                sample_stride=params["stride"],
            )
            try:
                cfg.validate()
            except RegimeError as exc:
                raise _CliError(str(exc)) from exc
    if command == "soliton" and abs(params["omega_s"]) <= 1.0:
        raise _CliError(
            f"--omega-s {params['omega_s']} lies inside the linear band [-1, 1]; "
            "localized profiles need |omega_s| > 1"
        )


def _rho_for(params: dict, eps: float) -> float:
    if params.get("rho") is not None:
        return params["rho"]
    rule = params.get("rho_rule")
    if rule is None:
        rule = "eps" if params.get("regime", "standard") == "standard" else "eps2"
    return eps if rule == "eps" else eps * eps


def parse_and_validate(argv=None) -> ExperimentConfig:
    """Parse argv (with optional config-file merge, file < flags), validate
    against the module-level preconditions, and print the effective
    configuration as JSON."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    # First pass just to locate --config and the subcommand.
    ns = parser.parse_args(argv)
    if ns.config:
        sub_idx = argv.index(ns.command)
        pairs = _read_config_file(ns.config)
        sub_parser = None
        for action in parser._subparsers._group_actions:  # noqa: SLF001
            sub_parser = action.choices[ns.command]
        tokens = _config_tokens(pairs, sub_parser)
        argv = argv[: sub_idx + 1] + tokens + argv[sub_idx + 1 :]
        ns = parser.parse_args(argv)

    params = {
        k: v for k, v in vars(ns).items() if k not in ("command", "out", "seed", "config")
    }
    if ns.command == "simulate-dnls" and params.get("dt") is None:
        nu = params["nu"] if params["model"] == "standard" else 1.0
        params["dt"] = 1e-3 * min(1.0, 1.0 / nu)
    _validate(ns.command, params)
    hashable = dict(sorted(params.items()))
    hashable["command"] = ns.command
    hashable["seed"] = ns.seed
    digest = hashlib.sha256(
        json.dumps(hashable, sort_keys=True, default=str).encode()
    ).hexdigest()[:16]
    cfg = ExperimentConfig(
        command=ns.command,
        params=params,
        outdir=Path(ns.out),
        seed=ns.seed,
        config_hash=digest,
    )
    effective = dict(hashable)
    effective["out"] = str(cfg.outdir)
    effective["config_hash"] = digest
    print(json.dumps(effective, sort_keys=True))
    return cfg


# -- output helpers ------------------------------------------------------------


def _write_json(path: Path, payload: dict, config_hash: str) -> None:
    body = {"config_hash": config_hash}
    body.update(payload)
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def _write_svg_loglog(
    path: Path,
    points: list[tuple[float, float]],
    slope: float,
    intercept: float,
    config_hash: str,
) -> None:
    """Minimal deterministic log-log scatter with the fitted line."""
    width, height, pad = 640, 480, 60
    lx = [math.log10(p[0]) for p in points]
    ly = [math.log10(p[1]) for p in points]
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly), max(ly)
    x0, x1 = x0 - 0.1 * (x1 - x0 + 1e-9), x1 + 0.1 * (x1 - x0 + 1e-9)
    y0, y1 = y0 - 0.1 * (y1 - y0 + 1e-9), y1 + 0.1 * (y1 - y0 + 1e-9)

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    ln10 = math.log(10.0)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f"<!-- config_hash={config_hash} -->",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height-pad}" x2="{width-pad}" y2="{height-pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height-pad}" stroke="black"/>',
        f'<text x="{width//2}" y="{height-20}" text-anchor="middle" font-size="14">log10 eps</text>',
        f'<text x="18" y="{height//2}" font-size="14" transform="rotate(-90 18 {height//2})" text-anchor="middle">log10 sup error</text>',
    ]
    fx0, fx1 = x0 + 0.05 * (x1 - x0), x1 - 0.05 * (x1 - x0)
    fy0 = (slope * (fx0 * ln10) + intercept) / ln10
    fy1 = (slope * (fx1 * ln10) + intercept) / ln10
    lines.append(
        f'<line x1="{sx(fx0):.2f}" y1="{sy(fy0):.2f}" x2="{sx(fx1):.2f}" '
        f'y2="{sy(fy1):.2f}" stroke="steelblue" stroke-width="1.5"/>'
    )
    for px, py in zip(lx, ly):
        lines.append(
            f'<circle cx="{sx(px):.2f}" cy="{sy(py):.2f}" r="4" fill="crimson"/>'
        )
    lines.append(
        f'<text x="{width-pad}" y="{pad-10}" text-anchor="end" font-size="14">'
        f"slope {slope:.3f}</text>"
    )
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n")


def _soliton_envelope(params: dict, n_half: int) -> np.ndarray:
    if params.get("a0", "soliton") == "onehot" or params.get("init") == "onehot":
        a0 = np.zeros(2 * n_half + 1, dtype=complex)
        a0[n_half] = params.get("amplitude", params.get("amplitude_scale", 1.0))
        return a0
    profile = solitons.solve_soliton(params.get("omega_s", 1.5), 1.0, n_half)
    return params.get("amplitude_scale", params.get("amplitude", 1.0)) * profile.A.astype(
        complex
    )


# -- subcommand bodies ----------------------------------------------------------


def _cmd_simulate_dkg(cfg: ExperimentConfig) -> int:
    p = cfg.params
    mp = ModelParams(p["epsilon"], p["rho"], p["n"])
    if p["init"] == "breather":
        profile = solitons.solve_soliton(p["omega_s"], p["rho"] / p["epsilon"], p["n"])
        state0 = solitons.build_breather_initial(profile, p["epsilon"], p["rho"])
        if p["amplitude"] != 1.0:
            state0 = LatticeState(p["amplitude"] * state0.x, p["amplitude"] * state0.y)
    elif p["init"] == "onehot":
        x = np.zeros(mp.n_sites)
        x[p["n"]] = p["amplitude"]
        state0 = LatticeState(x, np.zeros(mp.n_sites))
    else:
        rng = np.random.default_rng(cfg.seed)
        state0 = LatticeState(
            p["amplitude"] * rng.standard_normal(mp.n_sites),
            p["amplitude"] * rng.standard_normal(mp.n_sites),
        )
    icfg = integrators.IntegratorConfig(p["dt"], p["t_end"], p["stride"], "verlet")
    observers = [
        lambda t, s: {
            "energy": energy_dkg(s, mp.epsilon, mp.rho),
            "norm_x": l2_norm(s.x),
            "norm_y": l2_norm(s.y),
        }
    ]
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    states_fh = None
    last = {"state": state0}
    if p["save_states"]:
        states_fh = open(cfg.outdir / "states.jsonl", "w")
        states_fh.write(json.dumps({"config_hash": cfg.config_hash}) + "\n")

    def sink(t, state, diag):  # noqa: ANN001
        last["state"] = state
        if states_fh is not None:
            states_fh.write(json.dumps(state.to_json_dict()) + "\n")

    try:
        traj = integrators.integrate(
            state0, mp, icfg, observers, keep_snapshots=False, sample_sink=sink
        )
    finally:
        if states_fh is not None:
            states_fh.close()
    traj.write_csv(cfg.outdir / "trajectory.csv", cfg.config_hash)
    _write_json(cfg.outdir / "final_state.json", last["state"].to_json_dict(), cfg.config_hash)
    last["state"].write_csv(cfg.outdir / "final_state.csv", f"config_hash={cfg.config_hash}")
    drift = float(
        np.max(np.abs(traj.diagnostics["energy"] - traj.diagnostics["energy"][0]))
    )
    _write_json(
        cfg.outdir / "summary.json",
        {
            "t_end": float(traj.times[-1]),
            "energy_initial": float(traj.diagnostics["energy"][0]),
            "energy_drift_abs": drift,
            "samples": len(traj.times),
        },
        cfg.config_hash,
    )
    return 0


def _cmd_simulate_dnls(cfg: ExperimentConfig) -> int:
    p = cfg.params
    n_half = p["n"]
    if p["model"] == "standard":
        model = StandardDnls(p["nu"])
    elif p["model"] == "generalized":
        model = GeneralizedDnls(p["delta"], p["epsilon"])
    else:
        coeffs = normal_form.sqrt_circulant(n_half, p["epsilon"])
        b2 = float(coeffs.b[1]) if n_half >= 2 else None
        model = NormalFormDnls(coeffs.Omega, float(coeffs.b[0]), b2)
    if p["model"] != "normalform":
        warn_outside_asymptotic_range(model, p["epsilon"])
    a0 = _soliton_envelope(p, n_half)
    env0 = EnvelopeState(a0, 0.0)
    icfg = integrators.IntegratorConfig(p["dt"], p["t_end"], p["stride"], "rk4")
    observers = [lambda t, s: {"norm_sq": l2_conserved(s.a)}]
    last = {"state": env0}

    def sink(t, state, diag):  # noqa: ANN001
        last["state"] = state

    traj = integrators.integrate(
        env0, model, icfg, observers, keep_snapshots=False, sample_sink=sink
    )
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    traj.write_csv(cfg.outdir / "trajectory.csv", cfg.config_hash)
    _write_json(cfg.outdir / "final_state.json", last["state"].to_json_dict(), cfg.config_hash)
    last["state"].write_csv(cfg.outdir / "final_state.csv", f"config_hash={cfg.config_hash}")
    n0 = traj.diagnostics["norm_sq"][0]
    _write_json(
        cfg.outdir / "summary.json",
        {
            "model": p["model"],
            "clock": traj.clock,
            "t_end": float(traj.times[-1]),
            "norm_sq_initial": float(n0),
            "norm_sq_drift_rel": float(
                np.max(np.abs(traj.diagnostics["norm_sq"] - n0)) / max(n0, 1e-300)
            ),
        },
        cfg.config_hash,
    )
    return 0


def _justify_config(params: dict, eps: float, seed: int) -> approximation.JustificationConfig:
    return approximation.JustificationConfig(
        epsilon=eps,
        rho=_rho_for(params, eps),
        a0=_soliton_envelope(params, params["n"]),
        regime=params["regime"],
        horizon="T0",
        tau0=params["tau0"],
        dt=params["dt"],
        sample_stride=params["stride"],
        c0_scale=params.get("c0_scale", 0.0),
        seed=seed,
    )


def _justify_point(jcfg: approximation.JustificationConfig) -> approximation.JustificationReport:
    return approximation.run_justification(jcfg)


def _eps_tag(eps: float) -> str:
    return repr(eps).replace(".", "p").replace("-", "m")


def _run_justify_sweep(cfg: ExperimentConfig, parallel: bool) -> int:
    p = cfg.params
    eps_list = p.get("sweep") or [p["epsilon"]]
    jconfigs = [_justify_config(p, e, cfg.seed) for e in eps_list]
    if parallel and len(jconfigs) > 1:
        workers = int(os.environ.get(_WORKERS_ENV, "0")) or None
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_justify_point, jconfigs))
    else:
        reports = [_justify_point(jc) for jc in jconfigs]

    cfg.outdir.mkdir(parents=True, exist_ok=True)
    summaries = []
    for eps, report in zip(eps_list, reports):
        tag = _eps_tag(eps)
        report.write_csv(cfg.outdir / f"report_eps{tag}.csv", cfg.config_hash)
        summaries.append(report.summary_dict())
    payload: dict = {"points": summaries}
    if len(reports) >= 3:
        pairs = [(r.epsilon, r.sup_error) for r in reports]
        slope, r2 = approximation.fit_scaling_exponent(pairs)
        payload["slope"] = slope
        payload["r2"] = r2
        if p.get("svg"):
            ln = np.log([pt[0] for pt in pairs])
            lv = np.log([pt[1] for pt in pairs])
            intercept = float(np.mean(lv) - slope * np.mean(ln))
            _write_svg_loglog(
                cfg.outdir / "sweep.svg", pairs, slope, intercept, cfg.config_hash
            )
    _write_json(cfg.outdir / "summary.json", payload, cfg.config_hash)
    with open(cfg.outdir / "sweep.csv", "w") as fh:
        fh.write(f"# config_hash={cfg.config_hash}\n")
        fh.write("epsilon,rho,sup_error,bound_scale,ratio\n")
        for r in reports:
            fh.write(
                f"{r.epsilon!r},{r.rho!r},{r.sup_error!r},{r.bound_scale!r},{r.ratio!r}\n"
            )
    return 0


def _cmd_justify_extended(cfg: ExperimentConfig) -> int:
    p = cfg.params
    eps = p["epsilon"]
    rho = _rho_for(p, eps)
    a0 = _soliton_envelope(p, p["n"])
    c_const = p.get("c_const")
    measured_from = "supplied"
    if c_const is None:
        base = approximation.run_justification(
            approximation.JustificationConfig(
                epsilon=eps,
                rho=rho,
                a0=a0,
                regime=p["regime"],
                horizon="T0",
                tau0=p["tau0"],
                dt=p["dt"],
                sample_stride=p["stride"],
            )
        )
        c_const = base.ratio
        measured_from = "plain-horizon run"
    ext = approximation.run_justification(
        approximation.JustificationConfig(
            epsilon=eps,
            rho=rho,
            a0=a0,
            regime=p["regime"],
            horizon="T0star",
            big_a=p["big_a"],
            alpha=p["alpha"],
            tau0=p["tau0"],
            dt=p["dt"],
            sample_stride=p["stride"],
        )
    )
    bound = c_const * ext.bound_scale
    holds = bool(ext.sup_error <= bound)
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    ext.write_csv(cfg.outdir / "extended.csv", cfg.config_hash)
    _write_json(
        cfg.outdir / "extended.json",
        {
            "epsilon": eps,
            "rho": rho,
            "alpha": p["alpha"],
            "A": p["big_a"],
            "t_end": float(ext.times[-1]),
            "c_const": c_const,
            "c_const_source": measured_from,
            "sup_error": ext.sup_error,
            "bound": bound,
            "holds": holds,
        },
        cfg.config_hash,
    )
    return 0 if holds else 2


def _cmd_normalform(cfg: ExperimentConfig) -> int:
    p = cfg.params
    coeffs = normal_form.sqrt_circulant(p["n"], p["epsilon"])
    cert = normal_form.decay_certificate(coeffs)
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    payload = coeffs.to_json_dict()
    payload["decay_certificate"] = {
        "C_fit": cert.C_fit,
        "holds": cert.holds,
        "max_at": cert.max_at,
        "m_checked": cert.m_checked,
    }
    _write_json(cfg.outdir / "normalform.json", payload, cfg.config_hash)
    with open(cfg.outdir / "decay.csv", "w") as fh:
        fh.write(f"# config_hash={cfg.config_hash}\n")
        fh.write("m,b_m,decay_scale\n")
        for m, bm, scale in coeffs.decay_table():
            fh.write(f"{m},{bm!r},{scale!r}\n")
    return 0


def _cmd_thresholds(cfg: ExperimentConfig) -> int:
    p = cfg.params
    coeffs = normal_form.sqrt_circulant(p["n"], p["epsilon"])
    c_zeta0 = p.get("c_zeta0")
    if c_zeta0 is None:
        cert = normal_form.decay_certificate(coeffs)
        c_zeta0 = cert.C_fit if cert.C_fit > 0.0 else 1.0
    consts = normal_form.thresholds(c_zeta0, p["c_h1"], p["epsilon"], coeffs.Omega)
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.outdir / "thresholds.json", consts.to_json_dict(), cfg.config_hash)
    return 0


def _cmd_soliton(cfg: ExperimentConfig) -> int:
    p = cfg.params
    profile = solitons.solve_soliton(p["omega_s"], p["nu"], p["n"], p["seed_sites"])
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    profile.write_csv(cfg.outdir / "soliton.csv", f"config_hash={cfg.config_hash}")
    _write_json(cfg.outdir / "soliton.json", profile.to_json_dict(), cfg.config_hash)
    return 0


def _cmd_breather_return(cfg: ExperimentConfig) -> int:
    p = cfg.params
    rho = p["epsilon"] * p["nu"]
    profile = solitons.solve_soliton(p["omega_s"], p["nu"], p["n"])
    report = solitons.breather_return_error(
        profile, p["epsilon"], rho, p["periods"], p["dt"]
    )
    cfg.outdir.mkdir(parents=True, exist_ok=True)
    with open(cfg.outdir / "breather_return.csv", "w") as fh:
        fh.write(f"# config_hash={cfg.config_hash}\n")
        fh.write("k,t,return_error\n")
        for k, (t, err) in enumerate(zip(report.times, report.errors), start=1):
            fh.write(f"{k},{float(t)!r},{float(err)!r}\n")
    _write_json(
        cfg.outdir / "breather_return.json",
        {
            "period": report.period,
            "omega_fit": report.omega_fit,
            "epsilon": p["epsilon"],
            "rho": rho,
            "errors": report.errors.tolist(),
        },
        cfg.config_hash,
    )
    return 0


_COMMANDS = {
    "simulate-dkg": _cmd_simulate_dkg,
    "simulate-dnls": _cmd_simulate_dnls,
    "justify": lambda cfg: _run_justify_sweep(cfg, parallel=False),
    "sweep": lambda cfg: _run_justify_sweep(cfg, parallel=True),
    "justify-extended": _cmd_justify_extended,
    "normalform": _cmd_normalform,
    "thresholds": _cmd_thresholds,
    "soliton": _cmd_soliton,
    "breather-return": _cmd_breather_return,
}


def run(config: ExperimentConfig) -> int:
    """Execute a validated configuration.  Returns the process exit code:
    0 success, 2 when a requested bound check failed."""
    return _COMMANDS[config.command](config)


def main(argv=None) -> int:
    try:
        cfg = parse_and_validate(argv)
    except _CliError as exc:
        print(f"dklab: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return run(cfg)
    except (
        _CliError,
        BlowUpError,
        RegimeError,
        ThresholdError,
        NewtonSingularError,
        NewtonDivergenceError,
        ValueError,
    ) as exc:
        print(f"dklab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
