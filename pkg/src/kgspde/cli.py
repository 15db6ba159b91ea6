"""Command-line front end.

Each subcommand reads an optional TOML config (``--config``), applies the
environment override for the output directory, then the command-line flags,
validates everything up front and runs one experiment.  Outputs go to the
output directory only; ``manifest.json`` is written on success and failure.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure
(blow-up, indefinite covariance), 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from . import __version__
from .outputs import atomic_write, table_csv, to_json
from .symbols import ModelParams

COMMANDS = ("simulate", "sample-gibbs", "invariance-test", "nrl-sweep", "url-sweep", "wick-cauchy",
            "verify-bounds", "energy-probe")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
ENV_OUTPUT = "KGSPDE_OUTPUT_DIR"


class ConfigError(ValueError):
    def __init__(self, problems: list):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


class NumericalFailure(RuntimeError):
    pass


# ----------------------------------------------------------------- options


def parse_complex(value) -> complex:
    """``"1+1j"``, ``"1+1i"``, ``[re, im]`` or a plain number."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"complex pair needs two entries, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, (int, float, complex)) and not isinstance(value, bool):
        return complex(value)
    text = str(value).strip().replace(" ", "").replace("i", "j")
    return complex(text)


def _bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _opt_float(value):
    return None if value is None or str(value).lower() == "none" else float(value)


def _opt_int(value):
    return None if value is None or str(value).lower() == "none" else int(value)


def _int(value) -> int:
    if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
        raise ValueError(f"not an integer: {value!r}")
    return int(value)


def _list(item):
    def parse(value):
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        if not isinstance(value, (list, tuple)):
            value = [value]
        return [item(v) for v in value]
    return parse


@dataclass(frozen=True)
class Option:
    parse: object
    default: object
    help: str
    flag_kind: str = "value"  # value | bool | list


OPTIONS = {
    "eps": Option(float, 1.0, "eps in (0, 1]"),
    "alpha": Option(parse_complex, 1 + 1j, "damping alpha, e.g. 1+1j"),
    "n": Option(_int, 1, "nonlinearity degree n >= 1"),
    "n_max": Option(_int, 4, "Galerkin truncation N"),
    "horizon": Option(float, 1.0, "final time T"),
    "dt": Option(float, 0.01, "time step"),
    "steps": Option(_opt_int, None, "number of steps (default horizon / dt)"),
    "grid_size": Option(_opt_int, None, "FFT grid size (default: smallest alias-free)"),
    "count": Option(_opt_int, None, "Monte-Carlo paths / samples (command default when unset)"),
    "seed": Option(_int, 0, "RNG seed"),
    "record_stride": Option(_int, 1, "record every k-th step"),
    "initial": Option(str, "mu", "initial state: mu (Gaussian free field) or zero"),
    "nonlinear": Option(_bool, True, "include the Wick nonlinearity", "bool"),
    "noise": Option(_bool, True, "include the noise", "bool"),
    "sigma": Option(_opt_float, None, "renormalization variance (default: pointwise variance of Pi_N Z)"),
    "blowup_threshold": Option(float, 1e8, "paths above this size are flagged as blown up"),
    "mode": Option(str, "deterministic", "sweep mode: deterministic, linear or stochastic"),
    "j_min": Option(_int, 1, "sweep parameters 2^-j for j_min <= j <= j_max"),
    "j_max": Option(_int, 7, "see j_min"),
    "alpha1": Option(float, 1.0, "real damping of the url-sweep target"),
    "theta": Option(float, 1.0, "rate exponent of the nrl data norm"),
    "norm_index": Option(float, 0.0, "Sobolev index of the deterministic sweep error"),
    "delta": Option(_opt_float, None, "negative regularity of stochastic / Wick norms (command default)"),
    "n_values": Option(_list(_int), [2, 4, 8, 16], "truncation levels for wick-cauchy", "list"),
    "wick_m": Option(_int, 1, "Hermite degree m for wick-cauchy"),
    "wick_n": Option(_int, 0, "Hermite degree n for wick-cauchy"),
    "alphas": Option(_list(parse_complex), [1 + 1j, 2 + 1j, 1 + 3j], "alpha grid", "list"),
    "s_points": Option(_int, 1000, "log grid size in s for verify-bounds"),
    "s_min": Option(float, 1e-4, "smallest s for verify-bounds"),
    "s_max": Option(float, 1e4, "largest s for verify-bounds"),
    "energy_sigma": Option(float, 0.9, "Sobolev index of the energy probe"),
    "bias_dts": Option(_list(float), [], "coarse steps for the coupled dt-bias profile", "list"),
    "bias_ref": Option(float, 1.0 / 64, "reference step of the dt-bias profile"),
    "formats": Option(_list(str), ["csv", "json"], "output formats (csv, json)", "list"),
    "figures": Option(_bool, True, "render PNG figures", "bool"),
    "output_dir": Option(str, "kgspde-out", "output directory"),
}

COMMAND_DEFAULTS = {
    "simulate": {"count": 1},
    "sample-gibbs": {"count": 2000, "n_max": 2},
    "invariance-test": {"count": 10000, "n_max": 2, "dt": 1e-3},
    "nrl-sweep": {"count": 200, "delta": 0.1, "n_max": 8},
    "url-sweep": {"count": 200, "delta": 0.1, "n_max": 8},
    "wick-cauchy": {"count": 1000, "delta": 1.0},
    "verify-bounds": {},
    "energy-probe": {"n_max": 8, "horizon": 2.0, "j_min": 0, "j_max": 6},
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: ModelParams
    values: dict
    sources: dict = field(default_factory=dict)

    def __getattr__(self, name):
        values = object.__getattribute__(self, "values")
        if name in values:
            return values[name]
        raise AttributeError(name)

    @property
    def output_dir(self) -> Path:
        return Path(self.values["output_dir"])

    @property
    def steps(self) -> int:
        s = self.values["steps"]
        return int(round(self.values["horizon"] / self.values["dt"])) if s is None else int(s)

    def as_dict(self) -> dict:
        out = {"command": self.command}
        for k, v in sorted(self.values.items()):
            if isinstance(v, complex):
                v = [v.real, v.imag]
            elif isinstance(v, list) and v and isinstance(v[0], complex):
                v = [[c.real, c.imag] for c in v]
            out[k] = v
        return out


def _validate(command: str, v: dict) -> list:
    bad = []
    if v["dt"] is not None and not v["dt"] > 0:
        bad.append(f"dt must be positive, got {v['dt']}")
    if v["steps"] is not None and v["steps"] < 1:
        bad.append(f"steps must be >= 1, got {v['steps']}")
    if v["count"] is not None and v["count"] < 1:
        bad.append(f"count must be >= 1, got {v['count']}")
    if v["grid_size"] is not None and v["grid_size"] < 2 * v["n_max"] + 2:
        bad.append(f"grid_size must be at least 2 n_max + 2 = {2 * v['n_max'] + 2}")
    if v["record_stride"] < 1:
        bad.append("record_stride must be >= 1")
    if not 0 <= v["seed"] < 2 ** 64:
        bad.append("seed must be a 64-bit unsigned integer")
    if v["initial"] not in ("mu", "zero"):
        bad.append(f"initial must be 'mu' or 'zero', got {v['initial']!r}")
    if v["sigma"] is not None and v["sigma"] < 0:
        bad.append("sigma must be >= 0")
    if not v["blowup_threshold"] > 0:
        bad.append("blowup_threshold must be positive")
    if v["mode"] not in ("deterministic", "linear", "stochastic"):
        bad.append(f"mode must be deterministic, linear or stochastic, got {v['mode']!r}")
    if v["j_max"] <= v["j_min"]:
        bad.append("j_max must exceed j_min (a rate fit needs at least two points)")
    if v["j_min"] < 0:
        bad.append("j_min must be >= 0")
    if v["delta"] is not None and v["delta"] < 0:
        bad.append("delta must be >= 0")
    if v["alpha1"] <= 0:
        bad.append("alpha1 must be positive")
    ns = v["n_values"]
    if len(ns) < 2 or any(b <= a for a, b in zip(ns, ns[1:])) or (ns and ns[0] < 0):
        bad.append("n_values needs at least two strictly increasing nonnegative levels")
    if v["wick_m"] < 0 or v["wick_n"] < 0 or v["wick_m"] + v["wick_n"] == 0:
        bad.append("wick_m, wick_n must be nonnegative and not both zero")
    if not v["alphas"]:
        bad.append("alphas must be non-empty")
    for a in v["alphas"]:
        if not a.real > 0:
            bad.append(f"every alpha in alphas needs positive real part, got {a}")
    if v["s_points"] < 2 or not 0 < v["s_min"] < v["s_max"]:
        bad.append("verify-bounds needs s_points >= 2 and 0 < s_min < s_max")
    unknown = sorted(set(v["formats"]) - {"csv", "json"})
    if unknown:
        bad.append(f"unknown output formats {unknown}")
    if v["bias_ref"] <= 0 or any(d <= 0 for d in v["bias_dts"]):
        bad.append("bias_ref and bias_dts must be positive")
    if command == "simulate" and v["alpha"].imag == 0:
        bad.append("simulate uses the mild (lambda +/-) representation, which needs Im alpha != 0;"
                   " run url-sweep for the real-damping equation")
    if command == "invariance-test":
        h, dt = v["horizon"], v["dt"]
        if dt and dt > 0 and abs(round(h / dt) * dt - h) > 1e-9 * h:
            bad.append("invariance-test needs horizon to be a multiple of dt")
        for d in v["bias_dts"]:
            m = round(d / v["bias_ref"]) if v["bias_ref"] > 0 else 0
            if m < 1 or abs(m * v["bias_ref"] - d) > 1e-9 * d or abs(round(h / d) * d - h) > 1e-9 * h:
                bad.append(f"bias step {d} must be a multiple of bias_ref and divide the horizon")
    if command == "url-sweep":
        if v["eps"] != 1.0:
            bad.append("url-sweep works at eps = 1")
    return bad


def parse_config(command: str, path: str | None = None, flags: dict | None = None,
                 env: dict | None = None) -> RunConfig:
    """Merge defaults, config file, environment and flags; raise ``ConfigError`` listing every problem."""
    if command not in COMMANDS:
        raise ConfigError([f"unknown command {command!r}; choose from {', '.join(COMMANDS)}"])
    env = os.environ if env is None else env
    values = {k: o.default for k, o in OPTIONS.items()}
    values.update(COMMAND_DEFAULTS[command])
    sources = {k: "default" for k in values}
    problems = []
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"config {path} is not valid TOML: {exc}"]) from exc
        file_cmd = raw.pop("command", None)
        if file_cmd is not None and file_cmd != command:
            problems.append(f"config file is for command {file_cmd!r}, not {command!r}")
        for key in sorted(set(raw) - set(OPTIONS)):
            problems.append(f"unknown config key {key!r}")
    layers = [("file", {k: v for k, v in raw.items() if k in OPTIONS})]
    if env.get(ENV_OUTPUT):
        layers.append(("env", {"output_dir": env[ENV_OUTPUT]}))
    layers.append(("flag", {k: v for k, v in (flags or {}).items() if v is not None}))
    for source, layer in layers:
        for key, val in layer.items():
            if key not in OPTIONS:
                problems.append(f"unknown option {key!r}")
                continue
            try:
                values[key] = OPTIONS[key].parse(val)
                sources[key] = source
            except (TypeError, ValueError) as exc:
                problems.append(f"{key}: {exc}")
    params = None
    if not problems:
        try:
            params = ModelParams(values["eps"], values["alpha"], values["n"], values["n_max"], values["horizon"])
        except ValueError as exc:
            problems += str(exc).split("; ")
        problems += _validate(command, values)
    if problems:
        raise ConfigError(problems)
    return RunConfig(command, params, values, sources)


# ---------------------------------------------------------------- commands


class Outputs:
    """Collects the files a command writes, all inside one directory."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.root = cfg.output_dir
        self.files = []

    def _path(self, name: str) -> Path:
        p = (self.root / name).resolve()
        if self.root.resolve() not in p.parents:
            raise OSError(f"refusing to write outside {self.root}")
        return p

    def text(self, name: str, data: str, fmt: str | None = None):
        if fmt is not None and fmt not in self.cfg.formats:
            return
        atomic_write(self._path(name), data)
        self.files.append(name)

    def json(self, name: str, obj):
        self.text(name, to_json(obj), "json")

    def csv(self, name: str, rows: list, columns: list | None = None):
        self.text(name, table_csv(rows, columns), "csv")

    def figure(self, name: str, fn, *args, **kw):
        if not self.cfg.figures:
            return
        fn(*args, self._path(name), **kw)
        self.files.append(name)


def _stream(cfg: RunConfig):
    from .rng import NoiseStream

    return NoiseStream(cfg.seed)


def cmd_simulate(cfg: RunConfig, out: Outputs) -> dict:
    from .gaussian import sample_mu
    from .lattice import FrequencyLattice, PairState
    from .nonlinear import SpdeRun, run_spde

    lat = FrequencyLattice(cfg.params.n_max)
    stream = _stream(cfg)
    init = sample_mu(lat, stream, cfg.count) if cfg.initial == "mu" else PairState.zeros(lat, (cfg.count,))
    run = SpdeRun(cfg.params, init, cfg.dt, cfg.steps, stream, cfg.record_stride,
                  noise_scale=1.0 if cfg.noise else 0.0, nonlinearity_scale=1.0 if cfg.nonlinear else 0.0,
                  sigma=cfg.sigma, grid_size=cfg.grid_size, blowup_threshold=cfg.blowup_threshold)
    traj = run_spde(run)
    out.text("trajectory.csv", traj.to_csv(), "csv")
    summary = {"manifest": run.manifest(), "paths": traj.count, "blowups": int((~traj.alive).sum()),
               "blowup_steps": [int(s) for s in traj.blowup_step]}
    out.json("summary.json", summary)
    out.figure("trajectory.png", _plot("trajectory_figure"), traj)
    if summary["blowups"]:
        raise NumericalFailure(f"{summary['blowups']} of {traj.count} paths exceeded {cfg.blowup_threshold:g}")
    return summary


def cmd_sample_gibbs(cfg: RunConfig, out: Outputs) -> dict:
    from .gibbs import interaction_energy, sample_rho_n

    ens = sample_rho_n(cfg.params, cfg.count, _stream(cfg), cfg.sigma)
    psi = np.atleast_2d(ens.states.psi.coeffs)
    zero = ens.states.lattice.index_of((0, 0))
    occ = np.abs(psi[:, zero]) ** 2
    energy = np.atleast_1d(interaction_energy(ens.states.psi, cfg.params.n, ens.sigma))
    w = ens.weights
    rows = [{"sample": i, "log_weight": float(ens.log_weight[i]), "weight": float(w[i]),
             "interaction_energy": float(energy[i]), "occupancy_0": float(occ[i])} for i in range(len(w))]
    out.csv("samples.csv", rows)
    summary = {"count": cfg.count, "ess": ens.ess, "low_ess": ens.low_ess, "sigma": ens.sigma,
               "mean_occupancy_0": ens.mean(occ), "se_occupancy_0": ens.standard_error(occ),
               "mean_interaction_energy": ens.mean(energy), "se_interaction_energy": ens.standard_error(energy)}
    out.json("summary.json", summary)
    out.figure("log_weights.png", _plot("weights_figure"), ens.log_weight)
    return summary


def cmd_invariance(cfg: RunConfig, out: Outputs) -> dict:
    from .gibbs import dt_bias_profile, invariance_test

    rep = invariance_test(cfg.params, cfg.dt, cfg.params.horizon, cfg.count, _stream(cfg),
                          nonlinear=cfg.nonlinear, sigma=cfg.sigma)
    out.csv("invariance.csv", rep.rows)
    summary = {"invariance": rep.as_dict()}
    out.figure("zscores.png", _plot("zscore_figure"), rep.rows, title=f"dt = {cfg.dt:g}")
    if cfg.bias_dts:
        bias = dt_bias_profile(cfg.params, cfg.bias_dts, cfg.bias_ref, cfg.params.horizon, cfg.count, _stream(cfg),
                               sigma=cfg.sigma)
        out.csv("dt_bias.csv", bias.rows)
        summary["dt_bias"] = bias.as_dict()
    out.json("invariance.json", summary)
    if rep.survivors == 0:
        raise NumericalFailure("every path blew up")
    return {"max_abs_z": rep.max_abs_z, "ess": rep.ess, "survivors": rep.survivors}


def _sweep_values(cfg: RunConfig) -> list:
    from .experiments import dyadic

    return dyadic(cfg.j_min, cfg.j_max)


def _write_rate(cfg: RunConfig, out: Outputs, rep, xlabel: str) -> dict:
    out.csv("sweep.csv", rep.rows())
    out.json("sweep.json", rep.as_dict())
    out.figure("sweep.png", _plot("rate_figure"), rep, xlabel=xlabel, title=f"{cfg.command} ({cfg.mode})")
    if rep.extra.get("survivors") == 0:
        raise NumericalFailure("every path blew up")
    return {"slope": rep.slope, "r_squared": rep.r_squared, "slope_ci": list(rep.slope_ci)}


def cmd_nrl(cfg: RunConfig, out: Outputs) -> dict:
    from .experiments import nrl_deterministic_sweep, nrl_stochastic_sweep

    eps = _sweep_values(cfg)
    if cfg.mode == "deterministic":
        rep = nrl_deterministic_sweep(cfg.params, eps, sigma=cfg.norm_index, theta=cfg.theta)
    else:
        rep = nrl_stochastic_sweep(cfg.params, eps, cfg.dt, cfg.count, _stream(cfg), delta=cfg.delta,
                                   nonlinear=cfg.nonlinear and cfg.mode == "stochastic", noise=cfg.noise,
                                   sigma=cfg.sigma)
    return _write_rate(cfg, out, rep, "eps")


def cmd_url(cfg: RunConfig, out: Outputs) -> dict:
    from .experiments import url_deterministic_sweep, url_stochastic_sweep

    a2 = _sweep_values(cfg)
    if cfg.mode == "deterministic":
        rep = url_deterministic_sweep(cfg.alpha1, a2, cfg.params, sigma=cfg.norm_index)
    else:
        rep = url_stochastic_sweep(cfg.alpha1, a2, cfg.params, cfg.dt, cfg.count, _stream(cfg), delta=cfg.delta,
                                   nonlinear=cfg.nonlinear and cfg.mode == "stochastic", noise=cfg.noise,
                                   sigma=cfg.sigma)
    return _write_rate(cfg, out, rep, "|Im alpha|")


def cmd_wick(cfg: RunConfig, out: Outputs) -> dict:
    from .experiments import wick_cauchy_test

    rep = wick_cauchy_test(cfg.n_values, cfg.wick_m, cfg.wick_n, cfg.count, _stream(cfg), delta=cfg.delta)
    out.csv("pairs.csv", rep.pairs)
    out.json("wick_cauchy.json", rep.as_dict())
    out.figure("wick_cauchy.png", _plot("wick_figure"), rep)
    return {"spearman_rho": rep.spearman_rho, "spearman_p": rep.spearman_p, "decreasing": rep.decreasing}


def cmd_bounds(cfg: RunConfig, out: Outputs) -> dict:
    from .symbols import probe_base_bounds

    grid = np.geomspace(cfg.s_min, cfg.s_max, cfg.s_points)
    results, rows = {}, []
    for a in cfg.alphas:
        key = f"{a.real:g}{a.imag:+g}i"
        entries = probe_base_bounds(a, grid)
        results[key] = entries
        for e in entries:
            rows.append({"alpha": key, **e})
    out.csv("bounds.csv", rows, ["alpha", "item", "pass", "worst_margin", "argmin_s", "grid_size", "statement"])
    all_pass = all(e["pass"] is not False for v in results.values() for e in v)
    out.json("bounds.json", {"s_grid": [cfg.s_min, cfg.s_max, cfg.s_points], "all_pass": all_pass,
                             "results": results})
    out.figure("bounds.png", _plot("bounds_figure"), results)
    return {"all_pass": all_pass}


def cmd_energy(cfg: RunConfig, out: Outputs) -> dict:
    from .experiments import energy_uniformity_probe, standard_fixtures
    from .lattice import FrequencyLattice

    fixtures = standard_fixtures(FrequencyLattice(cfg.params.n_max), seed=cfg.seed)
    probe = energy_uniformity_probe(cfg.alphas, _sweep_values(cfg), fixtures, cfg.params, sigma=cfg.energy_sigma)
    rows = []
    for key, table in probe.fixture_constants.items():
        for name, vals in table.items():
            for eps, c in zip(probe.eps_values, vals):
                rows.append({"alpha": key, "fixture": name, "eps": eps, "constant": c})
    out.csv("energy.csv", rows)
    out.json("energy.json", probe.as_dict())
    out.figure("energy.png", _plot("energy_figure"), probe)
    return {"ratio": probe.ratio, "spearman_p": probe.spearman_p}


HANDLERS = {
    "simulate": cmd_simulate,
    "sample-gibbs": cmd_sample_gibbs,
    "invariance-test": cmd_invariance,
    "nrl-sweep": cmd_nrl,
    "url-sweep": cmd_url,
    "wick-cauchy": cmd_wick,
    "verify-bounds": cmd_bounds,
    "energy-probe": cmd_energy,
}


HELP = {
    "simulate": "run the renormalized Galerkin equation and dump the trajectory",
    "sample-gibbs": "importance-sample the truncated Gibbs measure",
    "invariance-test": "z-test Gibbs invariance of the dynamics (optionally with a dt-bias profile)",
    "nrl-sweep": "eps -> 0 convergence rate sweep",
    "url-sweep": "Im alpha -> 0 convergence rate sweep",
    "wick-cauchy": "Cauchy trend of Wick powers across truncations",
    "verify-bounds": "check the elementary symbol bounds on a log grid",
    "energy-probe": "empirical energy constants across (alpha, eps)",
}


def _plot(name: str):
    from . import plotting

    return getattr(plotting, name)


def _error_payload(code: int, kind: str, message: str, problems: list | None = None) -> dict:
    out = {"status": "error", "exit_code": code, "error": kind, "message": message}
    if problems:
        out["problems"] = problems
    return out


def run(cfg: RunConfig) -> int:
    """Run one configured command; always leaves ``manifest.json`` behind."""
    from .gaussian import TransitionError

    out = Outputs(cfg)
    manifest = {"package_version": __version__, "numpy": np.__version__, "config": cfg.as_dict(),
                "sources": cfg.sources}
    code, result, error = EXIT_OK, None, None
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        payload = _error_payload(EXIT_IO, "io", str(exc))
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return EXIT_IO
    try:
        result = HANDLERS[cfg.command](cfg, out)
    except NumericalFailure as exc:
        code, error = EXIT_NUMERIC, _error_payload(EXIT_NUMERIC, "numerical", str(exc))
    except (TransitionError, FloatingPointError, np.linalg.LinAlgError) as exc:
        code, error = EXIT_NUMERIC, _error_payload(EXIT_NUMERIC, "numerical", str(exc))
    except ValueError as exc:
        code, error = EXIT_CONFIG, _error_payload(EXIT_CONFIG, "validation", str(exc))
    except OSError as exc:
        code, error = EXIT_IO, _error_payload(EXIT_IO, "io", str(exc))
    manifest.update({"status": "ok" if code == EXIT_OK else "error", "exit_code": code, "outputs": out.files,
                     "result": result})
    if error is not None:
        manifest["failure"] = error
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
    try:
        atomic_write(cfg.output_dir / "manifest.json", to_json(manifest))
        if error is not None:
            atomic_write(cfg.output_dir / "error.json", to_json(error))
    except OSError as exc:
        print(json.dumps(_error_payload(EXIT_IO, "io", str(exc)), sort_keys=True), file=sys.stderr)
        return EXIT_IO
    return code


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgspde", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file (flags override its values)")
    for key, opt in OPTIONS.items():
        flag = "--" + key.replace("_", "-")
        if opt.flag_kind == "bool":
            common.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None, help=opt.help)
        elif opt.flag_kind == "list":
            common.add_argument(flag, dest=key, nargs="+", default=None, help=opt.help)
        else:
            common.add_argument(flag, dest=key, default=None, help=opt.help)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def main(argv: list | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: getattr(args, k) for k in OPTIONS}
    try:
        cfg = parse_config(args.command, args.config, flags)
    except ConfigError as exc:
        payload = _error_payload(EXIT_CONFIG, "validation", "invalid configuration", exc.problems)
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
