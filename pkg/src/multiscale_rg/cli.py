"""Command-line entry point: ``multiscale-rg {simulate,rg,mc,phase,verify}``.

Each command reads an optional YAML config, applies ``--set key=value``
overrides (dotted keys reach nested tables), runs, and writes its data files,
a graymap where it makes sense, PNG figures, and the resolved
``config.yaml``.  Re-running with that file reproduces every data file
byte for byte.

Exit codes: 0 success, 1 property failure, 2 config error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import copy
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import yaml

from . import io, plotting
from .dyadic import DyadicTime, LatticePoint
from .lattice import cantor_encode, cantor_grid
from .model import BUILTIN_MODELS, ModelSpec, ProblemSpec, Space, State, phase
from .noise import Bernoulli, NoiseStream, UniformCircle, derive_seed, noise_from_dict
from .rg import map_table_export, rg_apply
from .solver import ConstAt, Cutoff, MapReg, flow_psi, solve_regularized, solve_strong
from .stochastic import (estimate_expectations, fit_convergence, limit_kernel_check,
                         noise_realization_map, phase_coefficients, sample_solution)
from .verify import DEFAULT_SIZES, run_verify

OUT_ENV = "MULTISCALE_RG_OUT"

EXIT_OK, EXIT_PROPERTY, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class ConfigError(ValueError):
    """The run configuration is malformed or asks for something unsupported."""


# Tracked points for the model B convergence plot (chosen on a pilot run).
FIG10_POINTS = [[5, "29/32"], [5, "33/32"], [5, "37/32"], [5, "39/32"], [5, "45/32"]]

DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": {
        "model": "A", "initial": [1], "boundary": [1, 0], "N": 12, "horizon": "1",
        "regularization": "cutoff", "noise": None, "seed": 0, "lane": 0,
        "strong": False, "max_scale": None, "plots": True,
    },
    "rg": {
        "model": "A", "N": [1, 2, 3, 4, 10], "depth": 8, "regularization": "cutoff",
        "mode": "deterministic", "noise": {"kind": "bernoulli", "p": "1/2"},
        "seeds": 2, "seed": 0, "plots": True,
    },
    "mc": {
        "model": "B", "initial": [0, 1], "boundary": [1, 0], "N": "6..20",
        "points": FIG10_POINTS, "samples": 10000, "seed": 0,
        "noise": {"kind": "bernoulli", "p": "1/2"}, "batch": 4096, "workers": 1,
        "fit_tail": None, "raster": None, "plots": True,
    },
    "phase": {
        "model": "phase", "N": "2..12", "initial": ["5/16", "9/16", "1/8", "3/4", "3/8"],
        "t": "1/2", "kernel_N": 12, "samples": 10000, "components": 5,
        "noise": {"kind": "uniform"}, "seed": 0, "plots": True,
    },
    "verify": {"seed": 0, "sizes": {}, "fault": None},
}


# --- config parsing ------------------------------------------------------------

def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {k!r}")
        out[k] = v
    return out


def _apply_set(cfg: dict, item: str) -> None:
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse value of {key}: {e}") from None
    *parents, leaf = key.split(".")
    node = cfg
    for p in parents:
        if not isinstance(node.get(p), dict):
            node[p] = {}
        node = node[p]
    node[leaf] = value


def load_config(command: str, path: str | None, sets: list[str]) -> dict:
    raw: dict = {}
    if path:
        try:
            raw = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a mapping")
        raw.pop("command", None)
    for item in sets:
        _apply_set(raw, item)
    return _merge(DEFAULTS[command], raw)


def _fraction(v, what: str) -> Fraction:
    if isinstance(v, bool):
        raise ConfigError(f"{what} must be a number, got {v!r}")
    try:
        if isinstance(v, (list, tuple)) and len(v) == 2:
            return Fraction(int(v[0]), 1 << int(v[1]))
        return Fraction(str(v))
    except (ValueError, TypeError, ZeroDivisionError):
        raise ConfigError(f"{what} must be a fraction, got {v!r}") from None


def parse_time(v, what: str = "time") -> DyadicTime:
    try:
        t = DyadicTime.from_fraction(_fraction(v, what))
    except ValueError as e:
        raise ConfigError(f"{what}: {e}") from None
    if t < DyadicTime(0):
        raise ConfigError(f"{what} must be non-negative")
    return t


def parse_levels(v, what: str = "N") -> list[int]:
    if isinstance(v, str) and ".." in v:
        lo, _, hi = v.partition("..")
        try:
            levels = list(range(int(lo), int(hi) + 1))
        except ValueError:
            raise ConfigError(f"{what} range must look like 'a..b', got {v!r}") from None
    elif isinstance(v, list):
        levels = v
    else:
        levels = [v]
    if not levels or any(not isinstance(n, int) or isinstance(n, bool) for n in levels):
        raise ConfigError(f"{what} must be integers, got {v!r}")
    if min(levels) < 1:
        raise ConfigError(f"{what} must be >= 1, got {v!r}")
    return sorted(set(levels))


def parse_model(v) -> ModelSpec:
    if isinstance(v, str):
        if v not in BUILTIN_MODELS:
            raise ConfigError(f"unknown model {v!r}; built-ins are {sorted(BUILTIN_MODELS)}")
        return BUILTIN_MODELS[v]
    if isinstance(v, dict):
        try:
            space = Space(v.get("space", "bit"))
            f, g = v["f"], v["g"]
            if space is Space.BIT:
                return ModelSpec.bit(f, g, v.get("name", "custom"))
            return ModelSpec.phase(f, g, v.get("name", "custom"))
        except (KeyError, ValueError, TypeError) as e:
            raise ConfigError(f"bad inline model: {e}") from None
    raise ConfigError(f"model must be a name or a table, got {v!r}")


def _values(model: ModelSpec, vals, what: str) -> tuple[int, ...]:
    if not isinstance(vals, list):
        raise ConfigError(f"{what} must be a list")
    if model.space is Space.BIT:
        if any(x not in (0, 1) or isinstance(x, bool) for x in vals):
            raise ConfigError(f"{what} must hold bits 0/1, got {vals!r}")
        return tuple(vals)
    try:
        return tuple(phase(_fraction(x, what)) for x in vals)
    except ValueError as e:
        raise ConfigError(f"{what}: {e}") from None


def parse_problem(cfg: dict, model: ModelSpec) -> ProblemSpec:
    try:
        return ProblemSpec(model, State(_values(model, cfg["initial"], "initial")),
                           _values(model, cfg["boundary"], "boundary"))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad initial or boundary values: {e}") from None


def parse_regularization(v):
    if v is None or v == "cutoff":
        return Cutoff()
    if v == "const":
        return ConstAt(1)
    if isinstance(v, dict):
        kind = v.get("kind")
        if kind == "cutoff":
            return Cutoff()
        if kind == "const":
            return ConstAt(int(v.get("value", 1)))
        if kind == "map":
            try:
                table = {tuple(k): tuple(val) for k, val in v["table"]}
                return MapReg(table, int(v["depth"]))
            except (KeyError, TypeError, ValueError) as e:
                raise ConfigError(f"bad map regularization: {e}") from None
    raise ConfigError(f"unknown regularization {v!r}")


def parse_noise(v, model: ModelSpec):
    if v is None:
        return Bernoulli() if model.space is Space.BIT else UniformCircle()
    if not isinstance(v, dict):
        raise ConfigError(f"noise must be a table, got {v!r}")
    try:
        spec = noise_from_dict(v)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad noise: {e}") from None
    if spec.space is not model.space:
        raise ConfigError(f"{spec.describe()['kind']} noise does not fit a {model.space.value} model")
    return spec


def _int(cfg: dict, key: str, lo: int = 0) -> int:
    v = cfg[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < lo:
        raise ConfigError(f"{key} must be an integer >= {lo}, got {v!r}")
    return v


def _time_cols(t: DyadicTime) -> list[int]:
    return [t.numerator, t.level]


# --- commands ------------------------------------------------------------------

def cmd_simulate(cfg: dict, out: Path) -> int:
    model = parse_model(cfg["model"])
    problem = parse_problem(cfg, model)
    N = _int(cfg, "N", 1)
    horizon = parse_time(cfg["horizon"], "horizon")
    if horizon.level > N + 1:
        raise ConfigError(f"horizon {horizon} is finer than scale N+1 = {N + 1}")
    top = N + 1 if cfg["max_scale"] is None else _int(cfg, "max_scale", 1)
    top = min(top, N + 1)
    reg_cfg = cfg["regularization"]
    if reg_cfg == "stochastic" or (isinstance(reg_cfg, dict) and reg_cfg.get("kind") == "stochastic"):
        spec = parse_noise(cfg["noise"], model)
        sol = sample_solution(problem, N, NoiseStream(spec, _int(cfg, "seed"), _int(cfg, "lane")), horizon)
    else:
        sol = solve_regularized(problem, N, parse_regularization(reg_cfg), horizon)
    rows = ([n, *_time_cols(DyadicTime(m, n)), v]
            for n in range(top + 1) for m, v in enumerate(sol.rows[n]))
    io.write_csv(out / "lattice.csv", "lattice", ["n", "t_num", "t_level", "value"], rows)
    img = io.lattice_raster(sol.rows, top, horizon.ticks(top), model.space)
    io.write_pgm(out / "lattice.pgm", img)
    if cfg["strong"]:
        if model.space is not Space.BIT:
            raise ConfigError("strong-solution mode needs a bit model")
        report = solve_strong(problem, horizon)
        io.write_json(out / "blowup.json", "blowup", report.to_dict())
    if cfg["plots"]:
        plotting.plot_raster(img, out / "lattice.png", f"model {model.name}, N = {N}", float(horizon))
    return EXIT_OK


def _bit_model(cfg: dict) -> ModelSpec:
    model = parse_model(cfg["model"])
    if model.space is not Space.BIT:
        raise ConfigError("map tables use the Cantor representation and need a bit model")
    return model


def _map_rows(pairs):
    return ([str(x), str(y), f"{float(x):.12f}", f"{float(y):.12f}"] for x, y in pairs)


def cmd_rg(cfg: dict, out: Path) -> int:
    model = _bit_model(cfg)
    levels = parse_levels(cfg["N"])
    depth = _int(cfg, "depth", 1)
    cols = ["x_in", "x_out", "x_in_decimal", "x_out_decimal"]
    mode = cfg["mode"]
    if mode == "deterministic":
        reg = parse_regularization(cfg["regularization"])
        psi, level = flow_psi(model, 1, reg), 1
        tables = {}
        for N in levels:
            while level < N:
                psi, level = rg_apply(psi, model), level + 1
            pairs = map_table_export(psi, depth)
            io.write_csv(out / f"map_N{N}.csv", "map-table", cols, _map_rows(pairs))
            tables[f"N={N}"] = pairs
        if cfg["plots"]:
            plotting.plot_maps(tables, out / "maps.png", f"model {model.name}")
        return EXIT_OK
    if mode != "stochastic":
        raise ConfigError(f"rg mode must be deterministic or stochastic, got {mode!r}")
    spec = parse_noise(cfg["noise"], model)
    seeds, seed = _int(cfg, "seeds", 1), _int(cfg, "seed")
    grid = list(cantor_grid(depth))
    x_in = [cantor_encode(a) for a in grid]
    clouds = {}
    for N in levels:
        keys = [a.prefix(N) for a in grid]
        everything = []
        for s in range(seeds):
            fm = noise_realization_map(model, N, spec, derive_seed(seed, N, s))
            pairs = list(zip(x_in, (cantor_encode(b) for b in fm.evaluate_many(keys))))
            io.write_csv(out / f"map_N{N}_seed{s}.csv", "map-table", cols, _map_rows(pairs))
            everything += [[s, *r] for r in _map_rows(pairs)]
        io.write_csv(out / f"map_N{N}_all.csv", "map-samples", ["sample", *cols], everything)
        clouds[f"N={N}"] = [(float(r[3]), float(r[4])) for r in everything]
    if cfg["plots"]:
        plotting.plot_scatter_maps(clouds, out / "maps.png", f"model {model.name}, {seeds} samples")
    return EXIT_OK


def _points(raw) -> list[LatticePoint]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("points must be a non-empty list of [n, t]")
    try:
        return [LatticePoint.make(int(n), parse_time(t, "point time")) for n, t in raw]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad point list: {e}") from None


def cmd_mc(cfg: dict, out: Path) -> int:
    model = parse_model(cfg["model"])
    problem = parse_problem(cfg, model)
    levels = parse_levels(cfg["N"])
    points = _points(cfg["points"])
    samples = _int(cfg, "samples", 2)
    seed = _int(cfg, "seed")
    spec = parse_noise(cfg["noise"], model)
    for p in points:
        if p.scale > levels[0]:
            raise ConfigError(f"point {p.scale},{p.time} needs N >= {p.scale}")
    workers = _int(cfg, "workers", 1)
    est = estimate_expectations(problem, spec, levels, points, samples, seed,
                                batch=_int(cfg, "batch", 1), workers=workers)
    io.write_csv(out / "expectations.csv", "expectations",
                 ["N", "n", "t_num", "t_level", "mean", "ci"],
                 ([e.N, e.point.scale, *_time_cols(e.point.time), repr(e.mean), repr(e.ci)] for e in est))
    series: dict[LatticePoint, list[tuple[int, float, float]]] = {p: [] for p in points}
    for e in est:
        series[e.point].append((e.N, e.mean, e.ci))
    tail = cfg["fit_tail"]
    fits, fit_rows = {}, []
    for p in points:
        entry = {"n": p.scale, "t": _time_cols(p.time), "limit": None, "exponent": None,
                 "residual": None, "points": 0}
        if len(series[p]) >= 4:
            fit = fit_convergence([(N, m) for N, m, _ in series[p]], tail)
            entry.update(limit=fit.limit, exponent=fit.exponent, residual=fit.residual, points=fit.points)
            fits[f"({p.scale}, {p.time})"] = (fit.limit, fit.exponent, fit.residual)
        fit_rows.append(entry)
    io.write_json(out / "fits.json", "fits", {"samples": samples, "seed": seed, "fits": fit_rows})
    raster = cfg["raster"]
    if raster:
        _mean_raster(raster, problem, spec, samples, seed, workers, out, cfg["plots"])
    if cfg["plots"]:
        plotting.plot_expectations({f"({p.scale}, {p.time})": series[p] for p in points}, fits,
                                   out / "expectations.png")
    return EXIT_OK


def _mean_raster(raster: dict, problem, spec, samples: int, seed: int, workers: int,
                 out: Path, plots: bool) -> None:
    if not isinstance(raster, dict):
        raise ConfigError("raster must be a table with N, max_scale and horizon")
    try:
        N = int(raster["N"])
        top = int(raster.get("max_scale", min(N, 10)))
        horizon = parse_time(raster.get("horizon", "3/2"), "raster.horizon")
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"bad raster table: {e}") from None
    if not 1 <= top <= N:
        raise ConfigError("raster.max_scale must lie in 1..N")
    if horizon.level > top:
        raise ConfigError("raster.horizon must lie on the grid of raster.max_scale")
    ticks = horizon.ticks(top)
    pts = [LatticePoint(n, DyadicTime(m, n)) for n in range(1, top + 1)
           for m in range((ticks >> (top - n)) + 1)]
    est = estimate_expectations(problem, spec, [N], pts, samples, seed, workers=workers)
    means = {(e.point.scale, e.point.index): e.mean for e in est}
    io.write_csv(out / "mean_raster.csv", "expectations", ["N", "n", "t_num", "t_level", "mean", "ci"],
                 ([e.N, e.point.scale, *_time_cols(e.point.time), repr(e.mean), repr(e.ci)] for e in est))
    img = io.mean_raster(means, top, ticks)
    io.write_pgm(out / "mean_raster.pgm", img)
    if plots:
        plotting.plot_raster(img, out / "mean_raster.png", f"means, N = {N}", ticks / (1 << top))


def cmd_phase(cfg: dict, out: Path) -> int:
    model = parse_model(cfg["model"])
    if model.space is not Space.PHASE:
        raise ConfigError("phase command needs a circle model")
    levels = parse_levels(cfg["N"])
    p_rows = {}
    for N in levels:
        p_rows[N] = phase_coefficients(N, model=model).p
    io.write_json(out / "coefficients.json", "phase-coefficients", {
        "levels": [{"N": N, "p": {str(n): str(v) for n, v in sorted(row.items())}}
                   for N, row in p_rows.items()]})
    a = State(_values(model, cfg["initial"], "initial"))
    t = parse_time(cfg["t"], "t")
    spec = parse_noise(cfg["noise"], model)
    kN = _int(cfg, "kernel_N", 1)
    reports = limit_kernel_check(a, kN, t, _int(cfg, "samples", 2), spec, _int(cfg, "seed"),
                                 _int(cfg, "components", 1), model)
    io.write_json(out / "kernel_report.json", "kernel-report", {
        "N": kN, "t": _time_cols(t), "initial": [str(x) for x in cfg["initial"]],
        "components": [r.to_dict() for r in reports]})
    if cfg["plots"]:
        plotting.plot_coefficients(p_rows, out / "coefficients.png")
    return EXIT_OK


def cmd_verify(cfg: dict, out: Path) -> int:
    sizes = cfg["sizes"] or {}
    unknown = set(sizes) - set(DEFAULT_SIZES)
    if unknown:
        raise ConfigError(f"unknown verify sizes {sorted(unknown)}")
    fault = cfg["fault"]
    if fault is not None and not isinstance(fault, dict):
        raise ConfigError("fault must be a table with model, f and g")
    results = run_verify(sizes, _int(cfg, "seed"), fault)
    props = []
    for r in results:
        d = r.to_dict()
        d.pop("seconds")
        props.append(d)
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} ({r.checked} checked, {r.seconds:.2f}s)",
              file=sys.stderr)
    ok = all(r.passed for r in results)
    io.write_json(out / "verify.json", "verify", {"passed": ok, "properties": props})
    return EXIT_OK if ok else EXIT_PROPERTY


COMMANDS: dict[str, Callable[[dict, Path], int]] = {
    "simulate": cmd_simulate, "rg": cmd_rg, "mc": cmd_mc, "phase": cmd_phase, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multiscale-rg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} command")
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV}/{name} or ./out/{name})")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry; values are parsed as YAML")
        p.add_argument("--seed", type=int, help="shortcut for --set seed=...")
        if name in ("mc", "phase"):
            p.add_argument("--samples", type=int, help="shortcut for --set samples=...")
        if name != "verify":
            p.add_argument("--no-plots", action="store_true", help="skip PNG figures")
    return parser


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    base = os.environ.get(OUT_ENV)
    return Path(base) / args.command if base else Path("out") / args.command


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    sets = list(args.set)
    if args.seed is not None:
        sets.append(f"seed={args.seed}")
    if getattr(args, "samples", None) is not None:
        sets.append(f"samples={args.samples}")
    if getattr(args, "no_plots", False):
        sets.append("plots=false")
    try:
        cfg = load_config(args.command, args.config, sets)
        out = _out_dir(args)
        out.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](cfg, out)
        (out / "config.yaml").write_text(yaml.safe_dump({"command": args.command, **cfg}, sort_keys=True))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # noqa: BLE001
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return code


if __name__ == "__main__":
    sys.exit(main())
