"""Command-line front end.

Subcommands ``test-indep``, ``power``, ``pickands``, ``imse`` and ``verify``.
Exit codes: 0 success, 2 data errors, 3 configuration errors.

Option values are resolved in this order: command line, ``--config`` file
(``key = value`` lines), the ``--paper`` preset, built-in defaults.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .core import RngStream, TiePolicy, compute_ranks, read_sample_csv, write_rows_csv
from .exceptions import BetaCopulaError, DimensionError, SampleError, TieError
from .inference import (
    QuadratureSpec,
    Variant,
    imse_study,
    independence_test,
    pickands_curve,
    power_sweep,
)
from .lemmas import CHECKS, run_lemma_suite
from .models import CopulaModel, parse_model_spec

SEED_ENV = "BETACOPULA_SEED"
DEFAULT_GAMMAS = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75)
PAPER_PRESET = {"B": 10000, "reps": 1000, "alpha": 0.05}
# keys that never change results and stay out of the config digest
_NON_RESULT_KEYS = {"out", "threads", "config", "summary", "paper", "model_obj"}


class ConfigError(Exception):
    """Invalid option values or an unreadable configuration file."""


class DataError(Exception):
    """Missing or malformed input data."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


_DEFAULTS: dict[str, dict[str, Any]] = {
    "test-indep": {"gamma": 1.0, "B": 1000, "alpha": 0.05, "grid_m": 101, "mc_nodes": 2**14, "format": "json"},
    "power": {"model": "family=t,nu=2", "n": 100, "gammas": DEFAULT_GAMMAS, "reps": 1000, "B": 1000,
              "alpha": 0.05, "grid_m": 101, "mc_nodes": 2**14, "format": "csv"},
    "pickands": {"model": "family=gumbel,alpha=0.5", "n": 1000, "grid": 101, "variant": "both", "format": "csv"},
    "imse": {"model": "family=gumbel,alpha=0.5", "n": 50, "M": 2000, "variant": "both", "format": "csv"},
    "verify": {"only": None, "format": "json"},
}


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, help=f"master seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--threads", type=int, default=None, help="worker threads; never changes results")
    p.add_argument("--config", help="file of 'key = value' lines mirroring the flags")
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--paper", action="store_true", default=None,
                   help="Table 1 preset: B=10000, reps=1000, alpha=0.05")


def _add_test_options(p: argparse.ArgumentParser):
    p.add_argument("--gamma", type=float, help="weight exponent in [0, 2)")
    p.add_argument("--B", type=int, help="null replicates (>= 100)")
    p.add_argument("--alpha", type=float, help="significance level")
    p.add_argument("--grid-m", dest="grid_m", type=int, help="midpoint nodes per axis (odd)")
    p.add_argument("--mc-nodes", dest="mc_nodes", type=int, help="Monte Carlo cube nodes for d >= 3")


def build_parser() -> _Parser:
    parser = _Parser(prog="betacopula", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"betacopula {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test-indep", help="weighted Cramér-von Mises test of independence")
    p.add_argument("--data", help="CSV sample, one observation per row")
    _add_test_options(p)
    _add_common(p)

    p = sub.add_parser("power", help="rejection rates over a grid of gamma")
    p.add_argument("--model", help="model spec, e.g. 'family=t,nu=2'")
    p.add_argument("--n", type=int, help="sample size")
    p.add_argument("--gammas", type=_float_list, help="comma-separated gamma values")
    p.add_argument("--reps", type=int, help="Monte Carlo replicates")
    _add_test_options(p)
    p.set_defaults(gamma=None)
    _add_common(p)

    p = sub.add_parser("pickands", help="Pickands dependence function curves")
    p.add_argument("--model", help="model spec or 'file:<path.csv>'")
    p.add_argument("--n", type=int, help="sample size for synthetic data")
    p.add_argument("--grid", type=int, help="grid points per simplex edge")
    p.add_argument("--variant", choices=["both", "beta", "cfg"])
    p.add_argument("--summary", help="optional JSON summary path")
    _add_common(p)

    p = sub.add_parser("imse", help="integrated mean squared error of Pickands estimators")
    p.add_argument("--model", help="extreme-value model spec")
    p.add_argument("--n", type=int, help="sample size")
    p.add_argument("--M", type=int, help="Monte Carlo samples (>= 100)")
    p.add_argument("--variant", choices=["both", "beta", "cfg"])
    _add_common(p)

    p = sub.add_parser("verify", help="lemma verification suite")
    p.add_argument("--only", action="append", choices=sorted(CHECKS), help="run a single check (repeatable)")
    _add_common(p)
    return parser


# --- configuration --------------------------------------------------------------


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    out: str | None = None

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    def digest(self) -> str:
        payload = {"command": self.command, "seed": self.seed,
                   **{k: v for k, v in self.values.items() if k not in _NON_RESULT_KEYS}}
        text = json.dumps(payload, sort_keys=True, default=list)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def provenance(self) -> list[str]:
        return [f"betacopula {__version__}", f"command {self.command}",
                f"config {self.digest()}", f"master_seed {self.seed}"]


def _read_config_file(path: str) -> dict[str, str]:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for no, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{no}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _convert(sub: argparse.ArgumentParser, key: str, raw: str):
    for action in sub._actions:
        if action.dest == key:
            if action.option_strings and action.nargs == 0:
                return raw.lower() in {"1", "true", "yes", "on"}
            if action.type is None:
                return [raw] if isinstance(action, argparse._AppendAction) else raw
            try:
                value = action.type(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"config key {key}: {exc}") from None
            return [value] if isinstance(action, argparse._AppendAction) else value
    raise ConfigError(f"unknown config key {key!r}")


def resolve_config(args: argparse.Namespace, sub: argparse.ArgumentParser) -> RunConfig:
    given = {k: v for k, v in vars(args).items() if v is not None and k != "command"}
    from_file = {}
    if args.config:
        from_file = {k: _convert(sub, k, v) for k, v in _read_config_file(args.config).items()}
    merged = dict(_DEFAULTS[args.command])
    paper = given.get("paper", from_file.get("paper", False))
    if paper:
        merged.update({k: v for k, v in PAPER_PRESET.items() if k in merged})
    merged.update(from_file)
    merged.update(given)
    seed = merged.pop("seed", None)
    if seed is None:
        env = os.environ.get(SEED_ENV)
        try:
            seed = int(env) if env else 0
        except ValueError:
            raise ConfigError(f"${SEED_ENV} must be an integer, got {env!r}") from None
    threads = merged.pop("threads", 1)
    out = merged.pop("out", None)
    for key in ("config", "paper", "command"):
        merged.pop(key, None)
    cfg = RunConfig(args.command, merged, int(seed), int(threads), out)
    validate(cfg)
    return cfg


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def validate(cfg: RunConfig):
    """Check every numeric option before any computation starts."""
    v = cfg.values
    _require(cfg.threads >= 1, "threads must be at least 1")
    _require(0 <= cfg.seed < 2**64, "seed must be a 64-bit unsigned integer")
    if "gamma" in v and v["gamma"] is not None:
        _require(0.0 <= v["gamma"] < 2.0, f"gamma must lie in [0, 2), got {v['gamma']}")
    if "gammas" in v:
        _require(len(v["gammas"]) > 0, "gammas must not be empty")
        for g in v["gammas"]:
            _require(0.0 <= g < 2.0, f"every gamma must lie in [0, 2), got {g}")
    if "B" in v:
        _require(v["B"] >= 100, f"B must be at least 100, got {v['B']}")
    if "alpha" in v:
        _require(0.0 < v["alpha"] < 1.0, f"alpha must lie in (0, 1), got {v['alpha']}")
    if "grid_m" in v:
        _require(v["grid_m"] >= 1 and v["grid_m"] % 2 == 1, f"grid-m must be a positive odd integer, got {v['grid_m']}")
    if "mc_nodes" in v:
        _require(v["mc_nodes"] >= 4096, f"mc-nodes must be at least 4096, got {v['mc_nodes']}")
    if "reps" in v:
        _require(v["reps"] >= 1, "reps must be positive")
    if "M" in v:
        _require(v["M"] >= 100, f"M must be at least 100, got {v['M']}")
    if "n" in v:
        _require(v["n"] >= 2, f"n must be at least 2, got {v['n']}")
    if "grid" in v:
        _require(v["grid"] >= 2, "grid must be at least 2")
    if cfg.command == "test-indep":
        _require(bool(v.get("data")), "test-indep needs --data")
    if "model" in v and not str(v["model"]).startswith("file:"):
        try:
            v["model_obj"] = parse_model_spec(v["model"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad model spec: {exc}") from None
        if cfg.command == "imse":
            _require(v["model_obj"].is_extreme_value, "imse needs an extreme-value model")
    if cfg.command == "pickands" and str(v["model"]).startswith("file:"):
        _require(len(v["model"]) > 5, "file: model needs a path")


# --- commands -------------------------------------------------------------------


def _open_out(cfg: RunConfig):
    return open(cfg.out, "w", newline="") if cfg.out else sys.stdout


def _emit_json(cfg: RunConfig, payload: dict):
    payload = {"provenance": cfg.provenance(), **payload}
    text = json.dumps(payload, indent=2, sort_keys=False, default=_json_default) + "\n"
    fh = _open_out(cfg)
    try:
        fh.write(text)
    finally:
        if fh is not sys.stdout:
            fh.close()


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _emit_table(cfg: RunConfig, header: list[str], rows: list[tuple]):
    if cfg.format == "json":
        _emit_json(cfg, {"rows": [dict(zip(header, r)) for r in rows]})
        return
    fh = _open_out(cfg)
    try:
        write_rows_csv(fh, header, rows, cfg.provenance())
    finally:
        if fh is not sys.stdout:
            fh.close()


def _quad(cfg: RunConfig) -> QuadratureSpec:
    return QuadratureSpec(grid_m=cfg.grid_m, mc_nodes=cfg.mc_nodes)


def _load_data(path: str) -> np.ndarray:
    if not os.path.exists(path):
        raise DataError(f"data file not found: {path}")
    try:
        return read_sample_csv(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def cmd_test_indep(cfg: RunConfig) -> int:
    x = _load_data(cfg.data)
    report = independence_test(x, cfg.gamma, cfg.B, cfg.alpha, _quad(cfg), RngStream(cfg.seed),
                               threads=cfg.threads)
    _emit_json(cfg, report.to_dict())
    return 0


def cmd_power(cfg: RunConfig) -> int:
    rows = power_sweep(cfg.model_obj, cfg.n, cfg.gammas, cfg.reps, cfg.B, cfg.alpha,
                       RngStream(cfg.seed), _quad(cfg), cfg.threads)
    header = ["n", "gamma_or_alpha", "estimate", "mc_se", "reps", "seed"]
    _emit_table(cfg, header, [(r.n, r.gamma, r.power, r.mc_se, r.reps, r.seed) for r in rows])
    return 0


def _variants(name: str) -> list[Variant]:
    return [Variant.CFG, Variant.BETA] if name == "both" else [Variant.parse(name)]


def cmd_pickands(cfg: RunConfig) -> int:
    model: CopulaModel | None = cfg.values.get("model_obj")
    if model is None:
        x = _load_data(cfg.model[len("file:"):])
    else:
        _require(model.is_extreme_value, "pickands needs an extreme-value model or file: data")
        x = model.sample(cfg.n, RngStream(cfg.seed).named("pickands").generator())
    ranks = compute_ranks(x, TiePolicy.ERROR)
    if ranks.d not in (2, 3):
        raise DimensionError("Pickands curves are available for d in {2, 3}")
    coords = ["t"] if ranks.d == 2 else ["t1", "t2"]
    header = ["variant", *coords, "estimate"] + (["true"] if model is not None else [])
    rows, summary = [], {}
    for variant in _variants(cfg.variant):
        curve = pickands_curve(ranks, cfg.grid, variant)
        truth = None
        if model is not None:
            t_arg = curve.t_grid[:, 0] if ranks.d == 2 else curve.t_grid
            truth = np.asarray(model.pickands(t_arg), dtype=float)
        for k, row in enumerate(curve.rows()):
            rows.append((variant.value, *row) + ((float(truth[k]),) if truth is not None else ()))
        info = {"min": float(curve.estimates.min()), "max": float(curve.estimates.max())}
        if truth is not None:
            info["max_abs_error"] = float(np.max(np.abs(curve.estimates - truth)))
        summary[variant.value] = info
    _emit_table(cfg, header, rows)
    if cfg.values.get("summary"):
        with open(cfg.summary, "w") as fh:
            json.dump({"provenance": cfg.provenance(), "n": ranks.n, "d": ranks.d, "variants": summary}, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_imse(cfg: RunConfig) -> int:
    model = cfg.model_obj
    param = model.params.get("alpha", "")
    rows = []
    for variant in _variants(cfg.variant):
        imse, se = imse_study(model, cfg.n, cfg.M, variant, rng=RngStream(cfg.seed), threads=cfg.threads)
        rows.append((cfg.n, param, imse, se, cfg.M, cfg.seed, variant.value))
    _emit_table(cfg, ["n", "gamma_or_alpha", "estimate", "mc_se", "reps", "seed", "variant"], rows)
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    _emit_json(cfg, run_lemma_suite(cfg.only, RngStream(cfg.seed)))
    return 0


COMMANDS = {
    "test-indep": cmd_test_indep,
    "power": cmd_power,
    "pickands": cmd_pickands,
    "imse": cmd_imse,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        cfg = resolve_config(args, sub)
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"betacopula: configuration error: {exc}", file=sys.stderr)
        return 3
    except (DataError, SampleError, TieError, DimensionError) as exc:
        print(f"betacopula: data error: {exc}", file=sys.stderr)
        return 2
    except BetaCopulaError as exc:
        print(f"betacopula: configuration error: {exc}", file=sys.stderr)
        return 3


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
