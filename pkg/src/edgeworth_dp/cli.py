"""Command-line interface: calibration tables, epsilon-sigma curves,
Monte Carlo validation and private-training simulations.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 accounting failure (for example an unreachable privacy target).
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import io
import json
import math
import os
import platform
import sys
import tempfile
from typing import Any, Sequence

import numpy as np
import scipy

from . import __version__, kernels
from .calibration import INITIAL_STEP, MIN_STEP, SIGMA_INIT, calibrate_sigma, make_evaluator
from .edgeworth import QUADRATURE_RTOL, delta_of_epsilon_ew
from .errors import AccountingError
from .mechanism import MechanismSpec
from .montecarlo import mc_delta_grid
from .prv import GridConfig, delta_of_epsilon_prv
from .rdp import DEFAULT_ORDERS, rdp_delta

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_ACCOUNTING = 0, 1, 2, 3

BATCH_SIZE = 2000
PRESETS: dict[str, tuple[int, float]] = {
    "MNLI": (393_000, 1e-6),
    "QNLI": (105_000, 1e-6),
    "QQP": (364_000, 1e-6),
    "SST-2": (67_000, 1e-5),
}
ACCOUNTANTS = ("rdp", "prv", "ew")
CURVE_HEADER = "epsilon,sigma_rdp,sigma_prv,sigma_ew"

VALIDATION_GRID = {"q": [0.03], "sigma": [0.75, 1.0], "m": [1000],
                   "epsilon": [0.5, 1.0, 2.0]}
VALIDATION_SAMPLES = 200_000

_DEFAULTS: dict[str, Any] = {
    "preset": "all",
    "n_samples": None,
    "batch_size": None,
    "epsilon": None,
    "delta": None,
    "m": None,
    "m_sweep": None,
    "accountant": list(ACCOUNTANTS),
    "order_k": 2,
    "seed": 0,
    "out": None,
    "format": None,
    "berry_esseen": False,
    "mc_samples": VALIDATION_SAMPLES,
    "validation_grid": None,
    "ew_sigma_perturbation": 0.0,
    "dataset": None,
    "dim": 20,
    "classes": 2,
    "clip_norm": 1.0,
    "rank": 1,
    "hidden": None,
    "history_lag": 1,
    "sigma_override": None,
    "no_accounting": False,
    "baseline": False,
}


_COMMON_KEYS = ("preset", "n_samples", "batch_size", "epsilon", "delta", "m", "m_sweep",
                "accountant", "order_k", "seed", "format")
_COMMAND_KEYS = {
    "calibrate": _COMMON_KEYS,
    "curve": _COMMON_KEYS,
    "validate": tuple(k for k in _COMMON_KEYS if k not in ("m", "m_sweep"))
    + ("berry_esseen", "mc_samples", "validation_grid", "ew_sigma_perturbation"),
    "train-sim": _COMMON_KEYS[:-1] + ("dataset", "dim", "classes", "clip_norm", "rank",
                                      "hidden", "history_lag", "sigma_override",
                                      "no_accounting", "baseline"),
}


class ConfigError(Exception):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"field '{field}': {message}")
        self.field = field


# ---------------------------------------------------------------- parsing

def parse_grid(text, field: str) -> list[float]:
    """Parse ``8``, ``5:8:1`` (inclusive) or a list into floats."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return [float(text)]
    if isinstance(text, list):
        try:
            return [float(v) for v in text]
        except (TypeError, ValueError):
            raise ConfigError(field, f"expected numbers, got {text!r}") from None
    if not isinstance(text, str):
        raise ConfigError(field, f"cannot parse {text!r}")
    parts = text.split(":")
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(field, f"cannot parse {text!r}") from None
    if len(values) == 1:
        return values
    if len(values) != 3:
        raise ConfigError(field, "ranges are written lo:hi:step")
    lo, hi, step = values
    if step <= 0 or hi < lo:
        raise ConfigError(field, "range needs step > 0 and hi >= lo")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def _parse_m(value, presets: Sequence[str]) -> dict[str, int]:
    """``m`` as an integer for every preset or as ``NAME=m,...`` / a mapping."""
    if isinstance(value, str) and "=" in value:
        pairs = [p.split("=", 1) for p in value.split(",") if p]
        value = {k.strip(): v for k, v in pairs}
    if isinstance(value, dict):
        missing = [p for p in presets if p not in value]
        if missing:
            raise ConfigError("m", f"no step count for preset(s) {', '.join(missing)}")
        return {p: _positive_int(value[p], "m") for p in presets}
    m = _positive_int(value, "m")
    return {p: m for p in presets}


def _positive_int(value, field: str) -> int:
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected a positive integer, got {value!r}") from None
    if number != int(number) or number < 1:
        raise ConfigError(field, f"expected a positive integer, got {value!r}")
    return int(number)


def _seed(cfg: dict) -> int:
    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", f"expected a nonnegative integer, got {seed!r}")
    return seed


def _number(value, field: str, lo=None, hi=None, lo_open=False, hi_open=False) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(field, f"expected a number, got {value!r}") from None
    if lo is not None and (x < lo or (lo_open and x == lo)):
        raise ConfigError(field, f"{x:g} is out of range")
    if hi is not None and (x > hi or (hi_open and x == hi)):
        raise ConfigError(field, f"{x:g} is out of range")
    return x


@dataclasses.dataclass(frozen=True)
class Population:
    """A dataset preset (or custom size) with its privacy delta."""

    name: str
    n_samples: int
    batch_size: int
    delta: float

    @property
    def q(self) -> float:
        return self.batch_size / self.n_samples


def _populations(cfg: dict) -> list[Population]:
    batch = cfg["batch_size"]
    batch = BATCH_SIZE if batch is None else _positive_int(batch, "batch_size")
    if cfg["n_samples"] is not None:
        n = _positive_int(cfg["n_samples"], "n_samples")
        if cfg["delta"] is None:
            raise ConfigError("delta", "required with a custom n_samples")
        names = [("custom", n, None)]
    else:
        preset = cfg["preset"]
        wanted = list(PRESETS) if preset == "all" else [preset]
        unknown = [p for p in wanted if p not in PRESETS]
        if unknown:
            raise ConfigError("preset", f"unknown preset {unknown[0]!r}; "
                              f"choose from {', '.join(PRESETS)} or all")
        names = [(p, *PRESETS[p]) for p in wanted]
    out = []
    for name, n, preset_delta in names:
        delta = preset_delta if cfg["delta"] is None else cfg["delta"]
        delta = _number(delta, "delta", 0.0, 1.0, lo_open=True, hi_open=True)
        if batch > n:
            raise ConfigError("batch_size", f"batch size {batch} exceeds N={n}")
        out.append(Population(name, n, batch, delta))
    return out


def _accountants(cfg: dict) -> list[str]:
    names = cfg["accountant"]
    if isinstance(names, str):
        names = [names]
    if not names:
        raise ConfigError("accountant", "at least one accountant is required")
    out = []
    for name in names:
        key = str(name).lower()
        key = "ew" if key == "edgeworth" else key
        if key not in ACCOUNTANTS:
            raise ConfigError("accountant", f"unknown accountant {name!r}")
        if key not in out:
            out.append(key)
    return out


def _order(cfg: dict) -> int:
    k = cfg["order_k"]
    if k not in (0, 1, 2):
        raise ConfigError("order_k", f"Edgeworth order must be 0, 1 or 2, got {k!r}")
    return int(k)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    if "accountants" in data:
        data["accountant"] = data.pop("accountants")
    unknown = sorted(set(data) - set(_DEFAULTS))
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    return data


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the JSON config file and explicit flags (flags win)."""
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "func")}
    cfg = dict(_DEFAULTS)
    cfg.update(_load_config(getattr(args, "config", None)))
    cfg.update(flags)
    return cfg


# ---------------------------------------------------------------- output

def fmt(x) -> str:
    """Six significant digits, as used in every CSV cell."""
    if x is None:
        return ""
    return f"{x:.6g}"


def atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        atomic_write(path, text)


def provenance(cfg: dict) -> dict:
    grid = GridConfig()
    return {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "mc_backend": kernels.BACKEND,
        "edgeworth_order": cfg.get("order_k"),
        "quadrature_rtol": QUADRATURE_RTOL,
        "prv_grid": {"h": grid.h, "sd_multiplier": grid.sd_multiplier,
                     "tail_mass": grid.tail_mass},
        "rdp_orders": list(DEFAULT_ORDERS),
        "calibration": {"sigma_init": SIGMA_INIT, "initial_step": INITIAL_STEP,
                        "min_step": MIN_STEP},
    }


def to_json(payload: dict) -> str:
    payload = dict(payload)
    payload["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv(header: str, rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _echo(cfg: dict, command: str) -> dict:
    return {k: cfg[k] for k in sorted(_COMMAND_KEYS[command])}


def _echo_config(cfg: dict, pops: list[Population], command: str, **resolved) -> dict:
    echo = _echo(cfg, command)
    echo.update(resolved)
    if cfg["n_samples"] is not None:
        echo["preset"] = None
    echo["populations"] = [
        {"name": p.name, "n_samples": p.n_samples, "batch_size": p.batch_size,
         "delta": p.delta, "q": float(f"{p.q:.12g}")} for p in pops]
    return echo


# ---------------------------------------------------------------- commands

def _steps(cfg: dict, pops: list[Population], allow_sweep: bool) -> dict[str, list[int]]:
    if cfg["m"] is not None and cfg["m_sweep"] is not None:
        raise ConfigError("m_sweep", "give either m or m_sweep, not both")
    if cfg["m_sweep"] is not None:
        if not allow_sweep:
            raise ConfigError("m_sweep", "this command takes a single m per preset")
        ms = [_positive_int(v, "m_sweep") for v in parse_grid(cfg["m_sweep"], "m_sweep")]
        return {p.name: ms for p in pops}
    if cfg["m"] is None:
        raise ConfigError("m", "the number of compositions is required (m or m_sweep)")
    per = _parse_m(cfg["m"], [p.name for p in pops])
    return {name: [m] for name, m in per.items()}


def _calibrate(accountant: str, order: int, eps: float, pop: Population, m: int):
    evaluator = make_evaluator(accountant, order=order)
    sigma = calibrate_sigma(evaluator, eps, pop.delta, pop.q, m)
    return sigma, evaluator(pop.q, sigma, m, pop.delta)


def cmd_calibrate(cfg: dict) -> int:
    pops = _populations(cfg)
    accountants = _accountants(cfg)
    order = _order(cfg)
    eps_grid = parse_grid(8.0 if cfg["epsilon"] is None else cfg["epsilon"], "epsilon")
    steps = _steps(cfg, pops, allow_sweep=True)
    fmt_name = cfg["format"] or "json"
    if fmt_name not in ("json", "csv"):
        raise ConfigError("format", "choose csv or json")
    rows = []
    for pop in pops:
        for m in steps[pop.name]:
            for eps in eps_grid:
                for acc in accountants:
                    sigma, achieved = _calibrate(acc, order, eps, pop, m)
                    rows.append({"preset": pop.name, "q": float(f"{pop.q:.12g}"),
                                 "delta": pop.delta, "m": m, "epsilon_target": eps,
                                 "accountant": acc, "sigma": sigma,
                                 "achieved_epsilon": achieved})
    if fmt_name == "csv":
        text = _csv("preset,m,epsilon,accountant,sigma,achieved_epsilon",
                    [[r["preset"], r["m"], r["epsilon_target"], r["accountant"],
                      r["sigma"], r["achieved_epsilon"]] for r in rows])
    else:
        echo = _echo_config(cfg, pops, "calibrate", epsilon=eps_grid, steps=steps)
        text = to_json({"command": "calibrate", "config": echo,
                        "provenance": provenance(cfg), "results": rows})
    _emit(text, cfg["out"])
    return EXIT_OK


def curve_rows(pop: Population, m: int, eps_grid, accountants, order) -> list[dict]:
    rows = []
    for eps in eps_grid:
        row = {"epsilon": eps}
        for acc in ACCOUNTANTS:
            row[f"sigma_{acc}"] = (_calibrate(acc, order, eps, pop, m)[0]
                                   if acc in accountants else None)
        rows.append(row)
    return rows


def cmd_curve(cfg: dict) -> int:
    pops = _populations(cfg)
    accountants = _accountants(cfg)
    order = _order(cfg)
    eps_grid = parse_grid("5:8:1" if cfg["epsilon"] is None else cfg["epsilon"], "epsilon")
    if not eps_grid:
        raise ConfigError("epsilon", "the epsilon grid is empty")
    steps = _steps(cfg, pops, allow_sweep=False)
    fmt_name = cfg["format"] or "csv"
    if fmt_name not in ("json", "csv"):
        raise ConfigError("format", "choose csv or json")
    out = cfg["out"]
    if out is None and len(pops) > 1:
        raise ConfigError("out", "an output directory is required for several presets")
    curves = {p.name: curve_rows(p, steps[p.name][0], eps_grid, accountants, order)
              for p in pops}
    if fmt_name == "json":
        echo = _echo_config(cfg, pops, "curve", epsilon=eps_grid, steps=steps)
        text = to_json({"command": "curve", "config": echo,
                        "provenance": provenance(cfg), "curves": curves})
        _emit(text, out if out is None or out.endswith(".json")
              else os.path.join(out, "curves.json"))
        return EXIT_OK
    for name, rows in curves.items():
        text = _csv(CURVE_HEADER, [[r["epsilon"], r["sigma_rdp"], r["sigma_prv"], r["sigma_ew"]]
                                   for r in rows])
        if out is None:
            _emit(text, None)
        elif len(pops) == 1 and out.endswith(".csv"):
            _emit(text, out)
        else:
            _emit(text, os.path.join(out, f"{name}.csv"))
    return EXIT_OK


def _validation_grid(cfg: dict) -> dict:
    grid = dict(VALIDATION_GRID)
    if cfg["validation_grid"] is not None:
        if not isinstance(cfg["validation_grid"], dict):
            raise ConfigError("validation_grid", "expected an object with q, sigma, m, epsilon")
        unknown = sorted(set(cfg["validation_grid"]) - set(grid))
        if unknown:
            raise ConfigError("validation_grid", f"unknown key {unknown[0]!r}")
        grid.update(cfg["validation_grid"])
    for key in ("q", "sigma", "epsilon"):
        grid[key] = parse_grid(grid[key], f"validation_grid.{key}")
    grid["m"] = [_positive_int(v, "validation_grid.m") for v in grid["m"]]
    if any(not 0 < q <= 1 for q in grid["q"]) or any(s <= 0 for s in grid["sigma"]):
        raise ConfigError("validation_grid", "need q in (0, 1] and sigma > 0")
    return grid


def validation_cells(cfg: dict) -> list[dict]:
    """Compare every accountant with the Monte Carlo estimate on the grid.

    A two-sided accountant passes a cell when |delta - delta_mc| is at most
    three standard errors plus its own envelope. RDP is an upper bound, so it
    only has to stay above delta_mc minus three standard errors.
    """
    grid = _validation_grid(cfg)
    accountants = _accountants(cfg)
    order = _order(cfg)
    n = _positive_int(cfg["mc_samples"], "mc_samples")
    seed = _seed(cfg)
    shift = 1.0 + _number(cfg["ew_sigma_perturbation"], "ew_sigma_perturbation", -0.5, 10.0)
    cells = []
    for q in grid["q"]:
        for sigma in grid["sigma"]:
            spec = MechanismSpec(q, sigma)
            mc = mc_delta_grid(spec, grid["m"], grid["epsilon"], n, seed)
            for m in grid["m"]:
                for eps in grid["epsilon"]:
                    est = mc[(m, eps)]
                    for acc in accountants:
                        if acc == "ew":
                            res = delta_of_epsilon_ew(MechanismSpec(q, sigma * shift), m, eps,
                                                      order, berry_esseen=cfg["berry_esseen"])
                            env = 0.0
                            if res.error_envelope is not None:
                                env = (1.0 + math.exp(eps)) * res.error_envelope
                        elif acc == "prv":
                            res = delta_of_epsilon_prv(spec, m, eps)
                            env = res.error_envelope
                        else:
                            res = rdp_delta(q, sigma, m, eps)
                            env = 0.0
                        band = 3.0 * est.stderr + env
                        if acc == "rdp":
                            ok = res.delta >= est.delta_hat - band
                        else:
                            ok = abs(res.delta - est.delta_hat) <= band
                        cells.append({"q": q, "sigma": sigma, "m": m, "epsilon": eps,
                                      "accountant": acc, "delta_method": res.delta,
                                      "delta_mc": est.delta_hat, "stderr": est.stderr,
                                      "envelope": env, "pass": bool(ok)})
    return cells


def cmd_validate(cfg: dict) -> int:
    fmt_name = cfg["format"] or "json"
    if fmt_name not in ("json", "csv"):
        raise ConfigError("format", "choose csv or json")
    cells = validation_cells(cfg)
    passed = all(c["pass"] for c in cells)
    if fmt_name == "csv":
        text = _csv("q,sigma,m,epsilon,accountant,delta_method,delta_mc,stderr,envelope,pass",
                    [[c["q"], c["sigma"], c["m"], c["epsilon"], c["accountant"],
                      c["delta_method"], c["delta_mc"], c["stderr"], c["envelope"],
                      "yes" if c["pass"] else "no"] for c in cells])
    else:
        echo = _echo(cfg, "validate")
        echo["validation_grid"] = _validation_grid(cfg)
        text = to_json({"command": "validate", "config": echo,
                        "provenance": provenance(cfg), "cells": cells,
                        "passed": passed})
    _emit(text, cfg["out"])
    if not passed:
        bad = sum(not c["pass"] for c in cells)
        print(f"validation failed in {bad} of {len(cells)} cells", file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAILED


def cmd_train_sim(cfg: dict) -> int:
    from .rgp import TrainRunConfig, load_dataset, make_separable, train_private

    accountants = _accountants(cfg)
    order = _order(cfg)
    if cfg["m"] is None:
        raise ConfigError("m", "the number of training steps is required")
    steps = _positive_int(cfg["m"], "m")
    eps = parse_grid(8.0 if cfg["epsilon"] is None else cfg["epsilon"], "epsilon")
    if len(eps) != 1:
        raise ConfigError("epsilon", "training takes a single epsilon")
    delta = _number(1e-5 if cfg["delta"] is None else cfg["delta"], "delta", 0.0, 1.0,
                    lo_open=True, hi_open=True)
    if cfg["dataset"] is not None:
        try:
            X, y = load_dataset(cfg["dataset"])
        except (OSError, ValueError) as exc:
            raise ConfigError("dataset", str(exc)) from None
    else:
        n = _positive_int(50_000 if cfg["n_samples"] is None else cfg["n_samples"], "n_samples")
        X, y = make_separable(n, _positive_int(cfg["dim"], "dim"),
                              _positive_int(cfg["classes"], "classes"), seed=_seed(cfg))
    sigma_override = cfg["sigma_override"]
    if sigma_override is not None:
        sigma_override = _number(sigma_override, "sigma_override", 0.0)
    if cfg["no_accounting"] and sigma_override is None:
        raise ConfigError("no_accounting", "requires sigma_override")
    hidden = None if cfg["hidden"] is None else _positive_int(cfg["hidden"], "hidden")
    try:
        run = TrainRunConfig(
            n_samples=len(X),
            batch_size=_positive_int(500 if cfg["batch_size"] is None else cfg["batch_size"],
                                     "batch_size"),
            steps=steps, clip_norm=_number(cfg["clip_norm"], "clip_norm", 0.0, lo_open=True),
            epsilon_target=eps[0], delta=delta, rank=_positive_int(cfg["rank"], "rank"),
            seed=_seed(cfg), history_lag=_positive_int(cfg["history_lag"], "history_lag"),
            hidden=hidden)
    except ValueError as exc:
        raise ConfigError("train", str(exc)) from None
    accountant = accountants[0]
    add_noise = not cfg["no_accounting"]
    result = train_private(run, X, y, accountant, sigma_override=sigma_override,
                           add_noise=add_noise, order=order)
    spent = result.spent
    metrics = {"accuracy": result.model.accuracy(X, y),
               "final_loss": result.model.loss(X, y),
               "sigma": result.sigma,
               "clip_fraction": result.clipped_fraction,
               "batch_sizes": result.batch_sizes}
    if spent is not None:
        metrics["spent"] = {"epsilon": spent.epsilon, "delta": spent.delta,
                            "method": spent.method.value, "m": spent.m}
    else:
        metrics["spent"] = None
    if cfg["baseline"]:
        base = train_private(run, X, y, accountant, sigma_override=0.0, add_noise=False)
        metrics["nonprivate_accuracy"] = base.model.accuracy(X, y)
    echo = _echo(cfg, "train-sim")
    echo.update({"n_samples": run.n_samples, "batch_size": run.batch_size, "m": steps,
                 "epsilon": eps[0], "q": float(f"{run.q:.12g}"), "delta": delta})
    text = to_json({"command": "train-sim", "config": echo,
                    "provenance": provenance(cfg), "metrics": metrics})
    _emit(text, cfg["out"])
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeworth-dp",
        description="Noise calibration and privacy accounting for DP-SGD.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_steps=True):
        p.add_argument("--config", help="JSON file with the same keys as the flags")
        p.add_argument("--preset", choices=[*PRESETS, "all"])
        p.add_argument("--n-samples", dest="n_samples", type=int,
                       help="custom dataset size N (instead of a preset)")
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--epsilon", help="single value or lo:hi:step")
        p.add_argument("--delta", type=float)
        if with_steps:
            p.add_argument("--m", help="compositions: integer or NAME=m,NAME=m")
            p.add_argument("--m-sweep", dest="m_sweep", help="lo:hi:step")
        p.add_argument("--accountant", action="append", choices=["ew", "edgeworth", "prv", "rdp"],
                       help="repeatable; defaults to all three")
        p.add_argument("--order-k", dest="order_k", type=int, choices=[0, 1, 2])
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--format", choices=["csv", "json"])

    p = sub.add_parser("calibrate", help="calibrated sigma per preset and accountant",
                       argument_default=argparse.SUPPRESS)
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("curve", help="epsilon-sigma curves, one CSV per preset",
                       argument_default=argparse.SUPPRESS)
    common(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("validate", help="cross-check accountants against Monte Carlo",
                       argument_default=argparse.SUPPRESS)
    common(p, with_steps=False)
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--berry-esseen", dest="berry_esseen", action="store_true",
                   help="widen the Edgeworth band by the Berry-Esseen envelope")
    p.add_argument("--ew-sigma-perturbation", dest="ew_sigma_perturbation", type=float,
                   help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train-sim", help="private training on synthetic or file data",
                       argument_default=argparse.SUPPRESS)
    common(p)
    p.add_argument("--dataset", help="file with header 'n d labels'")
    p.add_argument("--dim", type=int)
    p.add_argument("--classes", type=int)
    p.add_argument("--clip-norm", dest="clip_norm", type=float)
    p.add_argument("--rank", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--history-lag", dest="history_lag", type=int)
    p.add_argument("--sigma-override", dest="sigma_override", type=float)
    p.add_argument("--no-accounting", dest="no_accounting", action="store_true")
    p.add_argument("--baseline", action="store_true",
                   help="also train without noise and report its accuracy")
    p.set_defaults(func=cmd_train_sim)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return args.func(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AccountingError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ACCOUNTING


if __name__ == "__main__":
    sys.exit(main())
