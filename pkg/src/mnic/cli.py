"""Experiment driver.

Usage::

    mnic --config experiment.yaml [--seed N] [--out DIR] [--threads K] [--strict | --lenient]

The config is a YAML mapping; see the README for every key. Each run writes
one primary table ``<command>.csv`` (or ``.jsonl``) and ``manifest.json`` into
the output directory. Failures write ``error.json`` and exit with status 2
(invalid config) or 3 (numerical failure).
"""

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .genmodels import (
    GMMSpec,
    MixtureSpec,
    NormGrowthTrace,
    general_cov_bound,
    model_from_dict,
    norm_growth_experiment,
    r_n_lower_check,
    region_classify,
    sample,
)
from .interpolator import fit_batch, online_fit
from .kernels import Dataset, KernelSpec
from .linalg import DEFAULT_RTOL, RankDeficientError
from .regret import GeneralizationEstimate, build_report, estimate_generalization
from .seeding import trial_rng
from .separation import bayes_bound_check, lemma5_monte_carlo, separation_report

log = logging.getLogger("mnic")

SCHEMA_VERSION = "1"
COMMANDS = (
    "fit",
    "online",
    "regret",
    "simulate-gmm",
    "simulate-mixture",
    "region-map",
    "separation",
    "sweep",
)
KNOWN_KEYS = {
    "command", "kernel", "lambda", "model", "n", "n_grid", "trials", "test_size",
    "seed", "constants", "tol", "output_dir", "format", "data", "region",
    "separation", "threads", "strict",
}
PLOT_HEADER = ["n", "aggregate", "quantity", "value", "stderr"]
REGION_HEADER = ["x_exp", "y_exp", "alpha", "class"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    seed: int
    kernel: KernelSpec = field(default_factory=KernelSpec.linear)
    lam: float = 0.0
    model: Optional[object] = None
    n: Optional[int] = None
    n_grid: Optional[list] = None
    trials: int = 1
    test_size: int = 1000
    constants: dict = field(default_factory=lambda: {"c1": 1.0, "c2": 1.0, "c3": 1.0})
    rank_rtol: float = DEFAULT_RTOL
    output_dir: str = "out"
    format: str = "csv"
    data: Optional[dict] = None
    region: dict = field(default_factory=dict)
    separation: dict = field(default_factory=dict)
    threads: int = 1
    strict: bool = True
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(d) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        command = d.get("command")
        if command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {command!r}")
        if d.get("seed") is None:
            raise ConfigError("seed is required")
        try:
            seed = int(d["seed"])
            if not 0 <= seed < 2 ** 64:
                raise ValueError
        except (TypeError, ValueError):
            raise ConfigError("seed must be an unsigned 64-bit integer") from None
        try:
            kernel = KernelSpec.from_dict(d.get("kernel", {"kind": "linear"}))
            model = model_from_dict(d["model"]) if d.get("model") else None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        lam = float(d.get("lambda", 0.0))
        if not lam >= 0:
            raise ConfigError("lambda must be nonnegative")
        n_grid = d.get("n_grid")
        if n_grid is not None:
            n_grid = [int(v) for v in n_grid]
            if not n_grid or n_grid[0] < 1 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
                raise ConfigError("n_grid must be strictly increasing positive integers")
        constants = {"c1": 1.0, "c2": 1.0, "c3": 1.0}
        constants.update({k: float(v) for k, v in (d.get("constants") or {}).items()})
        fmt = d.get("format", "csv")
        if fmt not in ("csv", "jsonl"):
            raise ConfigError("format must be csv or jsonl")
        tol = d.get("tol") or {}
        return cls(
            command=command,
            seed=seed,
            kernel=kernel,
            lam=lam,
            model=model,
            n=int(d["n"]) if d.get("n") is not None else None,
            n_grid=n_grid,
            trials=int(d.get("trials", 1)),
            test_size=int(d.get("test_size", 1000)),
            constants=constants,
            rank_rtol=float(tol.get("rank_rtol", DEFAULT_RTOL)),
            output_dir=str(d.get("output_dir", "out")),
            format=fmt,
            data=d.get("data"),
            region=dict(d.get("region") or {}),
            separation=dict(d.get("separation") or {}),
            threads=int(d.get("threads", 1)),
            strict=bool(d.get("strict", True)),
            raw=dict(d),
        )

    def echo(self):
        """Resolved config as plain data (what the manifest records)."""
        out = {
            "command": self.command,
            "seed": self.seed,
            "kernel": self.kernel.to_dict(),
            "lambda": self.lam,
            "trials": self.trials,
            "test_size": self.test_size,
            "constants": self.constants,
            "tol": {"rank_rtol": self.rank_rtol},
            "format": self.format,
            "strict": self.strict,
        }
        if self.model is not None:
            out["model"] = self.model.to_dict()
        if self.n is not None:
            out["n"] = self.n
        if self.n_grid is not None:
            out["n_grid"] = self.n_grid
        for key in ("data", "region", "separation"):
            val = getattr(self, key)
            if val:
                out[key] = val
        return out

    def hash(self):
        blob = json.dumps(self.echo(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def fmt_value(v):
    """Shortest round-trip text for numbers; empty string for ``None``."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_table(path, header, rows, fmt="csv"):
    if fmt == "jsonl":
        with open(path, "w", newline="") as fh:
            for row in rows:
                rec = {}
                for k, v in zip(header, row):
                    if isinstance(v, (np.integer,)):
                        v = int(v)
                    elif isinstance(v, (float, np.floating)):
                        v = float(v)
                        v = v if math.isfinite(v) else repr(v)
                    rec[k] = v
                fh.write(json.dumps(rec) + "\n")
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_value(v) for v in row])


def plot_rows(obj):
    """Long-format rows ``(n, aggregate, quantity, value, stderr)``.

    Region grids (lists of ``(x, y, Region)``) are not long format; use
    :func:`emit_plotdata`, which picks the right header.
    """
    rows = []
    if isinstance(obj, NormGrowthTrace):
        if obj.n_values.size == 0 or obj.trials == 0:
            return rows
        nm, ns = obj.norm_sq_mean, obj.norm_sq_se
        mm, ms = obj.mistakes_mean, obj.mistakes_se
        for j, n in enumerate(obj.n_values):
            rows.append((n, "mean", "norm_sq", nm[j], ns[j]))
            rows.append((n, "mean", "mistakes", mm[j], ms[j]))
            rows.append((n, "constant", "theory_bound", obj.theory_bound[j], None))
            rows.append((n, "constant", "mistake_bound", obj.mistake_bound[j], None))
        return rows
    if isinstance(obj, GeneralizationEstimate):
        for j, n in enumerate(obj.n_grid):
            rows.append((n, "mean", "min_risk", obj.est_min_risk[j], obj.se_min_risk[j]))
            rows.append((n, "argmin", "min_risk_index", int(obj.min_risk_index[j]), None))
            rows.append((n, "mean", "final_risk", obj.est_final_risk[j], obj.se_final_risk[j]))
            rows.append((n, "mean", "polyak_risk", obj.est_polyak_risk[j], obj.se_polyak_risk[j]))
            rows.append((n, "mean", "bound", obj.bound[j], obj.se_bound[j]))
            rows.append((n, "mean", "polyak_bound", obj.polyak_bound[j], obj.se_polyak_bound[j]))
            rows.append((n, "all", "markov_holds", bool(obj.markov[j].all_hold), None))
        return rows
    raise TypeError(f"no plot layout for {type(obj).__name__}")


def emit_plotdata(obj, path, fmt="csv"):
    """Write a trace, a generalization estimate or a region grid to ``path``."""
    if isinstance(obj, list) and (not obj or len(obj[0]) == 4):
        _write_table(path, REGION_HEADER, [(x, y, a, r.value) for x, y, a, r in obj], fmt)
        return path
    _write_table(path, PLOT_HEADER, plot_rows(obj), fmt)
    return path


def _load_matrix(path):
    with open(path) as fh:
        text = fh.read().replace(",", " ")
    return np.loadtxt(io.StringIO(text), ndmin=2)


def _dataset(cfg, classification=True):
    d = cfg.data
    if d:
        if "path" in d:
            M = _load_matrix(d["path"])
            col = int(d.get("label_column", -1)) % M.shape[1]
            X = np.delete(M, col, axis=1)
            y = M[:, col]
        else:
            X, y = np.asarray(d["X"], dtype=float), np.asarray(d["y"], dtype=float)
        return Dataset(X, y, classification=bool(d.get("classification", classification)))
    if cfg.model is None or cfg.n is None:
        raise ConfigError(f"{cfg.command} needs either data or (model and n)")
    return sample(cfg.model, cfg.n, trial_rng(cfg.seed, 0))


def _cmd_fit(cfg):
    data = _dataset(cfg, classification=False)
    state = fit_batch(cfg.kernel, cfg.lam, data, rtol=cfg.rank_rtol)
    rows = [("dual", i, a) for i, a in enumerate(state.dual)]
    rows += [("fitted", i, v) for i, v in enumerate(state(data.X))] if data.n else []
    rows.append(("norm_sq", None, state.norm_sq))
    rows.append(("rkhs_norm_sq", None, state.rkhs_norm_sq()))
    return ["quantity", "index", "value"], rows, {}


def _online_rows(state, data):
    rows, cum = [], 0.0
    y = state.y
    for rec, yi in zip(state.step_log, y):
        cum += rec.increment
        pred = yi - rec.eps
        rows.append((rec.index, rec.eps, rec.s_sq, rec.increment, cum, pred, bool(yi * pred <= 0)))
    return rows


ONLINE_HEADER = ["step", "eps", "s_sq", "norm_sq_increment", "norm_sq", "prediction", "mistake"]


def _cmd_online(cfg):
    data = _dataset(cfg, classification=False)
    state = online_fit(cfg.kernel, cfg.lam, data, strict=cfg.strict, rtol=cfg.rank_rtol)
    return ONLINE_HEADER, _online_rows(state, data), {"skipped": list(state.skipped)}


def _cmd_regret(cfg):
    data = _dataset(cfg)
    state = online_fit(cfg.kernel, cfg.lam, data, strict=cfg.strict, rtol=cfg.rank_rtol)
    rep = build_report(state, data)
    row = rep.as_row()
    checks = rep.checks()
    header = list(row) + [f"holds_{k}" for k in checks]
    extra = {"per_step": (ONLINE_HEADER, _online_rows(state, data))}
    return header, [tuple(row.values()) + tuple(checks.values())], extra


def _require(cfg, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise ConfigError(f"{cfg.command} requires {name!r}")


def _cmd_simulate_gmm(cfg):
    _require(cfg, "model", "n_grid")
    if not isinstance(cfg.model, GMMSpec):
        raise ConfigError("simulate-gmm needs a gmm model")
    trace = norm_growth_experiment(cfg.model, cfg.n_grid, cfg.trials, cfg.seed,
                                   kernel=cfg.kernel, lam=cfg.lam, workers=cfg.threads)
    rows = plot_rows(trace)
    if cfg.model.mu > 0 and cfg.lam == 0:
        rn = r_n_lower_check(cfg.model, cfg.n_grid, cfg.trials, cfg.seed)
        for j, n in enumerate(rn.n_values):
            se = rn.r_sq_trials[:, j].std(ddof=1) / math.sqrt(cfg.trials) if cfg.trials > 1 else None
            rows.append((n, "mean", "r_n_sq", rn.r_sq_mean[j], se))
            rows.append((n, "mean", "R_n_sq", rn.R_sq_mean[j], None))
            rows.append((n, "fit", "c_hat", rn.c_hat[j], None))
    return PLOT_HEADER, rows, {"rank_failures": trace.rank_failures}


def _cmd_simulate_mixture(cfg):
    _require(cfg, "model", "n_grid")
    if not isinstance(cfg.model, MixtureSpec):
        raise ConfigError("simulate-mixture needs a mixture model")
    trace = norm_growth_experiment(cfg.model, cfg.n_grid, cfg.trials, cfg.seed,
                                   kernel=cfg.kernel, lam=cfg.lam, workers=cfg.threads)
    rows = plot_rows(trace)
    for n in trace.n_values:
        _, comp = general_cov_bound(cfg.model, int(n), cfg.lam, **cfg.constants)
        for k in sorted(comp):
            rows.append((n, "constant", k, comp[k], None))
    return PLOT_HEADER, rows, {"rank_failures": trace.rank_failures}


def _cmd_region_map(cfg):
    r = cfg.region
    try:
        alpha = float(r["alpha"])
    except KeyError:
        raise ConfigError("region-map requires region.alpha") from None
    xs = np.linspace(float(r.get("x_min", 0.02)), float(r.get("x_max", 3.0)), int(r.get("x_steps", 50)))
    ys = np.linspace(float(r.get("y_min", 1.02)), float(r.get("y_max", 3.0)), int(r.get("y_steps", 50)))
    allow = bool(r.get("allow_ridge", True))
    try:
        rows = [(x, y, alpha, region_classify(x, y, alpha, allow).value) for x in xs for y in ys]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return REGION_HEADER, rows, {}


def _cmd_separation(cfg):
    _require(cfg, "model", "n")
    if not isinstance(cfg.model, GMMSpec):
        raise ConfigError("separation needs a gmm model")
    s = cfg.separation
    cap = float(s.get("eta_norm_cap", 5.0))
    redraws = int(s.get("redraws", 200))
    data = sample(cfg.model, cfg.n, trial_rng(cfg.seed, 0))
    l5 = lemma5_monte_carlo(cfg.model, data.X, cap, redraws, cfg.seed, kernel=cfg.kernel)
    bb = bayes_bound_check(cfg.model, data.X, cap, redraws, cfg.seed, kernel=cfg.kernel)
    rep = separation_report(cfg.model, data.X, l5.r_n_sq, cap, s.get("epsilon"))
    rows = [(k, v, None) for k, v in rep.as_row().items()]
    rows += [
        ("r_n_sq", l5.r_n_sq, None),
        ("R_n_sq", bb.R_n_sq, None),
        ("conditional_norm_sq", l5.mean_norm_sq, l5.se),
        ("lemma5_holds", l5.holds, None),
        ("online_mistake_rate", bb.mistake_rate, bb.se),
        ("bayes_bound", bb.bound, None),
        ("bayes_bound_holds", bb.holds, None),
    ]
    return ["quantity", "value", "stderr"], rows, {}


def _cmd_sweep(cfg):
    _require(cfg, "model", "n_grid")
    est = estimate_generalization(cfg.model, cfg.kernel, cfg.lam, cfg.n_grid, cfg.trials,
                                  cfg.test_size, cfg.seed, workers=cfg.threads, strict=cfg.strict)
    return PLOT_HEADER, plot_rows(est), {"rank_failures": est.rank_failures}


HANDLERS = {
    "fit": _cmd_fit,
    "online": _cmd_online,
    "regret": _cmd_regret,
    "simulate-gmm": _cmd_simulate_gmm,
    "simulate-mixture": _cmd_simulate_mixture,
    "region-map": _cmd_region_map,
    "separation": _cmd_separation,
    "sweep": _cmd_sweep,
}


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(cfg):
    """Execute one configured command; returns the process exit status."""
    os.makedirs(cfg.output_dir, exist_ok=True)
    ext = "jsonl" if cfg.format == "jsonl" else "csv"
    primary = f"{cfg.command}.{ext}"
    try:
        header, rows, extra = HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        _write_json(os.path.join(cfg.output_dir, "error.json"),
                    {"status": "error", "kind": "invalid_config", "message": str(exc)})
        log.error("invalid config: %s", exc)
        return 2
    except (RankDeficientError, np.linalg.LinAlgError) as exc:
        _write_json(os.path.join(cfg.output_dir, "error.json"), {
            "status": "error",
            "kind": "numerical_failure",
            "message": str(exc),
            "step": getattr(exc, "index", None),
            "s_sq": getattr(exc, "s_sq", None),
        })
        log.error("numerical failure: %s", exc)
        return 3
    outputs = [primary]
    _write_table(os.path.join(cfg.output_dir, primary), header, rows, cfg.format)
    info = {}
    for key, val in extra.items():
        if isinstance(val, tuple):
            name = f"{cfg.command}_{key}.{ext}"
            _write_table(os.path.join(cfg.output_dir, name), val[0], val[1], cfg.format)
            outputs.append(name)
        else:
            info[key] = val
    _write_json(os.path.join(cfg.output_dir, "manifest.json"), {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "git_hash": "unknown",
        "config": cfg.echo(),
        "config_hash": cfg.hash(),
        "columns": header,
        "outputs": outputs,
        "info": info,
    })
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="mnic", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", required=True, help="YAML experiment config")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", help="output directory (overrides output_dir)")
    ap.add_argument("--threads", type=int, help="worker threads for trial fan-out")
    mode = ap.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=None,
                      help="fail on rank-deficient points (default)")
    mode.add_argument("--lenient", dest="strict", action="store_false",
                      help="skip rank-deficient points / trials with a warning")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    out_dir = args.out
    try:
        with open(args.config) as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.out is not None:
            raw["output_dir"] = args.out
        if args.threads is not None:
            raw["threads"] = args.threads
        if args.strict is not None:
            raw["strict"] = args.strict
        out_dir = raw.get("output_dir", "out")
        cfg = ExperimentConfig.from_dict(raw)
    except (OSError, yaml.YAMLError, ConfigError) as exc:
        out_dir = out_dir or "out"
        os.makedirs(out_dir, exist_ok=True)
        _write_json(os.path.join(out_dir, "error.json"),
                    {"status": "error", "kind": "invalid_config", "message": str(exc)})
        print(f"mnic: invalid config: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
