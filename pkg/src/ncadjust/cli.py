"""Command-line entry point.

Each run reads one JSON config (``--config``); global flags override the
matching config keys. Exit codes: 0 ok, 2 config/usage, 3 data format,
4 numeric contract.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds as bnd
from .adjusters import AdjustmentSpec
from .errors import ConfigError, NcAdjustError
from .etf import build_etf, psi
from .evaluation import (
    THRESHOLD_PRESETS,
    GroupThresholds,
    boundary_heatmaps,
    default_gamma_grid,
    evaluate,
    format_matrix_csv,
    sweep,
)
from .featio import ingest, write_features
from .simulator import LongTailProfile, ScenarioConfig, generate, generate_validation, make_counts
from .stats import ClassStats

REQUIRED = object()

SCENARIO_KEYS = {
    "num_classes": REQUIRED,
    "feature_dim": REQUIRED,
    "head_count": REQUIRED,
    "imbalance": REQUIRED,
    "mean_norm": 10.0,
    "norm_multipliers": None,
    "spread_scale": 1.0,
    "test_per_class": 100,
    "val_per_class": 20,
    "jitter": 0.0,
    "seed": 0,
    "etf_seed": None,
}

SCHEMAS = {
    "simulate": {**SCENARIO_KEYS, "file_format": "binary"},
    "evaluate": {
        "train": REQUIRED,
        "test": REQUIRED,
        "method": REQUIRED,
        "gamma": 0.0,
        "norm_aware": False,
        "thresholds": "cifar100lt",
        "seed": 0,
        "etf_seed": None,
    },
    "heatmap": {
        "preset": None,
        "stats": None,
        "num_classes": None,
        "head_count": None,
        "imbalance": None,
        "mean_norm": 10.0,
        "gamma_1v1": 0.5,
        "gamma_mla": 0.5,
        "gamma_ala": None,
        "f_norm": None,
        "exact": False,
        "seed": 0,
    },
    "sweep": {
        "scenario": None,
        "train": None,
        "test": None,
        "method": REQUIRED,
        "grid": None,
        "seeds": None,
        "split": "test",
        "thresholds": "cifar100lt",
        "seed": 0,
        "etf_seed": None,
    },
    "bounds": {
        "complexity": None,
        "relu": None,
        "thetas": None,
        "stats": None,
        "gamma": 0.5,
        "num_classes": None,
        "seed": 0,
    },
}

HEATMAP_PRESETS = {
    "k100": {"num_classes": 100, "head_count": 500, "imbalance": 100, "mean_norm": 10.0},
    "k10": {"num_classes": 10, "head_count": 500, "imbalance": 100, "mean_norm": 10.0},
}

RELU_PRESETS = {"default": {"depth_q": 9, "frobenius_product_M": 2.0, "input_sup_norm": 1.0}}


def resolve_config(command, raw, overrides):
    """Merge defaults, the config document and flag overrides; reject unknown keys."""
    schema = SCHEMAS[command]
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
    cfg = {k: v for k, v in schema.items() if v is not REQUIRED}
    cfg.update(raw)
    cfg.update({k: v for k, v in overrides.items() if v is not None and k in schema})
    missing = [k for k, v in schema.items() if v is REQUIRED and k not in cfg]
    if missing:
        raise ConfigError(f"missing required config key: {missing[0]}")
    return cfg


def _thresholds(value):
    if isinstance(value, str):
        if value not in THRESHOLD_PRESETS:
            raise ConfigError(f"unknown thresholds preset {value!r}")
        return THRESHOLD_PRESETS[value]
    if isinstance(value, dict) and set(value) == {"many_min", "medium_min"}:
        return GroupThresholds(int(value["many_min"]), int(value["medium_min"]))
    raise ConfigError("thresholds must be a preset name or {many_min, medium_min}")


def _scenario(cfg, seed=None):
    try:
        profile = LongTailProfile(
            int(cfg["num_classes"]), int(cfg["head_count"]), float(cfg["imbalance"])
        )
        mult = cfg.get("norm_multipliers")
        return ScenarioConfig(
            profile,
            int(cfg["feature_dim"]),
            mean_norm_base=float(cfg.get("mean_norm", 10.0)),
            norm_multipliers=tuple(mult) if mult is not None else None,
            spread_scale=float(cfg.get("spread_scale", 1.0)),
            test_per_class=int(cfg.get("test_per_class", 100)),
            val_per_class=int(cfg.get("val_per_class", 20)),
            seed=int(cfg.get("seed", 0) if seed is None else seed),
            jitter=float(cfg.get("jitter", 0.0)),
        )
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, NcAdjustError):
            raise
        raise ConfigError(f"invalid scenario config: {exc}") from None


def _etf_seed(cfg, seed):
    return int(seed if cfg.get("etf_seed") is None else cfg["etf_seed"])


def _dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _nan_to_none(matrix):
    return [[None if math.isnan(v) else v for v in row] for row in np.asarray(matrix).tolist()]


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def cmd_simulate(cfg, out, fmt):
    scen = _scenario(cfg)
    etf_seed = _etf_seed(cfg, scen.seed)
    etf = build_etf(scen.profile.num_classes, scen.feature_dim, etf_seed)
    train, test, stats = generate(scen, etf)
    ext = {"binary": "ncfb", "csv": "csv"}.get(cfg["file_format"])
    if ext is None:
        raise ConfigError(f"file_format must be 'binary' or 'csv', got {cfg['file_format']!r}")
    write_features(out / f"train.{ext}", train, cfg["file_format"])
    write_features(out / f"test.{ext}", test, cfg["file_format"])
    if scen.val_per_class > 0:
        write_features(out / f"validation.{ext}", generate_validation(scen, etf), cfg["file_format"])
    _dump_json(
        out / "stats.json",
        {**stats.to_dict(), "seed": scen.seed, "etf_seed": etf_seed, "config": cfg},
    )
    print(f"wrote {out}: counts {stats.counts.tolist()}")
    return 0


def cmd_evaluate(cfg, out, fmt):
    train, stats = ingest(cfg["train"])
    test, _ = ingest(cfg["test"], num_classes=train.num_classes, kind="test")
    if stats is None:
        raise ConfigError(f"{cfg['train']} is not a training split")
    seed = int(cfg["seed"])
    etf = build_etf(train.num_classes, train.feature_dim, _etf_seed(cfg, seed))
    thresholds = _thresholds(cfg["thresholds"])
    runs = [(m, g) for m in _as_list(cfg["method"]) for g in _as_list(cfg["gamma"])]
    rows = []
    for method, gamma in runs:
        spec = AdjustmentSpec(
            method, float(gamma), norm_aware=bool(cfg["norm_aware"]) and method == "mla"
        )
        report = evaluate(test, etf, spec, stats, thresholds)
        rows.append(report)
        print(f"{report.method} gamma={report.gamma:g}: overall {report.overall:.4f}")
    if fmt == "csv":
        lines = ["method,gamma,overall,many,medium,few"]
        for r in rows:
            vals = [r.overall, r.groups["many"], r.groups["medium"], r.groups["few"]]
            lines.append(",".join([r.method, repr(r.gamma)] + ["NaN" if math.isnan(v) else repr(v) for v in vals]))
        (out / "report.csv").write_text("\n".join(lines) + "\n")
        return 0
    for r in rows:
        obj = {**r.to_dict(), "seed": seed, "config": cfg}
        name = "report.json" if len(rows) == 1 else f"report_{r.method}_{r.gamma:g}.json"
        _dump_json(out / name, obj)
    return 0


def _heatmap_stats(cfg):
    if cfg["stats"] is not None:
        doc = json.loads(Path(cfg["stats"]).read_text())
        return ClassStats(doc["counts"], doc["mean_norms"])
    params = dict(HEATMAP_PRESETS[cfg["preset"]]) if cfg["preset"] else {}
    for key in ("num_classes", "head_count", "imbalance"):
        if cfg[key] is not None:
            params[key] = cfg[key]
        elif key not in params:
            raise ConfigError(f"missing required config key: {key}")
    params.setdefault("mean_norm", cfg["mean_norm"])
    counts = make_counts(
        LongTailProfile(int(params["num_classes"]), int(params["head_count"]), float(params["imbalance"]))
    )
    return ClassStats(counts, np.full(counts.size, float(params["mean_norm"])))


def cmd_heatmap(cfg, out, fmt):
    if cfg["preset"] is not None and cfg["preset"] not in HEATMAP_PRESETS:
        raise ConfigError(f"unknown heatmap preset {cfg['preset']!r}")
    stats = _heatmap_stats(cfg)
    d_mla, d_ala = boundary_heatmaps(
        stats, cfg["gamma_1v1"], cfg["gamma_mla"], cfg["gamma_ala"], cfg["f_norm"], bool(cfg["exact"])
    )
    summary = {
        "num_classes": stats.num_classes,
        "max_abs_mla": float(np.nanmax(np.abs(d_mla))),
        "max_abs_ala": float(np.nanmax(np.abs(d_ala))) if np.isfinite(d_ala).any() else None,
        "nan_cells_ala": int(np.isnan(d_ala).sum() - stats.num_classes),
        "units": "radians",
    }
    if fmt == "json":
        _dump_json(out / "heatmaps.json", {**summary, "mla": _nan_to_none(d_mla), "ala": _nan_to_none(d_ala)})
    else:
        (out / "heatmap_mla.csv").write_text(format_matrix_csv(d_mla))
        (out / "heatmap_ala.csv").write_text(format_matrix_csv(d_ala))
        _dump_json(out / "heatmap_summary.json", summary)
    print(f"max|mla - 1v1| = {summary['max_abs_mla']:.6f} rad, max|ala - 1v1| = {summary['max_abs_ala']}")
    return 0


def _grid(value):
    if value is None:
        return default_gamma_grid()
    if isinstance(value, dict):
        try:
            start, stop, step = float(value["start"]), float(value["stop"]), float(value["step"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("grid must be a list or {start, stop, step}") from None
        if step <= 0:
            raise ConfigError("grid step must be positive")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    return [float(g) for g in value]


def cmd_sweep(cfg, out, fmt):
    grid = _grid(cfg["grid"])
    thresholds = _thresholds(cfg["thresholds"])
    results = []
    if cfg["scenario"] is not None:
        scen_cfg = cfg["scenario"]
        unknown = sorted(set(scen_cfg) - set(SCENARIO_KEYS))
        if unknown:
            raise ConfigError(f"unknown scenario keys: {', '.join(unknown)}")
        seeds = cfg["seeds"] if cfg["seeds"] is not None else [int(cfg["seed"])]
        for seed in seeds:
            scen = _scenario(scen_cfg, seed)
            etf = build_etf(scen.profile.num_classes, scen.feature_dim, _etf_seed(scen_cfg, seed))
            _, test, stats = generate(scen, etf)
            split = generate_validation(scen, etf) if cfg["split"] == "validation" else test
            results.append(sweep(split, etf, cfg["method"], stats, grid, thresholds))
    else:
        if cfg["train"] is None or cfg["test"] is None:
            raise ConfigError("missing required config key: scenario (or train and test)")
        train, stats = ingest(cfg["train"])
        test, _ = ingest(cfg["test"], num_classes=train.num_classes, kind="test")
        seeds = [int(cfg["seed"])]
        etf = build_etf(train.num_classes, train.feature_dim, _etf_seed(cfg, seeds[0]))
        results.append(sweep(test, etf, cfg["method"], stats, grid, thresholds))

    def column(fn):
        vals = np.array([[fn(res, i) for i in range(len(grid))] for res in results])
        return vals.mean(axis=0), vals.std(axis=0)

    columns = {
        "overall": column(lambda r, i: r.reports[i].overall),
        "many": column(lambda r, i: r.reports[i].groups["many"]),
        "medium": column(lambda r, i: r.reports[i].groups["medium"]),
        "few": column(lambda r, i: r.reports[i].groups["few"]),
        "agreement": column(lambda r, i: r.agreement[i]),
    }
    mean_overall = columns["overall"][0]
    best_per_seed = [r.best_gamma for r in results]
    summary = {
        "method": results[0].method,
        "seeds": list(seeds),
        "best_gamma_of_mean": grid[int(np.argmax(mean_overall))],
        "best_gamma_per_seed": best_per_seed,
        "best_gamma_mean": float(np.mean(best_per_seed)),
        "best_gamma_std": float(np.std(best_per_seed)),
    }
    header = ["gamma"] + [f"{name}_{stat}" for name in columns for stat in ("mean", "std")]
    table = []
    for i, g in enumerate(grid):
        row = [g]
        for mean, std in columns.values():
            row += [float(mean[i]), float(std[i])]
        table.append(row)
    if fmt == "json":
        records = [
            dict(zip(header, [None if isinstance(v, float) and math.isnan(v) else v for v in row]))
            for row in table
        ]
        _dump_json(out / "sweep.json", {**summary, "table": records})
    else:
        lines = [",".join(header)]
        lines += [",".join("NaN" if math.isnan(v) else repr(v) for v in row) for row in table]
        (out / "sweep.csv").write_text("\n".join(lines) + "\n")
        _dump_json(out / "sweep_summary.json", summary)
    print(f"{summary['method']}: best gamma {summary['best_gamma_of_mean']:g} over {len(grid)} grid points")
    return 0


def cmd_bounds(cfg, out, fmt):
    result = {}
    relu = cfg["relu"]
    if isinstance(relu, str):
        if relu not in RELU_PRESETS:
            raise ConfigError(f"unknown relu preset {relu!r}")
        relu = RELU_PRESETS[relu]
    relu_params = None
    if relu is not None:
        relu_params = bnd.ReluComplexityParams(
            int(relu["depth_q"]), float(relu["frobenius_product_M"]), float(relu["input_sup_norm"])
        )
        result["relu"] = {
            "mean_complexity_C": bnd.relu_mean_complexity(relu_params),
            "bound_B": bnd.relu_bound_B(relu_params),
        }
    if cfg["complexity"] is not None:
        c = dict(cfg["complexity"])
        if relu_params is not None:
            c.setdefault("mean_complexity_C", result["relu"]["mean_complexity_C"])
            c.setdefault("bound_B", result["relu"]["bound_B"])
        try:
            params = bnd.ComplexityParams(**c)
        except TypeError as exc:
            raise ConfigError(f"invalid complexity params: {exc}") from None
        window = bnd.validity_window(params)
        result["window"] = {"lo": window.lo, "hi": window.hi, "empty": window.empty}
        table = []
        for theta in cfg["thetas"] or []:
            value = bnd.angular_bound_probability(params, theta) if window.contains(theta) else None
            table.append({"theta": theta, "pi": value})
        result["pi"] = table
    if cfg["stats"] is not None:
        stats = ClassStats(cfg["stats"]["counts"], cfg["stats"]["mean_norms"])
        angles = bnd.optimal_angle_matrix(stats, psi(stats.num_classes), float(cfg["gamma"]))
        result["theta_star"] = _nan_to_none(angles.angles)
    if not result:
        raise ConfigError("bounds needs at least one of: complexity, relu, stats")
    _dump_json(out / "bounds.json", result)
    if "window" in result and result["window"]["empty"]:
        print("validity window is empty")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "heatmap": cmd_heatmap,
    "sweep": cmd_sweep,
    "bounds": cmd_bounds,
}

DEFAULT_FORMATS = {"simulate": "json", "evaluate": "json", "heatmap": "csv", "sweep": "csv", "bounds": "json"}


def build_parser():
    parser = argparse.ArgumentParser(prog="ncadjust", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="JSON config document")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--format", choices=["json", "csv"], help="report format")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config is not None:
            try:
                raw = json.loads(args.config.read_text())
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from None
        cfg = resolve_config(args.command, raw, {"seed": args.seed})
        args.out.mkdir(parents=True, exist_ok=True)
        fmt = args.format or DEFAULT_FORMATS[args.command]
        return COMMANDS[args.command](cfg, args.out, fmt)
    except NcAdjustError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
