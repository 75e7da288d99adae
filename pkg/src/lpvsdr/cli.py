"""Command-line interface.

Exit codes: 0 ok, 2 usage/config error, 3 fit failure, 4 every sweep cell
failed, 5 self-check failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .checks import SUITES, run_suite
from .core import AffineLpvModel, TrajectoryDataset
from .evaluation import METHODS, fit_method, sweep
from .manipulator import ManipulatorParams, build_lpv_model
from .simulation import DEFAULT_REFERENCES, ReferenceSpec, generate_scheduling_data

CONFIG_DIR_ENV = "LPVSDR_CONFIG_DIR"

EXIT_OK, EXIT_USAGE, EXIT_FIT, EXIT_SWEEP, EXIT_CHECK = 0, 2, 3, 4, 5


class ConfigError(Exception):
    pass


def _resolve(path) -> Path:
    path = Path(path)
    if not path.is_absolute() and not path.exists() and os.environ.get(CONFIG_DIR_ENV):
        alt = Path(os.environ[CONFIG_DIR_ENV]) / path
        if alt.exists():
            return alt
    return path


def load_config(path) -> tuple[dict, Path]:
    """Read a JSON config; returns the dict and the directory relative paths refer to."""
    if path is None:
        return {}, Path.cwd()
    path = _resolve(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return cfg, path.parent


def _field(cfg: dict, name: str, build):
    try:
        return build(cfg[name])
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"field '{name}': {exc}") from exc


def _params(cfg: dict) -> ManipulatorParams:
    if "params" not in cfg:
        return ManipulatorParams()
    return _field(cfg, "params", ManipulatorParams.from_dict)


def _reference(cfg: dict) -> ReferenceSpec:
    ref = cfg.get("reference", "reference-1")
    if isinstance(ref, str):
        if ref not in DEFAULT_REFERENCES:
            raise ConfigError(f"field 'reference': unknown preset {ref!r}")
        return DEFAULT_REFERENCES[ref]()
    return _field(cfg, "reference", ReferenceSpec.from_dict)


def _model_and_data(cfg: dict, base: Path, dataset_arg=None, model_arg=None):
    if model_arg or cfg.get("model"):
        mpath = _resolve(model_arg or base / cfg["model"])
        try:
            model = AffineLpvModel.load(mpath)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"field 'model': cannot load {mpath}: {exc}") from exc
    else:
        model = build_lpv_model(_params(cfg))
    if dataset_arg or cfg.get("dataset"):
        dpath = _resolve(dataset_arg or base / cfg["dataset"])
        try:
            dataset = TrajectoryDataset.load(dpath)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"field 'dataset': cannot load {dpath}: {exc}") from exc
    else:
        dataset = generate_scheduling_data(_params(cfg), _reference(cfg))
    if dataset.n_rho != model.n_rho:
        raise ConfigError(f"dataset has {dataset.n_rho} rows but model has n_rho={model.n_rho}")
    return model, dataset


def _options(cfg: dict) -> dict:
    keys = ("kernel", "ae", "dnn", "arch", "warm_start", "include_intercept")
    return {k: cfg[k] for k in keys if k in cfg}


def _parse_range(text: str) -> list[int]:
    try:
        if ".." in text:
            a, b = text.split("..")
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}")
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid range {text!r}")
    return list(range(lo, hi + 1))


def _parse_methods(text: str) -> list[str]:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    if methods == ["all"]:
        return list(METHODS)
    for m in methods:
        if m not in METHODS:
            raise argparse.ArgumentTypeError(f"unknown method {m!r}")
    return methods


# -- commands --------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg, base = load_config(args.config)
    spec = _reference(cfg)
    dataset = generate_scheduling_data(_params(cfg), spec)
    out = Path(args.out or cfg.get("out", "gamma.csv"))
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.save(out)
    print(f"wrote {out}: n_rho={dataset.n_rho} N={dataset.n_samples}")
    return EXIT_OK


def cmd_reduce(args) -> int:
    cfg, base = load_config(args.config)
    model, dataset = _model_and_data(cfg, base, args.dataset, args.model)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    try:
        res = fit_method(args.method, model, dataset, args.nphi, _options(cfg), seed)
    except Exception as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reducer.json").write_text(json.dumps(res.reducer.to_dict()))
    res.reduced.save(out / "reduced_model.json")
    print(f"method={args.method} n_phi={args.nphi} cost={res.cost!r}")
    return EXIT_OK


def _run_sweep(model, dataset, methods, nphi, seeds, options, out, jobs) -> int:
    report = sweep(model, dataset, methods, nphi, seeds, options, jobs=jobs)
    json_path, csv_path = report.write(out)
    ok = [c for c in report.cells if c.status == "ok"]
    for c in report.cells:
        shown = "failed: " + c.error if c.status != "ok" else f"{c.cost:.6g}"
        print(f"{c.method:5s} n_phi={c.n_phi:2d} {shown}")
    print(f"wrote {json_path} and {csv_path}")
    return EXIT_OK if ok else EXIT_SWEEP


def cmd_sweep(args) -> int:
    if not args.methods:
        print("error: empty method list", file=sys.stderr)
        return EXIT_USAGE
    cfg, base = load_config(args.config)
    model, dataset = _model_and_data(cfg, base, args.dataset, args.model)
    seeds = list(range(args.seed, args.seed + args.seeds))
    return _run_sweep(model, dataset, args.methods, args.nphi_range, seeds, _options(cfg),
                      args.out, args.jobs)


def cmd_check(args) -> int:
    results = run_suite(args.suite)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_reproduce(args) -> int:
    """generate -> sweep over every method -> report."""
    cfg, base = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = _params(cfg)
    dataset = generate_scheduling_data(params, _reference(cfg))
    dataset.save(out / "gamma.csv")
    model = build_lpv_model(params)
    model.save(out / "model.json")
    options = _options(cfg)
    options.setdefault("warm_start", not args.no_warm_start)
    if args.epochs is not None:
        for key in ("ae", "dnn"):
            options[key] = {**options.get(key, {}), "epochs": args.epochs}
    seeds = list(range(args.seed, args.seed + args.seeds))
    return _run_sweep(model, dataset, list(METHODS), args.nphi_range, seeds, options, out,
                      args.jobs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpvsdr",
                                     description="Scheduling dimension reduction of LPV models")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a scheduling dataset")
    p.add_argument("--config")
    p.add_argument("--out", help="CSV path (sidecar JSON written next to it)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("reduce", help="fit one reduction method")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--nphi", required=True, type=int)
    p.add_argument("--config")
    p.add_argument("--dataset")
    p.add_argument("--model")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("sweep", help="compare methods over a range of n_phi")
    p.add_argument("--methods", required=True, type=_parse_methods)
    p.add_argument("--nphi-range", required=True, type=_parse_range)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--config")
    p.add_argument("--dataset")
    p.add_argument("--model")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="run the oracle self-checks")
    p.add_argument("--suite", default="all", choices=[*SUITES, "all"])
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reproduce-benchmark", help="generate, sweep all methods, report")
    p.add_argument("--config")
    p.add_argument("--out", default="benchmark")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--nphi-range", type=_parse_range, default=list(range(1, 11)))
    p.add_argument("--epochs", type=int, help="override AE/DNN epochs")
    p.add_argument("--no-warm-start", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
