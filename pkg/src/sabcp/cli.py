"""Command line benchmark harness.

Subcommands:
    run      evaluate methods on price CSVs (and/or the synthetic stream)
    sweep-k  sweep the gate constant K for the state-adaptive method
    synth    the scheduled-shock synthetic experiment with logged gate traces
    report   aggregate a run directory into a table, tidy CSV, and figures

Every flag can also come from a flat ``key = value`` config file passed via
--config; explicit flags win over the file. Exit codes: 0 success, 1 partial
cell failures, 2 invalid plan or configuration.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core import ConfigError, DataError
from .data import SyntheticSpec
from .harness import (
    DEFAULT_ALPHAS,
    DEFAULT_K_GRID,
    DEFAULT_STATE_DIM,
    DEFAULT_WARMUP,
    METHODS,
    BenchmarkPlan,
    DatasetSpec,
    run_plan,
    sweep_k,
)
from .report import write_report

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_INVALID = 2


def _parse_config_file(path: str) -> dict[str, str]:
    p = Path(path)
    if not p.exists():
        raise ConfigError([f"config file not found: {p}"])
    values: dict[str, str] = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError([f"{p}:{lineno}: expected 'key = value', got {line!r}"])
        key, _, value = stripped.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _csv_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _csv_names(text: str) -> list[str]:
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def _add_common(sub: argparse.ArgumentParser, *, synth: bool) -> None:
    sub.add_argument("--config", help="flat key = value file; flags override it")
    sub.add_argument("--out", help="output directory (required)")
    sub.add_argument("--alpha", help="comma-separated miscoverage levels")
    sub.add_argument("--model", help=f"comma-separated subset of {','.join(METHODS)}")
    sub.add_argument("--k", type=float, help="gate constant K")
    sub.add_argument("--beta", type=float, help="temporal discount factor")
    sub.add_argument("--r-max", type=float, dest="r_max",
                     help="score prior upper bound (default: data-driven)")
    sub.add_argument("--score-mode", choices=("absolute", "scaled"), dest="score_mode")
    sub.add_argument("--seed", type=int, help="generator seed")
    sub.add_argument("--jobs", type=int, help="parallel worker processes")
    if not synth:
        sub.add_argument("--data", action="append", default=None, metavar="ASSET=PATH",
                         help="price CSV; repeatable; bare PATH uses the file stem as asset id")
        sub.add_argument("--k-for", action="append", default=None, metavar="ASSET=K",
                         dest="k_for", help="per-asset K override; repeatable")
        sub.add_argument("--state-dim", type=int, dest="state_dim",
                         help="lagged absolute returns per state vector")
        sub.add_argument("--warmup", type=int, help="base-model warmup steps")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sabcp",
                                     description="state-adaptive conformal interval benchmarks")
    subs = parser.add_subparsers(dest="command", required=True)

    run_p = subs.add_parser("run", help="evaluate methods on datasets")
    _add_common(run_p, synth=False)

    sweep_p = subs.add_parser("sweep-k", help="sweep the gate constant for sabcp")
    _add_common(sweep_p, synth=False)
    sweep_p.add_argument("--k-grid", dest="k_grid",
                         help="comma-separated K values "
                              f"(default {','.join(format(k, 'g') for k in DEFAULT_K_GRID)})")

    synth_p = subs.add_parser("synth", help="scheduled-shock synthetic experiment")
    _add_common(synth_p, synth=True)
    synth_p.add_argument("--steps", type=int, help="stream length (default 900)")
    synth_p.add_argument("--shock-starts", dest="shock_starts",
                         help="comma-separated shock start steps (default 200,450,700)")
    synth_p.add_argument("--shock-len", type=int, dest="shock_len",
                         help="shock window length (default 30)")

    report_p = subs.add_parser("report", help="aggregate a run directory")
    report_p.add_argument("--out", help="run directory to aggregate (required)")
    report_p.add_argument("--report-dir", dest="report_dir",
                          help="where to write the report (default: <out>/report)")
    return parser


def _merged(args: argparse.Namespace) -> dict:
    """File values under flag values; returns a plain dict of strings/typed flags."""
    merged: dict = {}
    if getattr(args, "config", None):
        merged.update(_parse_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("command", "config"):
            continue
        if value is not None:
            merged[key] = value
    return merged


def _get(merged: dict, key: str, default, conv):
    if key not in merged:
        return default
    v = merged[key]
    if isinstance(v, str):
        return conv(v)
    return v


def _parse_datasets(merged: dict) -> tuple[DatasetSpec, ...]:
    raw = merged.get("data")
    if raw is None:
        raise ConfigError(["no datasets: pass --data ASSET=PATH (repeatable)"])
    if isinstance(raw, str):
        raw = _csv_names(raw)
    specs = []
    for item in raw:
        if "=" in item:
            asset, _, path = item.partition("=")
            specs.append(DatasetSpec(asset=asset.strip(), path=path.strip()))
        else:
            specs.append(DatasetSpec(asset=Path(item).stem, path=item.strip()))
    return tuple(specs)


def _parse_k_overrides(merged: dict) -> tuple[tuple[str, float], ...]:
    raw = merged.get("k_for")
    if raw is None:
        return ()
    if isinstance(raw, str):
        raw = _csv_names(raw)
    out = []
    for item in raw:
        if "=" not in item:
            raise ConfigError([f"--k-for needs ASSET=K, got {item!r}"])
        asset, _, k = item.partition("=")
        out.append((asset.strip(), float(k)))
    return tuple(out)


def _plan_from(merged: dict, datasets) -> BenchmarkPlan:
    if "out" not in merged:
        raise ConfigError(["--out is required"])
    methods = tuple(_get(merged, "model", list(METHODS), _csv_names))
    alphas = tuple(_get(merged, "alpha", list(DEFAULT_ALPHAS), _csv_floats))
    return BenchmarkPlan(
        datasets=tuple(datasets),
        out=str(merged["out"]),
        methods=methods,
        alphas=alphas,
        k=_get(merged, "k", 1.0, float),
        k_overrides=_parse_k_overrides(merged),
        beta=_get(merged, "beta", 0.99, float),
        r_max=_get(merged, "r_max", None, float),
        state_dim=_get(merged, "state_dim", DEFAULT_STATE_DIM, int),
        score_mode=_get(merged, "score_mode", "scaled", str),
        warmup=_get(merged, "warmup", DEFAULT_WARMUP, int),
        seed=_get(merged, "seed", 0, int),
        jobs=_get(merged, "jobs", 1, int),
    )


def _cmd_run(args) -> int:
    merged = _merged(args)
    plan = _plan_from(merged, _parse_datasets(merged))
    return run_plan(plan)


def _cmd_sweep(args) -> int:
    merged = _merged(args)
    plan = _plan_from(merged, _parse_datasets(merged))
    grid = tuple(_get(merged, "k_grid", list(DEFAULT_K_GRID), _csv_floats))
    return sweep_k(plan, grid)


def _cmd_synth(args) -> int:
    merged = _merged(args)
    spec = SyntheticSpec(
        total_steps=_get(merged, "steps", 900, int),
        shock_starts=tuple(int(s) for s in _get(merged, "shock_starts", [200, 450, 700],
                                                lambda t: _csv_floats(t))),
        shock_len=_get(merged, "shock_len", 30, int),
        seed=_get(merged, "seed", 0, int),
    )
    merged.setdefault("model", "sabcp,bcp")
    merged.setdefault("alpha", "0.1")
    merged.setdefault("k", 10.0)
    merged.setdefault("score_mode", "absolute")
    plan = _plan_from(merged, (DatasetSpec(asset="synthetic", synth=spec),))
    return run_plan(plan)


def _cmd_report(args) -> int:
    if args.out is None:
        raise ConfigError(["--out is required"])
    result = write_report(args.out, args.report_dir)
    print(f"wrote {result['table']} ({result['rows']} cells, {len(result['figures'])} figures)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep-k": _cmd_sweep,
        "synth": _cmd_synth,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
