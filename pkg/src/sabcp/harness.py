"""Benchmark harness: plans, cells, and deterministic execution.

A plan is a grid of (dataset, method, alpha[, k]) cells, every cell
evaluated on the identical warmup/evaluation split of its dataset. Cells
are independent state machines, so the harness may fan them out over
processes; results are always written serially in cell order, which makes
parallel and serial runs byte-identical.

Artifacts per run directory:
    steps/<cell>.csv   one row per evaluated step
    summary.csv        one row per cell (Table-style columns plus extras)
    summary.txt        the same table, aligned for humans
    status.json        per-cell status and the derived exit code
    plan.txt           the resolved plan, echoed as key = value lines
"""

from __future__ import annotations

import json
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import AciPredictor, AgAciPredictor, BcpPredictor, DtAciPredictor
from .core import (
    ConfigError,
    DataError,
    Observation,
    SabcpConfig,
    nonconformity,
    stream_step,
    validate_config,
)
from .data import StateBuilder, SyntheticSpec, load_prices, synth_stream
from .engine import SabcpPredictor
from .garch import DEFAULT_ARCH, DEFAULT_GARCH, GarchModel
from .metrics import RunReport, StepRecord, aggregate, high_vol_mask, make_record

METHODS = ("sabcp", "bcp", "aci", "agaci", "dtaci")
DEFAULT_ALPHAS = (0.1, 0.2, 0.3)
DEFAULT_WARMUP = 250
DEFAULT_STATE_DIM = 5
DEFAULT_K_GRID = (0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)
SYNTH_R_MAX = 10.0
R_MAX_WARMUP_MULT = 10.0
MIN_EVAL_STEPS = 30

STEP_COLUMNS = (
    "t",
    "y",
    "center",
    "scale",
    "lower",
    "upper",
    "covered",
    "width",
    "winkler",
    "q_hat",
    "pi_s",
    "d_s",
    "lambda_t",
)

SUMMARY_COLUMNS = (
    "asset",
    "model",
    "target",
    "alpha",
    "k",
    "marginal",
    "high_vol",
    "width",
    "winkler",
    "n_steps",
    "n_high_vol",
)


@dataclass(frozen=True)
class DatasetSpec:
    """One benchmark input: a price CSV path or a synthetic generator spec."""

    asset: str
    path: str | None = None
    synth: SyntheticSpec | None = None

    def __post_init__(self):
        if (self.path is None) == (self.synth is None):
            raise ConfigError([f"dataset {self.asset!r}: exactly one of path / synth required"])


@dataclass(frozen=True)
class BenchmarkPlan:
    datasets: tuple[DatasetSpec, ...]
    out: str
    methods: tuple[str, ...] = METHODS
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    k: float = 1.0
    k_overrides: tuple[tuple[str, float], ...] = ()
    beta: float = 0.99
    r_max: float | None = None
    state_dim: int = DEFAULT_STATE_DIM
    score_mode: str = "scaled"
    warmup: int = DEFAULT_WARMUP
    seed: int = 0
    jobs: int = 1


def validate_plan(plan: BenchmarkPlan) -> BenchmarkPlan:
    problems = []
    if not plan.datasets:
        problems.append("plan needs at least one dataset")
    seen = set()
    for ds in plan.datasets:
        if ds.asset in seen:
            problems.append(f"duplicate asset id {ds.asset!r}")
        seen.add(ds.asset)
    for m in plan.methods:
        if m not in METHODS:
            problems.append(f"unknown method {m!r}; choose from {METHODS}")
    if not plan.methods:
        problems.append("plan needs at least one method")
    for a in plan.alphas:
        if not (0.0 < a < 1.0):
            problems.append(f"alpha must lie in (0, 1), got {a!r}")
    if not plan.alphas:
        problems.append("plan needs at least one alpha")
    if not plan.k > 0.0:
        problems.append(f"k must be positive, got {plan.k!r}")
    for asset, k in plan.k_overrides:
        if asset not in seen:
            problems.append(f"k override for unknown asset {asset!r}")
        if not k > 0.0:
            problems.append(f"k override for {asset!r} must be positive, got {k!r}")
    if not (0.0 < plan.beta < 1.0):
        problems.append(f"beta must lie in (0, 1), got {plan.beta!r}")
    if plan.r_max is not None and not plan.r_max > 0.0:
        problems.append(f"r_max must be positive, got {plan.r_max!r}")
    if plan.state_dim < 1:
        problems.append(f"state_dim must be >= 1, got {plan.state_dim}")
    if plan.score_mode not in ("absolute", "scaled"):
        problems.append(f"score_mode must be absolute or scaled, got {plan.score_mode!r}")
    if plan.warmup < 30:
        problems.append(f"warmup must be >= 30, got {plan.warmup}")
    if plan.jobs < 1:
        problems.append(f"jobs must be >= 1, got {plan.jobs}")
    if problems:
        raise ConfigError(problems)
    return plan


@dataclass(frozen=True)
class CellSpec:
    asset: str
    method: str
    alpha: float
    k: float
    tag_k: bool = False  # sweep cells carry their k in the cell id

    @property
    def target_label(self) -> str:
        return format(100.0 * (1.0 - self.alpha), "g")

    @property
    def cell_id(self) -> str:
        mid = f"{self.method}__k{format(self.k, 'g')}" if self.tag_k else self.method
        return f"{self.asset}__{mid}__t{self.target_label}"


@dataclass
class StreamData:
    """A materialized dataset, shared by every cell that evaluates it."""

    asset: str
    kind: str  # "returns" | "synthetic"
    returns: np.ndarray | None = None
    ys: np.ndarray | None = None
    features: np.ndarray | None = None


def materialize(ds: DatasetSpec) -> StreamData:
    if ds.path is not None:
        series = load_prices(ds.path, asset=ds.asset)
        return StreamData(asset=ds.asset, kind="returns", returns=series.returns)
    obs = synth_stream(ds.synth)
    ys = np.asarray([o.y for o in obs])
    feats = np.asarray([o.features for o in obs])
    return StreamData(asset=ds.asset, kind="synthetic", ys=ys, features=feats)


def build_cells(plan: BenchmarkPlan, k_grid=None) -> list[CellSpec]:
    """Expand the plan grid; with ``k_grid`` the sweep variant (sabcp only)."""
    overrides = dict(plan.k_overrides)
    cells = []
    for ds in plan.datasets:
        base_k = overrides.get(ds.asset, plan.k)
        for alpha in plan.alphas:
            if k_grid is None:
                for method in plan.methods:
                    cells.append(CellSpec(ds.asset, method, alpha, base_k))
            else:
                for k in k_grid:
                    cells.append(CellSpec(ds.asset, "sabcp", alpha, float(k), tag_k=True))
    return cells


class ReturnPipeline:
    """Volatility base model + state builder + one conformal wrapper."""

    def __init__(self, model: GarchModel, builder: StateBuilder, predictor, score_mode: str):
        self.model = model
        self.builder = builder
        self.predictor = predictor
        self.score_mode = score_mode
        self.steps_seen = 0

    def step(self, obs: Observation):
        st = self.builder.state()
        vec = None if st.cold else st.vector
        center, scale = self.model.forecast()
        fc = self.predictor.step(center, scale, obs.y, vec)
        self.model.update(obs.y)
        self.builder.push(obs.y)
        self.steps_seen += 1
        return fc


class FeaturePipeline:
    """Zero-center, unit-scale base; the observation's feature is the state."""

    def __init__(self, predictor):
        self.predictor = predictor
        self.steps_seen = 0

    def step(self, obs: Observation):
        if obs.features is None:
            raise DataError(f"step {obs.t}: synthetic stream without features")
        fc = self.predictor.step(0.0, 1.0, obs.y, np.asarray(obs.features, dtype=np.float64))
        self.steps_seen += 1
        return fc


def make_predictor(method: str, cfg: SabcpConfig):
    if method == "sabcp":
        return SabcpPredictor(cfg)
    if method == "bcp":
        return BcpPredictor(cfg)
    common = dict(r_max=cfg.r_max, score_mode=cfg.score_mode)
    if method == "aci":
        return AciPredictor(cfg.alpha, **common)
    if method == "agaci":
        return AgAciPredictor(cfg.alpha, **common)
    if method == "dtaci":
        return DtAciPredictor(cfg.alpha, **common)
    raise ConfigError([f"unknown method {method!r}"])


@dataclass
class CellResult:
    cell: CellSpec
    ok: bool
    records: list[StepRecord] = field(default_factory=list)
    inputs: list[tuple[float, float, float]] = field(default_factory=list)  # (y, center, scale)
    report: RunReport | None = None
    error: str | None = None


def run_cell(plan: BenchmarkPlan, data: StreamData, cell: CellSpec) -> CellResult:
    """Evaluate one cell; deterministic given (plan, data, cell)."""
    try:
        if data.kind == "returns":
            records, inputs = _run_return_cell(plan, data, cell)
        else:
            records, inputs = _run_synthetic_cell(plan, data, cell)
        mask = high_vol_mask([r.y for r in records])
        report = aggregate(records, mask)
        return CellResult(cell=cell, ok=True, records=records, inputs=inputs, report=report)
    except Exception:
        return CellResult(cell=cell, ok=False, error=traceback.format_exc(limit=4))


def _run_return_cell(plan, data, cell):
    returns = data.returns
    if len(returns) < plan.warmup + MIN_EVAL_STEPS:
        raise DataError(
            f"{data.asset}: {len(returns)} returns cannot cover warmup {plan.warmup} "
            f"plus {MIN_EVAL_STEPS} evaluation steps"
        )
    warm = returns[: plan.warmup]
    evals = returns[plan.warmup :]
    model, warm_scales = GarchModel.from_warmup(warm, DEFAULT_ARCH, DEFAULT_GARCH, replay=True)
    warm_scores = [
        nonconformity(0.0, s, float(r), plan.score_mode) for r, s in zip(warm, warm_scales)
    ]
    r_max = plan.r_max
    if r_max is None:
        r_max = R_MAX_WARMUP_MULT * float(np.std(warm_scores, ddof=1))
    cfg = validate_config(
        SabcpConfig(
            alpha=cell.alpha,
            beta=plan.beta,
            k=cell.k,
            r_max=r_max,
            state_dim=plan.state_dim,
            score_mode=plan.score_mode,
        )
    )
    builder = StateBuilder(plan.state_dim)
    for r in warm:
        builder.push(float(r))
    pipeline = ReturnPipeline(model, builder, make_predictor(cell.method, cfg), plan.score_mode)
    records, inputs = [], []
    for i, r in enumerate(evals):
        center, scale = pipeline.model.forecast()
        fc = stream_step(pipeline, Observation(t=i, y=float(r)))
        records.append(make_record(i, float(r), fc, cell.alpha))
        inputs.append((float(r), center, scale))
    return records, inputs


def _run_synthetic_cell(plan, data, cell):
    r_max = plan.r_max if plan.r_max is not None else SYNTH_R_MAX
    cfg = validate_config(
        SabcpConfig(
            alpha=cell.alpha,
            beta=plan.beta,
            k=cell.k,
            r_max=r_max,
            state_dim=int(data.features.shape[1]),
            score_mode=plan.score_mode,
        )
    )
    pipeline = FeaturePipeline(make_predictor(cell.method, cfg))
    records, inputs = [], []
    for i, (y, feat) in enumerate(zip(data.ys, data.features)):
        fc = stream_step(pipeline, Observation(t=i, y=float(y), features=feat))
        records.append(make_record(i, float(y), fc, cell.alpha))
        inputs.append((float(y), 0.0, 1.0))
    return records, inputs


# -- artifact writing --------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _step_row(rec: StepRecord, inp) -> str:
    y, center, scale = inp
    return ",".join(
        (
            str(rec.t),
            _fmt(rec.y),
            _fmt(center),
            _fmt(scale),
            _fmt(rec.lower),
            _fmt(rec.upper),
            "1" if rec.covered else "0",
            _fmt(rec.width),
            _fmt(rec.winkler),
            _fmt(rec.q_hat),
            _fmt(rec.pi_s),
            _fmt(rec.d_s),
            _fmt(rec.lambda_t),
        )
    )


def _summary_row(cell: CellSpec, report: RunReport) -> dict:
    return {
        "asset": cell.asset,
        "model": cell.method,
        "target": cell.target_label,
        "alpha": _fmt(cell.alpha),
        "k": _fmt(cell.k),
        "marginal": _fmt(report.marginal_coverage),
        "high_vol": "" if report.high_vol_coverage is None else _fmt(report.high_vol_coverage),
        "width": _fmt(report.avg_width),
        "winkler": _fmt(report.avg_winkler),
        "n_steps": str(report.n_steps),
        "n_high_vol": str(report.n_high_vol),
    }


def render_summary_table(rows: list[dict]) -> str:
    """Fixed-width text table over the summary rows (4-decimal metrics)."""
    headers = ("asset", "target", "model", "k", "marginal", "high_vol", "width", "winkler")

    def short(row, col):
        v = row[col]
        if col in ("marginal", "high_vol", "width", "winkler", "k") and v != "":
            return format(float(v), ".4f")
        return v

    cells = [[short(r, h) for h in headers] for r in rows]
    widths = [max(len(h), *(len(c[i]) for c in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for c in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(c, widths)))
    return "\n".join(lines) + "\n"


def _plan_echo(plan: BenchmarkPlan, k_grid=None) -> str:
    lines = []
    for ds in plan.datasets:
        src = ds.path if ds.path is not None else f"synthetic(seed={ds.synth.seed}, steps={ds.synth.total_steps})"
        lines.append(f"dataset.{ds.asset} = {src}")
    lines.append("methods = " + ",".join(plan.methods))
    lines.append("alphas = " + ",".join(format(a, "g") for a in plan.alphas))
    lines.append(f"k = {format(plan.k, 'g')}")
    for asset, k in plan.k_overrides:
        lines.append(f"k.{asset} = {format(k, 'g')}")
    lines.append(f"beta = {format(plan.beta, 'g')}")
    lines.append(f"r_max = {'auto' if plan.r_max is None else format(plan.r_max, 'g')}")
    lines.append(f"state_dim = {plan.state_dim}")
    lines.append(f"score_mode = {plan.score_mode}")
    lines.append(f"warmup = {plan.warmup}")
    lines.append(f"seed = {plan.seed}")
    if k_grid is not None:
        lines.append("k_grid = " + ",".join(format(k, "g") for k in k_grid))
    return "\n".join(lines) + "\n"


def _worker(args) -> CellResult:
    plan, data, cell = args
    return run_cell(plan, data, cell)


def execute_plan(plan: BenchmarkPlan, k_grid=None) -> int:
    """Run every cell and write the artifact tree; returns the exit code.

    0 when every cell completed, 1 when some failed (survivors are still
    written). Parallel scheduling (plan.jobs > 1) changes only wall time:
    results are gathered and written in deterministic cell order.
    """
    validate_plan(plan)
    out = Path(plan.out)
    steps_dir = out / "steps"
    steps_dir.mkdir(parents=True, exist_ok=True)

    payloads: dict[str, StreamData | str] = {}
    for ds in plan.datasets:
        try:
            payloads[ds.asset] = materialize(ds)
        except Exception as exc:
            payloads[ds.asset] = f"{type(exc).__name__}: {exc}"

    cells = build_cells(plan, k_grid)
    runnable = [c for c in cells if not isinstance(payloads[c.asset], str)]
    jobs = [(plan, payloads[c.asset], c) for c in runnable]
    if plan.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
            results = list(pool.map(_worker, jobs))
    else:
        results = [_worker(j) for j in jobs]
    by_id = {res.cell.cell_id: res for res in results}

    summary_rows: list[dict] = []
    status: list[dict] = []
    for cell in cells:
        payload = payloads[cell.asset]
        if isinstance(payload, str):
            status.append({"cell": cell.cell_id, "status": "error", "message": payload})
            continue
        res = by_id[cell.cell_id]
        if not res.ok:
            status.append({"cell": cell.cell_id, "status": "error", "message": res.error})
            continue
        path = steps_dir / f"{cell.cell_id}.csv"
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(STEP_COLUMNS) + "\n")
            for rec, inp in zip(res.records, res.inputs):
                fh.write(_step_row(rec, inp) + "\n")
        summary_rows.append(_summary_row(cell, res.report))
        status.append({"cell": cell.cell_id, "status": "ok", "message": ""})

    with (out / "summary.csv").open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in summary_rows:
            fh.write(",".join(row[c] for c in SUMMARY_COLUMNS) + "\n")
    (out / "summary.txt").write_text(render_summary_table(summary_rows), encoding="utf-8")
    (out / "plan.txt").write_text(_plan_echo(plan, k_grid), encoding="utf-8")

    exit_code = 0 if all(s["status"] == "ok" for s in status) else 1
    payload = {"cells": status, "exit_code": exit_code}
    (out / "status.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return exit_code


def run_plan(plan: BenchmarkPlan) -> int:
    return execute_plan(plan)


def sweep_k(plan: BenchmarkPlan, k_grid=DEFAULT_K_GRID) -> int:
    """Sweep the gate constant over ``k_grid`` for the sabcp method only."""
    if not k_grid:
        raise ConfigError(["k_grid must be non-empty"])
    grid = tuple(float(k) for k in k_grid)
    for k in grid:
        if not k > 0.0:
            raise ConfigError([f"k grid values must be positive, got {k!r}"])
    return execute_plan(replace(plan, methods=("sabcp",)), k_grid=grid)
