"""Input pipelines: synthetic generators, price CSV ingestion, spatial states.

Two seeded generators: a regime-switching stream with scheduled shock
windows (stable feature near 1, shocks jumping feature and target to 3),
and a volatility-regime stream whose per-step dispersion is tied to a
latent feature observed through additive noise. Price ingestion reads a
``date, close`` CSV into percent log-returns. State construction normalizes
the most recent absolute returns by their running moments.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path

import numpy as np

from .core import DataError, Observation
from .spatial import OnlineMoments

log = logging.getLogger(__name__)

MIN_PRICE_ROWS = 300
NORM_FLOOR = 1e-8


@dataclass(frozen=True)
class SyntheticSpec:
    """Regime-switching generator with scheduled shock windows.

    Normal steps draw the feature near ``normal_x`` and the target near
    ``normal_y``; steps inside a shock window draw from the shock
    parameters instead. Parameter pairs are (mean, standard deviation).
    """

    total_steps: int = 900
    shock_starts: tuple[int, ...] = (200, 450, 700)
    shock_len: int = 30
    seed: int = 0
    normal_x: tuple[float, float] = (1.0, 0.1)
    normal_y: tuple[float, float] = (0.0, 0.5)
    shock_x: tuple[float, float] = (3.0, 0.1)
    shock_y: tuple[float, float] = (3.0, 0.5)

    def __post_init__(self):
        if self.total_steps < 1:
            raise DataError(f"total_steps must be positive, got {self.total_steps}")
        if self.shock_len < 1:
            raise DataError(f"shock_len must be positive, got {self.shock_len}")
        prev_end = -1
        for s in sorted(self.shock_starts):
            if s < 0 or s + self.shock_len > self.total_steps:
                raise DataError(f"shock window [{s}, {s + self.shock_len}) leaves the stream")
            if s <= prev_end:
                raise DataError("shock windows overlap")
            prev_end = s + self.shock_len - 1

    def shock_mask(self) -> np.ndarray:
        mask = np.zeros(self.total_steps, dtype=bool)
        for s in self.shock_starts:
            mask[s : s + self.shock_len] = True
        return mask


def synth_stream(spec: SyntheticSpec) -> list[Observation]:
    """Materialize the stream; the 1-dim feature X_t doubles as the spatial state."""
    rng = np.random.default_rng(spec.seed)
    mask = spec.shock_mask()
    out = []
    for t in range(spec.total_steps):
        mx, sx = spec.shock_x if mask[t] else spec.normal_x
        my, sy = spec.shock_y if mask[t] else spec.normal_y
        x = rng.normal(mx, sx)
        y = rng.normal(my, sy)
        out.append(Observation(t=t, y=float(y), features=np.array([x])))
    return out


@dataclass(frozen=True)
class VolRegimeSpec:
    """Markov-switching dispersion with a noisily observed regime state.

    The latent regime flips between low and high volatility (persistence
    ``p_stay``); the observable state repeats the regime's feature level in
    every slot and adds independent Gaussian noise per slot, so spatial
    matching faces irreducible feature noise by construction.
    """

    total_steps: int = 1200
    seed: int = 0
    p_stay: float = 0.97
    vol_low: float = 0.5
    vol_high: float = 1.5
    feature_low: float = 0.0
    feature_high: float = 2.0
    feature_noise_sd: float = 0.5
    state_dim: int = 1
    informative_dims: int | None = None  # slots carrying the regime level (rest: pure noise)

    def __post_init__(self):
        if self.total_steps < 1:
            raise DataError(f"total_steps must be positive, got {self.total_steps}")
        if not (0.0 < self.p_stay < 1.0):
            raise DataError(f"p_stay must lie in (0, 1), got {self.p_stay}")
        if self.state_dim < 1:
            raise DataError(f"state_dim must be >= 1, got {self.state_dim}")
        k = self.informative_dims
        if k is not None and not (1 <= k <= self.state_dim):
            raise DataError(f"informative_dims must lie in [1, state_dim], got {k}")


def vol_regime_stream(spec: VolRegimeSpec) -> list[Observation]:
    rng = np.random.default_rng(spec.seed)
    n_inf = spec.state_dim if spec.informative_dims is None else spec.informative_dims
    out = []
    high = False
    for t in range(spec.total_steps):
        if rng.uniform() > spec.p_stay:
            high = not high
        f = spec.feature_high if high else spec.feature_low
        vol = spec.vol_high if high else spec.vol_low
        x = rng.normal(0.0, spec.feature_noise_sd, size=spec.state_dim)
        x[:n_inf] += f
        y = rng.normal(0.0, vol)
        out.append(Observation(t=t, y=float(y), features=x))
    return out


@dataclass
class ReturnSeries:
    """Percent log-returns of one asset, dated by the day each return realizes."""

    asset: str
    dates: list[date]
    returns: np.ndarray
    n_dropped: int = 0

    def __len__(self) -> int:
        return len(self.returns)


def load_prices(path, asset: str | None = None) -> ReturnSeries:
    """Read a ``date, close`` CSV into percent log-returns.

    Rows are sorted by date; duplicate dates are rejected; rows with
    non-positive prices are dropped (counted and logged). Extra columns are
    ignored. A series shorter than 300 usable rows cannot cover the warmup
    plus a meaningful evaluation window and is rejected.
    """
    p = Path(path)
    if not p.exists():
        raise DataError(f"no such file: {p}")
    rows: list[tuple[date, float]] = []
    dropped = 0
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{p}: empty file")
        fields = {name.strip().lower(): name for name in reader.fieldnames}
        if "date" not in fields or "close" not in fields:
            raise DataError(f"{p}: need 'date' and 'close' columns, got {reader.fieldnames}")
        for lineno, row in enumerate(reader, start=2):
            raw_date = (row[fields["date"]] or "").strip()
            raw_close = (row[fields["close"]] or "").strip()
            try:
                d = datetime.strptime(raw_date, "%Y-%m-%d").date()
            except ValueError as exc:
                raise DataError(f"{p}:{lineno}: bad date {raw_date!r}") from exc
            try:
                close = float(raw_close)
            except ValueError as exc:
                raise DataError(f"{p}:{lineno}: bad close {raw_close!r}") from exc
            if not (math.isfinite(close) and close > 0.0):
                dropped += 1
                continue
            rows.append((d, close))
    rows.sort(key=lambda dc: dc[0])
    for (d1, _), (d2, _) in zip(rows, rows[1:]):
        if d1 == d2:
            raise DataError(f"{p}: duplicate date {d1.isoformat()}")
    if dropped:
        log.warning("%s: dropped %d rows with non-positive or non-finite prices", p, dropped)
    if len(rows) < MIN_PRICE_ROWS:
        raise DataError(f"{p}: only {len(rows)} usable rows, need at least {MIN_PRICE_ROWS}")
    closes = np.asarray([c for _, c in rows], dtype=np.float64)
    returns = 100.0 * np.log(closes[1:] / closes[:-1])
    return ReturnSeries(
        asset=asset or p.stem,
        dates=[d for d, _ in rows[1:]],
        returns=returns,
        n_dropped=dropped,
    )


def save_series(series: ReturnSeries, path) -> None:
    """Serialize a return series losslessly (dates plus repr'd returns)."""
    p = Path(path)
    with p.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "ret"])
        for d, r in zip(series.dates, series.returns):
            writer.writerow([d.isoformat(), repr(float(r))])


def load_series(path, asset: str | None = None) -> ReturnSeries:
    """Inverse of ``save_series``; load -> save -> load is the identity."""
    p = Path(path)
    dates: list[date] = []
    rets: list[float] = []
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(map(str.lower, reader.fieldnames)) != {"date", "ret"}:
            raise DataError(f"{p}: need 'date' and 'ret' columns")
        for row in reader:
            dates.append(datetime.strptime(row["date"], "%Y-%m-%d").date())
            rets.append(float(row["ret"]))
    return ReturnSeries(asset=asset or p.stem, dates=dates, returns=np.asarray(rets))


@dataclass(frozen=True)
class SpatialState:
    """A normalized state vector; ``cold`` marks the placeholder emitted
    before enough history exists to build a real one."""

    vector: np.ndarray
    cold: bool = False


def build_state(window, moments: OnlineMoments) -> SpatialState:
    """Normalize a most-recent-first window of absolute returns.

    Every slot shares the scalar running moments of the absolute-return
    stream (all lags share one marginal under stationarity), with the
    deviation floored away from zero.
    """
    arr = np.asarray(window, dtype=np.float64)
    mean = float(moments.mean[0])
    sd = max(float(moments.stddev()[0]), NORM_FLOOR)
    return SpatialState(vector=(arr - mean) / sd, cold=False)


class StateBuilder:
    """Streaming state construction over a return series.

    Feed returns with ``push`` strictly after reading ``state()`` for the
    step, so the state at step t reflects returns before t only.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self._window: deque[float] = deque(maxlen=dim)
        self.moments = OnlineMoments.zeros(1)

    def state(self) -> SpatialState:
        if len(self._window) < self.dim or self.moments.n < 1:
            return SpatialState(vector=np.zeros(self.dim), cold=True)
        # deque holds oldest..newest; the state orders most recent first
        recent_first = np.asarray(self._window, dtype=np.float64)[::-1]
        return build_state(recent_first, self.moments)

    def push(self, r: float) -> None:
        a = abs(float(r))
        self._window.append(a)
        self.moments.push(np.array([a]))
