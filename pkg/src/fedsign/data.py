"""Load-series ingestion, windowing, splitting and client partitioning.

The CSV schema (header required) is ``customer_id,category,timestamp,kwh``
with half-hourly timestamps formatted ``YYYY-MM-DD HH:MM``. A synthetic
generator produces schema-compatible series so the pipeline runs without
the proprietary utility dataset.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace
from datetime import datetime

import numpy as np

from .errors import (
    DegenerateSplit,
    EmptyResult,
    IrregularSampling,
    MalformedRow,
    NonMonotonicTimestamps,
    SeriesTooShort,
    TooFewSamples,
    ZeroVariance,
)

HALF_HOUR = np.timedelta64(30, "m")
INTERVALS_PER_DAY = 48
TIMESTAMP_FMT = "%Y-%m-%d %H:%M"


class Role(str, enum.Enum):
    HONEST = "honest"
    POISONED = "poisoned"
    MODEL_ATTACKER = "model_attacker"
    COLLUDER = "colluder"


@dataclass(frozen=True)
class Scaler:
    """z-score parameters; std must be positive."""

    mean: float
    std: float

    def normalize(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def denormalize(self, x):
        return np.asarray(x, dtype=np.float64) * self.std + self.mean


@dataclass(frozen=True)
class LoadSeries:
    """Half-hourly consumption series for one customer."""

    customer_id: str
    timestamps: np.ndarray  # datetime64[m], strictly increasing, 30-min step
    values: np.ndarray      # kWh, non-negative float64

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[m]")
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        if len(ts) != len(vals):
            raise ValueError("timestamps and values length mismatch")
        if np.any(vals < 0):
            raise ValueError("negative load values")
        if len(ts) > 1:
            steps = np.diff(ts)
            if np.any(steps <= np.timedelta64(0, "m")):
                raise NonMonotonicTimestamps(self.customer_id)
            if np.any(steps != HALF_HOUR):
                raise IrregularSampling(self.customer_id)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SupervisedSet:
    """Windowed, normalized supervised samples."""

    inputs: np.ndarray   # (n, W)
    targets: np.ndarray  # (n,)
    scaler: Scaler

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs/targets row count mismatch")
        if self.scaler.std <= 0:
            raise ValueError("scaler std must be positive")

    def __len__(self):
        return len(self.targets)


@dataclass(frozen=True)
class ClientShard:
    client_id: int
    train: SupervisedSet
    test: SupervisedSet
    role: Role = Role.HONEST

    def with_role(self, role: Role) -> "ClientShard":
        return replace(self, role=role)


@dataclass(frozen=True)
class SynthConfig:
    n_customers: int
    days: int
    base_kw: float = 1.0
    daily_amp: float = 0.3
    weekly_amp: float = 0.1
    noise_std: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_customers < 1:
            raise ValueError("n_customers must be positive")
        if self.days < 1:
            raise ValueError("days must be >= 1")
        if self.base_kw <= 0:
            raise ValueError("base_kw must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


def load_csv(path, category_filter: str) -> list[LoadSeries]:
    """Parse the half-hourly CSV, keeping only rows of the given category."""
    per_customer: dict[str, list[tuple[np.datetime64, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(1, "empty file") from None
        if [h.strip() for h in header] != ["customer_id", "category", "timestamp", "kwh"]:
            raise MalformedRow(1, f"unexpected header {header}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise MalformedRow(line_no, f"expected 4 fields, got {len(row)}")
            cust, cat, ts_str, kwh_str = (f.strip() for f in row)
            try:
                ts = np.datetime64(datetime.strptime(ts_str, TIMESTAMP_FMT), "m")
                kwh = float(kwh_str)
            except ValueError as exc:
                raise MalformedRow(line_no, str(exc)) from None
            if not math.isfinite(kwh) or kwh < 0:
                raise MalformedRow(line_no, f"invalid kwh {kwh_str}")
            if cat != category_filter:
                continue
            per_customer.setdefault(cust, []).append((ts, kwh))
    if not per_customer:
        raise EmptyResult(f"no customer matches category {category_filter!r}")
    out = []
    for cust in sorted(per_customer):
        rows = sorted(per_customer[cust], key=lambda r: r[0])
        ts = np.array([r[0] for r in rows], dtype="datetime64[m]")
        if len(ts) > 1 and np.any(np.diff(ts) <= np.timedelta64(0, "m")):
            raise NonMonotonicTimestamps(cust)
        vals = np.array([r[1] for r in rows], dtype=np.float64)
        out.append(LoadSeries(cust, ts, vals))
    return out


def synth_generate(cfg: SynthConfig) -> list[LoadSeries]:
    """Generate seeded sinusoidal-plus-noise series, clamped at zero."""
    start = np.datetime64("2012-07-01T00:00", "m")
    n_points = cfg.days * INTERVALS_PER_DAY
    idx = np.arange(n_points)
    timestamps = start + idx * HALF_HOUR
    hour = (idx % INTERVALS_PER_DAY) * 0.5
    dow = (idx // INTERVALS_PER_DAY) % 7
    base = (
        cfg.base_kw
        + cfg.daily_amp * np.sin(2 * np.pi * hour / 24.0)
        + cfg.weekly_amp * np.sin(2 * np.pi * dow / 7.0)
    )
    rng = np.random.default_rng(cfg.seed)
    out = []
    for c in range(cfg.n_customers):
        noise = rng.normal(0.0, cfg.noise_std, size=n_points) if cfg.noise_std > 0 else 0.0
        vals = np.maximum(base + noise, 0.0)
        out.append(LoadSeries(f"synth-{c:04d}", timestamps, vals))
    return out


def make_windows(series: LoadSeries, window: int, scaler: Scaler | None = None) -> SupervisedSet:
    """Slide a lag window over the (normalized) series.

    Sample i is ``values[i:i+window] -> values[i+window]``. If no scaler is
    given, a z-score scaler is fitted on this series' values.
    """
    if window < 1:
        raise ValueError("window must be positive")
    if len(series) <= window:
        raise SeriesTooShort(f"series length {len(series)} <= window {window}")
    if scaler is None:
        std = float(np.std(series.values))
        if std == 0.0:
            raise ZeroVariance(f"constant series {series.customer_id!r}")
        scaler = Scaler(float(np.mean(series.values)), std)
    norm = scaler.normalize(series.values)
    inputs = np.lib.stride_tricks.sliding_window_view(norm, window)[:-1].copy()
    targets = norm[window:].copy()
    return SupervisedSet(inputs, targets, scaler)


def split_train_test(s: SupervisedSet, train_frac: float) -> tuple[SupervisedSet, SupervisedSet]:
    """Chronological split: first ceil(train_frac*n) samples are train."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must be in (0,1)")
    n = len(s)
    if n == 0:
        raise DegenerateSplit("empty supervised set")
    n_train = math.ceil(train_frac * n)
    if n_train == 0 or n_train >= n:
        raise DegenerateSplit(f"split of {n} samples at {train_frac} leaves an empty side")
    train = SupervisedSet(s.inputs[:n_train], s.targets[:n_train], s.scaler)
    test = SupervisedSet(s.inputs[n_train:], s.targets[n_train:], s.scaler)
    return train, test


def _deal(inputs, targets, perm, n_clients):
    return [(inputs[perm[k::n_clients]], targets[perm[k::n_clients]]) for k in range(n_clients)]


def partition_clients(
    train_sets: list[SupervisedSet],
    test_sets: list[SupervisedSet],
    n_clients: int,
    seed: int,
) -> list[ClientShard]:
    """Pool samples across customers, permute, and deal round-robin.

    All sets must share one scaler (fit on pooled training data upstream)
    so pooled evaluation stays denormalizable. Shard sizes differ by <= 1.
    """
    if n_clients < 1:
        raise ValueError("n_clients must be positive")
    scalers = {s.scaler for s in train_sets} | {s.scaler for s in test_sets}
    if len(scalers) != 1:
        raise ValueError("all supervised sets must share one scaler")
    scaler = next(iter(scalers))
    tr_in = np.concatenate([s.inputs for s in train_sets])
    tr_tgt = np.concatenate([s.targets for s in train_sets])
    te_in = np.concatenate([s.inputs for s in test_sets])
    te_tgt = np.concatenate([s.targets for s in test_sets])
    if len(tr_tgt) < n_clients or len(te_tgt) < n_clients:
        raise TooFewSamples(f"{len(tr_tgt)} train / {len(te_tgt)} test samples for {n_clients} clients")
    rng = np.random.default_rng(seed)
    train_deal = _deal(tr_in, tr_tgt, rng.permutation(len(tr_tgt)), n_clients)
    test_deal = _deal(te_in, te_tgt, rng.permutation(len(te_tgt)), n_clients)
    return [
        ClientShard(
            client_id=k,
            train=SupervisedSet(train_deal[k][0], train_deal[k][1], scaler),
            test=SupervisedSet(test_deal[k][0], test_deal[k][1], scaler),
        )
        for k in range(n_clients)
    ]


def fit_pooled_scaler(series_list: list[LoadSeries], train_frac: float) -> Scaler:
    """Fit one z-score scaler on the pooled leading train_frac of each series.

    Using only the chronological training portion keeps test data out of
    the normalization statistics.
    """
    chunks = [s.values[: math.ceil(train_frac * len(s))] for s in series_list]
    pooled = np.concatenate(chunks)
    std = float(np.std(pooled))
    if std == 0.0:
        raise ZeroVariance("pooled training values are constant")
    return Scaler(float(np.mean(pooled)), std)
