"""Config-driven experiment pipeline: data preparation, repeated seeded
simulation runs, and report emission.

Per-repeat seeds are the configured seeds shifted by the repeat index, so
every repeat is auditable and reproducible on its own. CSV and
summary.json outputs are fully deterministic; measured wall time goes to a
separate timing.json so determinism checks stay byte-exact.
"""

from __future__ import annotations

import json
import math
import os
import statistics
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

from .attacks import AttackConfig
from .data import (
    ClientShard,
    SynthConfig,
    fit_pooled_scaler,
    load_csv,
    make_windows,
    partition_clients,
    split_train_test,
    synth_generate,
)
from .dp import PrivacyBudget
from .errors import ConfigError
from .fed import (
    ProtocolConfig,
    RoundRecord,
    Seeds,
    SimulationResult,
    convergence_round,
    logical_payload_bits,
    run_simulation,
)
from .model import ModelArch, arch_layout, layout_dim

CONVERGENCE_TOL = 1e-3
CONVERGENCE_PATIENCE = 5

ROUNDS_CSV_HEADER = "round,global_train_loss,test_mse,test_rmse,test_mape,bytes_up,attack_active"


@dataclass(frozen=True)
class DataConfig:
    source: str  # "synth" | "csv"
    window: int = 48
    train_frac: float = 0.7
    synth: SynthConfig | None = None
    csv_path: str | None = None
    csv_filter: str = "GC"

    def __post_init__(self):
        if self.source not in ("synth", "csv"):
            raise ConfigError(f"unknown data source {self.source!r}")
        if self.source == "synth" and self.synth is None:
            raise ConfigError("synth source requires a synth section")
        if self.source == "csv" and not self.csv_path:
            raise ConfigError("csv source requires csv_path")
        if self.window < 1:
            raise ConfigError("window must be positive")
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigError("train_frac must lie in (0,1)")


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig
    arch: ModelArch
    protocol: ProtocolConfig
    attack: AttackConfig | None = None
    repeats: int = 5
    output_dir: str = "out"

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.arch.input_dim != self.data.window:
            raise ConfigError("model input_dim must equal the data window length")


def parse_config(raw: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a plain nested dict (parsed YAML)."""
    try:
        d = dict(raw.get("data") or {})
        if "synth" in d and d["synth"] is not None:
            d["synth"] = SynthConfig(**d["synth"])
        data = DataConfig(**d)

        m = dict(raw.get("model") or {"kind": "linear_ar"})
        m.setdefault("input_dim", data.window)
        arch = ModelArch(**m)

        p = dict(raw.get("protocol") or {})
        if "seeds" in p and p["seeds"] is not None:
            p["seeds"] = Seeds(**p["seeds"])
        if p.get("dp") is not None:
            p["dp"] = PrivacyBudget(**p["dp"])
        protocol = ProtocolConfig(**p)

        attack = None
        if raw.get("attack") is not None:
            attack = AttackConfig(**raw["attack"])

        return ExperimentConfig(
            data=data,
            arch=arch,
            protocol=protocol,
            attack=attack,
            repeats=int(raw.get("repeats", 5)),
            output_dir=str(raw.get("output_dir", "out")),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid experiment config: {exc}") from exc


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {
        "data": asdict(cfg.data),
        "model": asdict(cfg.arch),
        "protocol": asdict(cfg.protocol),
        "attack": asdict(cfg.attack) if cfg.attack else None,
        "repeats": cfg.repeats,
        "output_dir": cfg.output_dir,
    }
    return out


def build_shards(data_cfg: DataConfig, n_clients: int, partition_seed: int) -> list[ClientShard]:
    """Series -> shared scaler -> windows -> chronological split -> pooled
    round-robin partition."""
    if data_cfg.source == "synth":
        series = synth_generate(data_cfg.synth)
    else:
        series = load_csv(data_cfg.csv_path, data_cfg.csv_filter)
    scaler = fit_pooled_scaler(series, data_cfg.train_frac)
    train_sets, test_sets = [], []
    for s in series:
        sup = make_windows(s, data_cfg.window, scaler)
        tr, te = split_train_test(sup, data_cfg.train_frac)
        train_sets.append(tr)
        test_sets.append(te)
    return partition_clients(train_sets, test_sets, n_clients, partition_seed)


def run_repeat(cfg: ExperimentConfig, repeat_idx: int) -> SimulationResult:
    seeds = cfg.protocol.seeds.shifted(repeat_idx)
    pcfg = replace(cfg.protocol, seeds=seeds)
    attack = None
    if cfg.attack is not None:
        attack = replace(cfg.attack, seed=cfg.attack.seed + repeat_idx)
    shards = build_shards(cfg.data, pcfg.n_clients, seeds.data)
    return run_simulation(shards, cfg.arch, pcfg, attack)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run all repeats and return {"results": [SimulationResult...],
    "summary": dict, "timing": dict}."""
    results = [run_repeat(cfg, r) for r in range(cfg.repeats)]
    return {
        "results": results,
        "summary": summarize(cfg, results),
        "timing": {
            "wall_time_ms_total": sum(
                rec.wall_time_ms for res in results for rec in res.records
            ),
        },
    }


def _mean_std(values: list[float]) -> dict:
    return {
        "mean": statistics.fmean(values),
        "stddev": statistics.stdev(values) if len(values) > 1 else 0.0,
    }


def summarize(cfg: ExperimentConfig, results: list[SimulationResult]) -> dict:
    finals = [res.records[-1] for res in results if res.records]
    dim = layout_dim(arch_layout(cfg.arch))
    logical_bits = logical_payload_bits(cfg.protocol.protocol, dim)
    raw_bits = 64 * dim
    summary = {
        "config": config_to_dict(cfg),
        "repeats": cfg.repeats,
        "rounds": cfg.protocol.rounds,
        "payload": {
            "vector_dim": dim,
            "logical_bits_per_client_round": logical_bits,
            "raw_gradient_bits_per_client_round": raw_bits,
            "logical_to_raw_ratio": logical_bits / raw_bits,
            "wire_bytes_per_client_round": (
                results[0].records[0].bytes_up // cfg.protocol.n_clients
                if results and results[0].records
                else 0
            ),
        },
        "bytes_up_total": sum(rec.bytes_up for res in results for rec in res.records),
    }
    if finals:
        summary["final"] = {
            "mse": _mean_std([f.test_mse for f in finals]),
            "rmse": _mean_std([f.test_rmse for f in finals]),
            "mape": _mean_std([f.test_mape for f in finals]),
        }
        summary["per_repeat_final"] = [
            {"mse": f.test_mse, "rmse": f.test_rmse, "mape": f.test_mape} for f in finals
        ]
        conv = [
            convergence_round(
                [rec.global_train_loss for rec in res.records],
                CONVERGENCE_TOL,
                CONVERGENCE_PATIENCE,
            )
            for res in results
        ]
        summary["convergence_round"] = {
            "per_repeat": conv,
            "mean": (
                statistics.fmean([c for c in conv if c is not None])
                if any(c is not None for c in conv)
                else None
            ),
        }
    return summary


# --- output emission (atomic: temp file + rename) ---

def _atomic_write(path: str, text: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def records_to_csv(records: list[RoundRecord]) -> str:
    lines = [ROUNDS_CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.round},{r.global_train_loss!r},{r.test_mse!r},{r.test_rmse!r},"
            f"{r.test_mape!r},{r.bytes_up},{int(r.attack_active)}"
        )
    return "\n".join(lines) + "\n"


def read_rounds_csv(path: str) -> list[dict]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != ROUNDS_CSV_HEADER.split(","):
            raise ValueError(f"unexpected rounds CSV header {header}")
        rows = []
        for line in fh:
            vals = line.strip().split(",")
            rows.append(
                {
                    "round": int(vals[0]),
                    "global_train_loss": float(vals[1]),
                    "test_mse": float(vals[2]),
                    "test_rmse": float(vals[3]),
                    "test_mape": float(vals[4]),
                    "bytes_up": int(vals[5]),
                    "attack_active": bool(int(vals[6])),
                }
            )
        return rows


def write_outputs(cfg: ExperimentConfig, out: dict, output_dir: str | None = None):
    outdir = output_dir or cfg.output_dir
    for r, res in enumerate(out["results"]):
        _atomic_write(os.path.join(outdir, f"rounds_{r}.csv"), records_to_csv(res.records))
    _atomic_write(
        os.path.join(outdir, "summary.json"),
        json.dumps(out["summary"], sort_keys=True, indent=2) + "\n",
    )
    _atomic_write(
        os.path.join(outdir, "timing.json"),
        json.dumps(out["timing"], sort_keys=True, indent=2) + "\n",
    )


# --- sweeps ---

SWEEP_CSV_HEADER = "axis,axis_value,protocol,metric,mean,stddev"
SWEEP_AXES = ("compromised_frac", "epsilon", "protocol")


def _cell_config(base: ExperimentConfig, axis: str, value, protocol: str) -> ExperimentConfig:
    pcfg = replace(base.protocol, protocol=protocol)
    attack = base.attack
    if axis == "compromised_frac":
        if attack is None:
            raise ConfigError("compromised_frac sweep requires an attack section")
        attack = replace(attack, compromised_frac=float(value))
    elif axis == "epsilon":
        if pcfg.dp is None:
            raise ConfigError("epsilon sweep requires a dp section in the protocol")
        pcfg = replace(pcfg, dp=replace(pcfg.dp, epsilon=float(value)))
    elif axis != "protocol":
        raise ConfigError(f"unknown sweep axis {axis!r}")
    return replace(base, protocol=pcfg, attack=attack)


def _run_cell(args):
    base, axis, value, protocol = args
    cfg = _cell_config(base, axis, value, protocol)
    out = run_experiment(cfg)
    return out["summary"]


def run_sweep(
    base: ExperimentConfig,
    axis: str,
    values: list,
    protocols: list[str] | None = None,
    jobs: int = 1,
) -> tuple[str, list[dict]]:
    """Cartesian run over axis values x protocols; returns the long-format
    CSV text and the per-cell summaries in deterministic order."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")
    if not values:
        raise ConfigError("sweep axis values must be nonempty")
    if axis == "protocol":
        cells = [(v, v) for v in values]
    else:
        protocols = protocols or [base.protocol.protocol]
        cells = [(v, p) for v in values for p in protocols]
    tasks = [(base, axis, value, protocol) for value, protocol in cells]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_run_cell, tasks))
    else:
        summaries = [_run_cell(t) for t in tasks]
    lines = [SWEEP_CSV_HEADER]
    for (value, protocol), summary in zip(cells, summaries):
        for metric in ("mse", "rmse", "mape"):
            stat = summary["final"][metric]
            lines.append(
                f"{axis},{value},{protocol},{metric},{stat['mean']!r},{stat['stddev']!r}"
            )
    return "\n".join(lines) + "\n", summaries


def read_sweep_csv(path: str) -> list[dict]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != SWEEP_CSV_HEADER.split(","):
            raise ValueError(f"unexpected sweep CSV header {header}")
        rows = []
        for line in fh:
            axis, value, protocol, metric, mean, stddev = line.strip().split(",")
            rows.append(
                {
                    "axis": axis,
                    "axis_value": value,
                    "protocol": protocol,
                    "metric": metric,
                    "mean": float(mean),
                    "stddev": float(stddev),
                }
            )
        return rows


def gen_data_csv(synth_cfg: SynthConfig, category: str = "GC") -> str:
    """Render synthetic series in the ingestion CSV schema."""
    series = synth_generate(synth_cfg)
    lines = ["customer_id,category,timestamp,kwh"]
    for s in series:
        for ts, val in zip(s.timestamps, s.values):
            stamp = str(ts).replace("T", " ")
            lines.append(f"{s.customer_id},{category},{stamp},{val:.6f}")
    return "\n".join(lines) + "\n"
