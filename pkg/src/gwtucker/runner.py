"""
End-to-end experiments: generate, compress, evaluate, report.

Configs are flat JSON objects; every key maps to one field of
:class:`ExperimentConfig` and unknown keys are rejected.
"""

import csv
import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import archive
from .channel_model import (ChannelSet, GenParams, InterferenceScope, SystemTopology,
                            generate_channel_set)
from .decomposition import MODELS, CompressionRanks, SolveTrace, solve
from .metrics import (LARGE_SCALE_REFERENCE, median_runtime, sinr_error, speedup,
                      storage_counts)
from .sinr_pipeline import compressed_pipeline, flop_estimate, full_pipeline

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "resolve_out_dir",
    "run_experiment",
    "run_sweep",
    "save_channels",
    "load_channels",
    "format_table",
]

log = logging.getLogger(__name__)

OUT_ENV = "GWTK_OUT"
REPORT_NAME = "report.json"
TABLE_NAME = "table.txt"
ARCHIVE_NAME = "compressed.gwtk"
CHANNELS_NAME = "channels.npz"
TRACE_NAME = "trace.json"
SWEEP_NAME = "sweep.csv"


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass
class ExperimentConfig:
    J: int = 3
    K: int = 2
    M: int = 8
    N: int = 16
    P: int = 12
    L: int = 2
    sigma: float = 0.1
    m: int = 4
    n: int = 8
    p: int = 6
    model: str = "groupwise"
    iters: int = 20
    seed: int = 0
    scope: str = InterferenceScope.PAPER_EXPERIMENT.value
    n_rays_los: int = 2
    n_rays_nlos: int = 4
    decay: float = 0.7
    rician_k: float = 10.0
    coeff_decay: float = 0.9
    cross_gain_db: float = -10.0
    angle_spread: float = 0.05
    out_dir: str = "gwtk_out"
    sweep_axis: Optional[str] = None
    sweep_values: List[int] = field(default_factory=list)
    repeats: int = 5

    def __post_init__(self):
        self.validate()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for key, value in data.items():
            if isinstance(value, (dict, list)) and key != "sweep_values":
                raise ConfigError(f"{key}: config must be flat, got {type(value).__name__}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})")
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def validate(self):
        try:
            SystemTopology(self.J, self.K, self.M, self.N, self.P, self.L, self.sigma)
        except ValueError as exc:
            raise ConfigError(str(exc))
        try:
            CompressionRanks(self.m, self.n, self.p)
        except ValueError as exc:
            raise ConfigError(str(exc))
        for r, d, rn, dn in ((self.m, self.M, "m", "M"), (self.n, self.N, "n", "N"),
                             (self.p, self.P, "p", "P")):
            if r > d:
                raise ConfigError(f"{rn}={r} must not exceed {dn}={d}")
        if self.m < self.L:
            raise ConfigError(f"m={self.m} must be at least L={self.L} so the compressed "
                              "channel carries every stream")
        if self.n < self.L:
            raise ConfigError(f"n={self.n} must be at least L={self.L} so the compressed "
                              "channel carries every stream")
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.iters < 0:
            raise ConfigError(f"iters must be non-negative, got {self.iters}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        try:
            InterferenceScope(self.scope)
        except ValueError:
            raise ConfigError(f"scope must be 'full' or 'paper_experiment', got {self.scope!r}")
        try:
            self.gen_params
        except ValueError as exc:
            raise ConfigError(str(exc))
        if self.sweep_axis not in (None, "n", "p"):
            raise ConfigError(f"sweep_axis must be 'n' or 'p', got {self.sweep_axis!r}")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")

    @property
    def topology(self) -> SystemTopology:
        return SystemTopology(self.J, self.K, self.M, self.N, self.P, self.L, self.sigma)

    @property
    def ranks(self) -> CompressionRanks:
        return CompressionRanks(self.m, self.n, self.p)

    @property
    def gen_params(self) -> GenParams:
        return GenParams(self.n_rays_los, self.n_rays_nlos, self.decay, self.rician_k,
                         self.coeff_decay, self.cross_gain_db, self.angle_spread)


def resolve_out_dir(config: ExperimentConfig, override=None) -> Path:
    """Command-line value, then ``$GWTK_OUT``, then the config's `out_dir`."""
    path = Path(override or os.environ.get(OUT_ENV) or config.out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"output directory {path} is not writable: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory {path} is not writable")
    return path


# --- channel persistence ----------------------------------------------------

def save_channels(path, channels: ChannelSet):
    t = channels.topology
    np.savez(path, tensors=channels.tensors, coeffs=channels.coeffs,
             dims=np.array([t.J, t.K, t.M, t.N, t.P, t.L]), sigma=np.array(t.sigma))


def load_channels(path) -> ChannelSet:
    with np.load(path, allow_pickle=False) as data:
        J, K, M, N, P, L = (int(v) for v in data["dims"])
        topo = SystemTopology(J, K, M, N, P, L, float(data["sigma"]))
        return ChannelSet(topo, data["tensors"], data["coeffs"])


# --- experiment -------------------------------------------------------------

def _compress(config, channels):
    factors, trace = solve(config.model, channels, config.ranks, config.iters)
    log.info("compressed with %s model in %d sweeps, f=%.6g", config.model,
             trace.iterations_run, trace.final)
    return factors, trace


def _evaluate(config, channels, factors):
    scope = InterferenceScope(config.scope)
    full = full_pipeline(channels, scope)
    comp = compressed_pipeline(factors, channels.coeffs, config.L, config.sigma, scope)
    err = sinr_error(full, comp)
    t_full = median_runtime(lambda: full_pipeline(channels, scope), config.repeats)
    t_comp = median_runtime(
        lambda: compressed_pipeline(factors, channels.coeffs, config.L, config.sigma, scope),
        config.repeats)
    return full, comp, err, t_full, t_comp


def _storage_block(config):
    sm = storage_counts(config.J, config.K, config.M, config.N, config.P,
                        config.ranks, config.model)
    return {"R_s": sm.ratio, "original_count": sm.original_count,
            "compressed_count": sm.compressed_count}


def _ledger_ratio(config):
    scope = InterferenceScope(config.scope)
    full = flop_estimate(config.topology, None, "full", scope)
    comp = flop_estimate(config.topology, config.ranks, "compressed", scope, config.model)
    return full.total / comp.total, full, comp


def build_report(config, channels=None, factors=None, trace: SolveTrace = None,
                 storage_only: bool = False) -> dict:
    """Assemble the report dictionary; runs both pipelines unless `storage_only`."""
    ratio, led_full, led_comp = _ledger_ratio(config)
    report = {
        "config": dataclasses.asdict(config),
        **_storage_block(config),
        "R_t_ledger": ratio,
        "ledger_full": led_full.as_dict(),
        "ledger_compressed": led_comp.as_dict(),
        "reference_targets": {
            "note": "large-scale reference values, not reproducible with the synthetic generator",
            **LARGE_SCALE_REFERENCE,
        },
        "storage_only": storage_only,
    }
    if storage_only:
        return report
    full, comp, err, t_full, t_comp = _evaluate(config, channels, factors)
    report.update({
        "e_c": err.e_c,
        "R_t": speedup(t_full, t_comp),
        "t_full": t_full,
        "t_compressed": t_comp,
        "timing": {"statistic": "median", "repeats": config.repeats, "warmup": 1},
        "measured_ledger_full": full.ledger.as_dict(),
        "measured_ledger_compressed": comp.ledger.as_dict(),
        "sinr_full": full.sinr.tolist(),
        "sinr_compressed": comp.sinr.tolist(),
        "sinr_full_db": full.sinr_db.tolist(),
        "sinr_compressed_db": comp.sinr_db.tolist(),
        "per_stream_error": err.per_stream,
    })
    if trace is not None:
        report.update({
            "objective_trace": list(map(float, trace.objective_per_iter)),
            "iterations_run": trace.iterations_run,
            "energy": trace.energy,
        })
    return report


def format_table(rows) -> str:
    """Plain-text results table, one row per report."""
    header = f"{'J':>4} {'(M,N,P)':>16} {'K':>4} {'(m,n,p)':>16} {'Model':>12} " \
             f"{'R_t':>10} {'R_s':>10} {'e_c':>10}"
    lines = [header, "-" * len(header)]
    for r in rows:
        c = r["config"]
        rt = f"{r['R_t']:.5g}" if "R_t" in r else "-"
        ec = f"{100 * r['e_c']:.4f}%" if "e_c" in r else "-"
        lines.append(
            f"{c['J']:>4} {str((c['M'], c['N'], c['P'])):>16} {c['K']:>4} "
            f"{str((c['m'], c['n'], c['p'])):>16} {c['model']:>12} "
            f"{rt:>10} {r['R_s']:>10.4f} {ec:>10}")
    lines.append(f"ledger-predicted speedup: {rows[-1]['R_t_ledger']:.4f}")
    return "\n".join(lines) + "\n"


def write_report(out, report):
    with open(out / REPORT_NAME, "w") as fh:
        json.dump(report, fh, indent=2)
    with open(out / TABLE_NAME, "w") as fh:
        fh.write(format_table([report]))


def run_experiment(config: ExperimentConfig, out_dir=None, storage_only=False,
                   channels: ChannelSet = None) -> dict:
    """
    Generate, compress, evaluate and write ``report.json``, ``table.txt`` and
    ``compressed.gwtk`` into the output directory. With `storage_only` only
    the storage ratio (and the cost model) is reported and no channels are
    generated.
    """
    out = resolve_out_dir(config, out_dir)
    if storage_only:
        report = build_report(config, storage_only=True)
        write_report(out, report)
        return report
    if channels is None:
        channels = generate_channel_set(config.topology, config.gen_params, config.seed)
    factors, trace = _compress(config, channels)
    report = build_report(config, channels, factors, trace)
    archive.save_archive(out / ARCHIVE_NAME, factors, channels.coeffs)
    write_report(out, report)
    return report


def run_sweep(config: ExperimentConfig, out_dir=None):
    """
    Vary `n` or `p` over ``config.sweep_values`` on one channel draw.

    Writes ``sweep.csv`` with columns ``axis,Rs,Rt,ec`` and returns the rows.
    """
    if config.sweep_axis is None:
        raise ConfigError("sweep_axis must be set to 'n' or 'p' for a sweep")
    if not config.sweep_values:
        raise ConfigError("sweep_values must list at least one value")
    out = resolve_out_dir(config, out_dir)
    configs = [config.replace(**{config.sweep_axis: int(v)}) for v in config.sweep_values]
    channels = generate_channel_set(config.topology, config.gen_params, config.seed)
    rows = []
    for cfg in configs:
        factors, trace = _compress(cfg, channels)
        rep = build_report(cfg, channels, factors, trace)
        rows.append((getattr(cfg, cfg.sweep_axis), rep["R_s"], rep["R_t"], rep["e_c"]))
    with open(out / SWEEP_NAME, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["axis", "Rs", "Rt", "ec"])
        writer.writerows(rows)
    return rows
