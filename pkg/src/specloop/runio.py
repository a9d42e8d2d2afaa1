"""Run-directory file formats.

Each campaign run is persisted as a directory:

    config.json   echo of the resolved configuration (seed included)
    dataset.csv   raw records, header ``x,y,exposure``
    rounds.jsonl  one object per round: index, selected points, per-model
                  log-evidence, model posterior, MAP of the best model
    acq/round_NNNN.csv   per-round acquisition scores ``x,g_best,g_second``
    metrics.json  per-run evaluation (W indices, model probabilities)
    manifest.json command, seed, version and wall-clock duration

Every file is written to a temporary name and atomically renamed, so a
file is either complete or absent.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path

from .campaign import CampaignConfig, CampaignHistory, RoundRecord
from .evalmetrics import RunMetrics
from .probmodel import Dataset
from .remc import PosteriorSamples, SamplerConfig

__all__ = [
    "atomic_write_text",
    "write_run_dir",
    "write_manifest",
    "write_posterior_dump",
    "read_config",
    "read_metrics",
]


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)  # 'inf' / '-inf' / 'nan'
    return v


def _round_json(rec: RoundRecord) -> dict:
    return {
        "round": rec.index,
        "candidates": list(rec.candidate_ids),
        "selected_x": list(rec.selected_x),
        "log_evidence": {k: _jsonable(v) for k, v in rec.log_evidences.items()},
        "model_posterior": {k: v for k, v in rec.posterior.items()},
        "best_model": rec.best_model,
        "second_model": rec.second_model,
        "map": list(rec.map_theta),
    }


def write_run_dir(
    out_dir,
    history: CampaignHistory,
    metrics: RunMetrics | None,
    write_acquisition: bool = True,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "config.json", _json_dumps(history.config.to_json()))
    tmp = out / f"dataset.csv.tmp{os.getpid()}"
    history.dataset.to_csv(tmp)
    os.replace(tmp, out / "dataset.csv")
    lines = [json.dumps(_round_json(r), sort_keys=True) for r in history.rounds]
    atomic_write_text(out / "rounds.jsonl", "".join(line + "\n" for line in lines))
    if metrics is not None:
        atomic_write_text(out / "metrics.json", _json_dumps(metrics.to_json()))
    if write_acquisition:
        acq_dir = out / "acq"
        acq_dir.mkdir(exist_ok=True)
        for rec in history.rounds:
            if rec.acquisition is None:
                continue
            rows = ["x,g_best,g_second\n"]
            scores = rec.acquisition
            for i, x in enumerate(scores.grid):
                g1 = scores.g_best[i]
                g2 = scores.g_second[i]
                g2s = "" if g2 != g2 else repr(float(g2))  # NaN marks "no column"
                rows.append(f"{float(x)!r},{float(g1)!r},{g2s}\n")
            atomic_write_text(acq_dir / f"round_{rec.index:04d}.csv", "".join(rows))


def write_manifest(out_dir, manifest: dict) -> None:
    atomic_write_text(Path(out_dir) / "manifest.json", _json_dumps(manifest))


def write_posterior_dump(
    samples: PosteriorSamples,
    config: SamplerConfig,
    csv_path,
    meta_path=None,
) -> None:
    """Dump retained posterior draws plus run metadata.

    CSV header is ``replica_beta,draw_index,param_0,...``; retained draws
    all come from the beta = 1 replica.  The metadata JSON echoes the
    sampler configuration and acceptance rates.
    """
    dim = samples.theta_draws.shape[1]
    names = ",".join(f"param_{j}" for j in range(dim))
    rows = [f"replica_beta,draw_index,{names}\n"]
    beta_top = samples.betas[-1]
    for i, draw in enumerate(samples.theta_draws):
        vals = ",".join(repr(float(v)) for v in draw)
        rows.append(f"{beta_top!r},{i},{vals}\n")
    atomic_write_text(csv_path, "".join(rows))
    if meta_path is not None:
        meta = {
            "seed": config.seed,
            "config": config.to_json(),
            "acceptance": {
                "metropolis": [float(v) for v in samples.acc_stats.metropolis],
                "exchange": [float(v) for v in samples.acc_stats.exchange],
                "warnings": list(samples.acc_stats.warnings),
            },
        }
        atomic_write_text(meta_path, _json_dumps(meta))


def read_config(path) -> CampaignConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return CampaignConfig.from_json(json.load(fh))


def read_metrics(run_dir) -> RunMetrics:
    with open(Path(run_dir) / "metrics.json", "r", encoding="utf-8") as fh:
        return RunMetrics.from_json(json.load(fh))


def read_dataset(run_dir) -> Dataset:
    return Dataset.from_csv(Path(run_dir) / "dataset.csv")
