"""Campaign runner: (environment x algorithm x latent dim x seed) grids.

Result tree::

    <out>/manifest.json
    <out>/config.json
    <out>/_data/<env>/<seed>/observations.npz    shared passive dataset
    <out>/_cache/attainable_*.hist                attainable histograms
    <out>/<env>/<algo>/<l>/<seed>/                one directory per cell
        klc.csv  log.csv  states.csv  history.jsonl  [model.gsm  loss.csv]

``<l>`` is ``na`` for RPE and RGE-EFR, which ignore the latent dimension.

Seeds: every random stream of a cell comes from
``SeedSequence(seed, spawn_key=(crc32(env), crc32(algo), l, stream))``, so the
randomness of a cell depends only on its own identity and adding cells to a
grid never changes existing ones.  The passive dataset uses
``spawn_key=(crc32(env), 0)`` and is shared by every algorithm of that
(env, seed) pair.
"""
from __future__ import annotations

import dataclasses
import json
import os
import time
import traceback
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from goalspace.env import EnvKind, sample_dataset, write_states_csv
from goalspace.explorer import (
    EngineeredFeatures,
    ExplorationConfig,
    run_exploration,
    write_epoch_log_csv,
    write_history_jsonl,
)
from goalspace.goal_policy import GoalPolicy
from goalspace.metrics import (
    attainable_histogram,
    handled_curve,
    klc_curve,
    write_klc_csv,
)
from goalspace.representation import TrainConfig, Variant, fit_embedding
from goalspace.representation.neural import write_loss_curve
from goalspace.representation.serialize import save_model

ALGORITHMS = ("RPE", "RGE-EFR", "RGE-PCA", "RGE-Isomap", "RGE-AE", "RGE-VAE",
              "RGE-VAE-GP", "RGE-RFVAE", "RGE-RFVAE-GP")
BASELINES = ("RPE", "RGE-EFR")
# algorithm -> (representation variant, goal policy kind)
LEARNED = {
    "RGE-PCA": (Variant.PCA, "kde"),
    "RGE-Isomap": (Variant.ISOMAP, "kde"),
    "RGE-AE": (Variant.AE, "kde"),
    "RGE-VAE": (Variant.VAE, "kde"),
    "RGE-VAE-GP": (Variant.VAE, "gaussian_prior"),
    "RGE-RFVAE": (Variant.RFVAE, "kde"),
    "RGE-RFVAE-GP": (Variant.RFVAE, "gaussian_prior"),
}
TRAINING_KEYS = {"optimizer", "learning_rate", "batch_size", "n_updates",
                 "warmup_updates", "n_flows", "hidden"}
PAPER_SCALE = {"n_observation": 10_000, "n_exploration": 5_000}
STREAM_EXPLORE, STREAM_TRAIN = 1, 2


@dataclass(frozen=True)
class CampaignConfig:
    environments: tuple = ("ArmBall",)
    algorithms: tuple = ("RPE", "RGE-EFR", "RGE-PCA")
    latent_dims: tuple = (2,)
    seeds: tuple = (0, 1, 2)
    out_dir: str = "results"
    n_observation: int = 2_000
    n_bootstrap: int = 100
    n_exploration: int = 2_000
    gamma_e: float = 0.2
    noise_sigma: float = 0.05
    knn_k: int = 1
    kappa: int = 10
    klc_bins: int = 30
    mc_samples: int = 10 ** 6
    paper_scale: bool = False
    training: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("environments", "algorithms", "latent_dims", "seeds"):
            value = getattr(self, name)
            if isinstance(value, (str, int)):
                value = (value,)
            if len(value) == 0:
                raise ValueError(f"{name} must not be empty")
            object.__setattr__(self, name, tuple(value))
        object.__setattr__(self, "environments",
                           tuple(EnvKind.parse(e).value for e in self.environments))
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}; expected one of {ALGORITHMS}")
        if any(int(l) < 1 for l in self.latent_dims):
            raise ValueError("latent dims must be positive")
        unknown = set(self.training) - TRAINING_KEYS
        if unknown:
            raise ValueError(f"unknown training keys {sorted(unknown)}")
        if self.n_observation < 2:
            raise ValueError("n_observation must be at least 2")

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        d = dict(d)
        d.update(d.pop("exploration", None) or {})
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "CampaignConfig":
        """YAML or JSON file (JSON is read by the YAML parser too)."""
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh) or {})

    def with_paper_scale(self) -> "CampaignConfig":
        return dataclasses.replace(self, paper_scale=True, **PAPER_SCALE)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    def exploration(self, seed: int) -> ExplorationConfig:
        return ExplorationConfig(n_observation=self.n_observation,
                                 n_bootstrap=self.n_bootstrap,
                                 n_exploration=self.n_exploration, gamma_e=self.gamma_e,
                                 noise_sigma=self.noise_sigma, knn_k=self.knn_k, seed=seed)

    def train_config(self, variant: Variant, seed: int) -> TrainConfig:
        overrides = dict(self.training)
        if "hidden" in overrides:
            overrides["hidden"] = tuple(overrides["hidden"])
        return TrainConfig.for_variant(variant, paper_scale=self.paper_scale,
                                       seed=seed, **overrides)


@dataclass(frozen=True)
class Cell:
    env: str
    algorithm: str
    latent_dim: int | None
    seed: int

    @property
    def l_tag(self) -> str:
        return "na" if self.latent_dim is None else str(self.latent_dim)

    @property
    def relpath(self) -> str:
        return f"{self.env}/{self.algorithm}/{self.l_tag}/{self.seed}"


def grid_cells(cfg: CampaignConfig) -> list:
    cells = []
    for env in cfg.environments:
        for algo in cfg.algorithms:
            dims = [None] if algo in BASELINES else sorted(set(int(l) for l in cfg.latent_dims))
            for l in dims:
                for seed in cfg.seeds:
                    cells.append(Cell(env, algo, l, int(seed)))
    return cells


def _tag(s: str) -> int:
    return zlib.crc32(s.encode("utf-8"))


def derive_seed(seed: int, *key) -> int:
    """Counter-based derivation of a 32-bit stream seed from a cell identity."""
    spawn_key = tuple(_tag(k) if isinstance(k, str) else int(k) for k in key)
    ss = np.random.SeedSequence(int(seed), spawn_key=spawn_key)
    return int(ss.generate_state(1)[0])


def cell_seed(cell: Cell, stream: int) -> int:
    return derive_seed(cell.seed, cell.env, cell.algorithm, cell.latent_dim or 0, stream)


def dataset_path(out_dir, env: str, seed: int) -> Path:
    return Path(out_dir) / "_data" / env / str(seed) / "observations.npz"


def build_dataset(out_dir, env: str, seed: int, n: int) -> Path:
    """Generate (once) and store the passive dataset shared by all algorithms."""
    path = dataset_path(out_dir, env, seed)
    if path.exists():
        with np.load(path) as f:
            if f["images"].shape[0] == n:
                return path
    states, images = sample_dataset(env, n, np.random.default_rng(derive_seed(seed, env, 0)))
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(path, images=images,
                        states=np.array([s.as_vector() for s in states]))
    return path


def _limit_threads():
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return None
    return threadpool_limits(1)


def run_cell(cell: Cell, cfg: CampaignConfig) -> dict:
    """Run one grid cell and write its files; returns a manifest record."""
    out = Path(cfg.out_dir) / cell.relpath
    out.mkdir(parents=True, exist_ok=True)
    record = {"env": cell.env, "algorithm": cell.algorithm, "latent_dim": cell.l_tag,
              "seed": cell.seed, "path": cell.relpath}
    t0 = time.perf_counter()
    limiter = _limit_threads()
    try:
        kind = EnvKind.parse(cell.env)
        ecfg = cfg.exploration(cell_seed(cell, STREAM_EXPLORE))
        model = policy = None
        if cell.algorithm == "RPE":
            embedding = None
        elif cell.algorithm == "RGE-EFR":
            embedding = EngineeredFeatures(kind)
            policy = GoalPolicy.uniform(embedding.dim)
        else:
            variant, policy_kind = LEARNED[cell.algorithm]
            with np.load(dataset_path(cfg.out_dir, cell.env, cell.seed)) as f:
                images = f["images"]
            tcfg = cfg.train_config(variant, cell_seed(cell, STREAM_TRAIN)) \
                if variant.is_neural else None
            model = fit_embedding(images, cell.latent_dim, variant, tcfg, cfg.kappa)
            if policy_kind == "kde":
                policy = GoalPolicy.from_outcomes(model.encode(images))
            else:
                policy = GoalPolicy.gaussian_prior(cell.latent_dim)
            embedding = model
        history, log = run_exploration(kind, embedding, policy, ecfg)

        A = attainable_histogram(kind, cfg.klc_bins, cfg.mc_samples,
                                 cache_dir=Path(cfg.out_dir) / "_cache")
        curve = klc_curve(history.state_matrix(), A)
        handled = handled_curve(history.handled)
        write_klc_csv(out / "klc.csv", curve, handled)
        write_epoch_log_csv(out / "log.csv", log, 0 if policy is None else policy.dim)
        write_states_csv(out / "states.csv", history.states, history.handled)
        write_history_jsonl(out / "history.jsonl", history)
        if model is not None:
            save_model(out / "model.gsm", model, policy)
            if getattr(model, "loss_curve", None):
                write_loss_curve(out / "loss.csv", model.loss_curve)
        record.update(status="ok", final_klc=float(curve[-1]),
                      handled_fraction=float(handled[-1] / len(handled)))
    except Exception as exc:  # recorded in the manifest, the campaign goes on
        record.update(status="failed", error=f"{type(exc).__name__}: {exc}",
                      traceback=traceback.format_exc())
    finally:
        if limiter is not None:
            limiter.unregister()
    record["runtime_s"] = round(time.perf_counter() - t0, 3)
    return record


def pool_size(n_cells: int, workers: int | None = None) -> int:
    if workers is None:
        env = os.environ.get("GOALSPACE_THREADS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(int(workers), n_cells))


def run_campaign(cfg: CampaignConfig, workers: int | None = None,
                 progress=None) -> dict:
    """Run every cell of the grid; returns the manifest (also written to disk).

    ``workers`` defaults to ``$GOALSPACE_THREADS`` or the CPU count.
    ``progress(record)`` is called as each cell finishes.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w") as fh:
        json.dump(cfg.as_dict(), fh, indent=2, sort_keys=True)
    cells = grid_cells(cfg)
    for env in cfg.environments:
        attainable_histogram(env, cfg.klc_bins, cfg.mc_samples, cache_dir=out / "_cache")
        if any(c.algorithm in LEARNED for c in cells if c.env == env):
            for seed in cfg.seeds:
                build_dataset(out, env, int(seed), cfg.n_observation)

    n = pool_size(len(cells), workers)
    records = []
    if n == 1:
        for c in cells:
            records.append(run_cell(c, cfg))
            if progress:
                progress(records[-1])
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            futures = [pool.submit(run_cell, c, cfg) for c in cells]
            for f in futures:
                records.append(f.result())
                if progress:
                    progress(records[-1])
    manifest = {"n_cells": len(cells),
                "n_ok": sum(r["status"] == "ok" for r in records),
                "n_failed": sum(r["status"] != "ok" for r in records),
                "cells": records}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def read_manifest(root) -> dict:
    with open(Path(root) / "manifest.json") as fh:
        return json.load(fh)
