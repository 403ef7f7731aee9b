"""Exploration diversity: KL-coverage of explored object states, handled counts."""
from __future__ import annotations

import csv
import math
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from goalspace.env import EnvKind
from goalspace.errors import DimensionError, ShapeMismatchError

DEFAULT_BINS = 30
KLC_FLOOR = 1e-10
HIST_MAGIC = b"GSHIST\x00\x01"


def env_bounds(env_kind) -> np.ndarray:
    kind = EnvKind.parse(env_kind)
    bounds = [(-1.0, 1.0), (-1.0, 1.0)]
    if kind is EnvKind.ARM_ARROW:
        bounds.append((0.0, 2.0 * math.pi))
    return np.array(bounds)


@dataclass
class Histogram:
    bounds: np.ndarray        # (d, 2)
    bins: int
    mass: np.ndarray          # shape (bins,) * d, sums to 1
    counts: np.ndarray | None = None

    @property
    def dims(self) -> int:
        return self.bounds.shape[0]

    def bin_centers(self, axis: int) -> np.ndarray:
        lo, hi = self.bounds[axis]
        w = (hi - lo) / self.bins
        return lo + w * (np.arange(self.bins) + 0.5)


def bin_indices(points, bounds, bins: int) -> np.ndarray:
    """Flat bin index per point; out-of-range points land in the edge bins."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    bounds = np.asarray(bounds, dtype=float)
    if p.shape[1] != bounds.shape[0]:
        raise DimensionError("point dimension", bounds.shape[0], p.shape[1])
    lo, hi = bounds[:, 0], bounds[:, 1]
    idx = np.floor((p - lo) / (hi - lo) * bins).astype(np.int64)
    idx = np.clip(idx, 0, bins - 1)
    return np.ravel_multi_index(tuple(idx.T), (bins,) * bounds.shape[0])


def build_histogram(points, bounds, bins: int = DEFAULT_BINS) -> Histogram:
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if p.shape[0] == 0 or p.size == 0:
        raise DimensionError("number of points", ">= 1", 0)
    bounds = np.asarray(bounds, dtype=float)
    d = bounds.shape[0]
    flat = bin_indices(p, bounds, bins)
    counts = np.bincount(flat, minlength=bins ** d).astype(float)
    return Histogram(bounds, bins, (counts / counts.sum()).reshape((bins,) * d),
                     counts.reshape((bins,) * d))


def _sample_attainable(kind: EnvKind, n: int, rng: np.random.Generator) -> np.ndarray:
    accepted, total = [], 0
    while total < n:
        cand = rng.uniform(-1.0, 1.0, size=(max(1024, int(1.3 * (n - total))), 2))
        cand = cand[(cand ** 2).sum(axis=1) <= 1.0][: n - total]
        accepted.append(cand)
        total += len(cand)
    pts = np.concatenate(accepted)
    if kind is EnvKind.ARM_ARROW:
        pts = np.column_stack([pts, rng.uniform(0.0, 2.0 * math.pi, size=n)])
    return pts


def attainable_histogram(env_kind, bins: int = DEFAULT_BINS, mc_samples: int = 10 ** 6,
                         seed: int = 0, cache_dir=None) -> Histogram:
    """Monte Carlo histogram of the uniform distribution over reachable states
    (the unit disk, times a uniform angle for ArmArrow)."""
    kind = EnvKind.parse(env_kind)
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"attainable_{kind.value}_{bins}_{mc_samples}_{seed}.hist"
        if path.exists():
            return read_histogram(path)
    pts = _sample_attainable(kind, mc_samples, np.random.default_rng(seed))
    hist = build_histogram(pts, env_bounds(kind), bins)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        os.close(fd)
        write_histogram(tmp, hist)
        os.replace(tmp, path)
    return hist


def _check_compatible(E: Histogram, A: Histogram):
    if E.mass.shape != A.mass.shape or not np.allclose(E.bounds, A.bounds):
        raise ShapeMismatchError(
            f"histograms differ: shapes {E.mass.shape} vs {A.mass.shape}")


def klc(E: Histogram, A: Histogram, floor: float = KLC_FLOOR) -> float:
    """KL(E || A) in nats, summed over every bin where E has mass."""
    _check_compatible(E, A)
    e = E.mass.reshape(-1)
    a = np.maximum(A.mass.reshape(-1), floor)
    m = e > 0
    return float(np.sum(e[m] * np.log(e[m] / a[m])))


def klc_curve(points, A: Histogram, floor: float = KLC_FLOOR) -> np.ndarray:
    """KLC of the histogram of the first ``t`` points, for every ``t``."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    flat = bin_indices(p, A.bounds, A.bins)
    log_a = np.log(np.maximum(A.mass.reshape(-1), floor))
    counts = {}
    # running sum of c * (log c - log A) over occupied bins
    s = 0.0
    out = np.empty(len(flat))
    for t, b in enumerate(flat, start=1):
        c = counts.get(b, 0)
        if c:
            s -= c * (math.log(c) - log_a[b])
        c += 1
        counts[b] = c
        s += c * (math.log(c) - log_a[b])
        out[t - 1] = s / t - math.log(t)
    return out


def handled_curve(handled) -> np.ndarray:
    """Cumulative number of episodes in which the object was handled."""
    return np.cumsum(np.asarray(handled, dtype=bool)).astype(np.int64)


def write_histogram(path, hist: Histogram) -> None:
    with open(path, "wb") as fh:
        fh.write(HIST_MAGIC)
        fh.write(struct.pack("<II", hist.dims, hist.bins))
        fh.write(np.asarray(hist.bounds, dtype="<f8").tobytes())
        fh.write(np.asarray(hist.mass, dtype="<f8").reshape(-1).tobytes())


def read_histogram(path) -> Histogram:
    with open(path, "rb") as fh:
        if fh.read(len(HIST_MAGIC)) != HIST_MAGIC:
            raise ValueError(f"{path} is not a goalspace histogram")
        d, bins = struct.unpack("<II", fh.read(8))
        bounds = np.frombuffer(fh.read(16 * d), dtype="<f8").reshape(d, 2).copy()
        mass = np.frombuffer(fh.read(8 * bins ** d), dtype="<f8").reshape((bins,) * d).copy()
    return Histogram(bounds, bins, mass)


KLC_CSV_COLUMNS = ("epoch", "klc", "handled_cumulative")


def write_klc_csv(path, klc_values, handled_cumulative) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(KLC_CSV_COLUMNS)
        for epoch, (k, h) in enumerate(zip(klc_values, handled_cumulative)):
            w.writerow([epoch, repr(float(k)), int(h)])


def read_klc_csv(path):
    epochs, values, handled = [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            epochs.append(int(row["epoch"]))
            values.append(float(row["klc"]))
            handled.append(int(row["handled_cumulative"]))
    return np.array(epochs), np.array(values), np.array(handled)
