"""Figures from a campaign result tree: KLC curves, final-position scatters, long CSV."""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy import stats  # noqa: E402

from goalspace.campaign import BASELINES, read_manifest  # noqa: E402
from goalspace.env import INITIAL_POSITION  # noqa: E402
from goalspace.errors import GoalspaceError  # noqa: E402
from goalspace.metrics import read_klc_csv  # noqa: E402

LONG_CSV_COLUMNS = ("env", "algorithm", "latent_dim", "seed", "epoch", "klc",
                    "handled_cumulative")
CI_MIN_SEEDS = 5
plt.rcParams["svg.hashsalt"] = "goalspace"


def curve_band(curves):
    """Mean curve and band over seeds: 90% t-interval with >= 5 seeds,
    min/max with 2 to 4, none with one.  Returns ``(mean, lo, hi, label)``."""
    c = np.asarray(curves, dtype=float)
    mean = c.mean(axis=0)
    n = c.shape[0]
    if n == 1:
        return mean, None, None, ""
    if n >= CI_MIN_SEEDS:
        half = stats.t.ppf(0.95, n - 1) * c.std(axis=0, ddof=1) / np.sqrt(n)
        return mean, mean - half, mean + half, "90% CI"
    return mean, c.min(axis=0), c.max(axis=0), "min/max"


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def read_states(path):
    rows = list(csv.DictReader(open(path, newline="")))
    return np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)


def emit_plots(root, out_dir=None) -> list:
    """Write SVG figures and ``klc_long.csv`` under ``<root>/plots``; returns the paths."""
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise GoalspaceError(f"no manifest in {root}")
    cells = [c for c in read_manifest(root)["cells"] if c["status"] == "ok"]
    if not cells:
        raise GoalspaceError(f"no completed cells in {root}")
    out = Path(out_dir) if out_dir else root / "plots"
    out.mkdir(parents=True, exist_ok=True)
    written = []

    curves = {}
    long_path = out / "klc_long.csv"
    with open(long_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LONG_CSV_COLUMNS)
        for c in cells:
            epochs, klc, handled = read_klc_csv(root / c["path"] / "klc.csv")
            curves[(c["env"], c["algorithm"], c["latent_dim"], c["seed"])] = klc
            for e, k, h in zip(epochs, klc, handled):
                w.writerow([c["env"], c["algorithm"], c["latent_dim"], c["seed"], e,
                            repr(float(k)), h])
    written.append(long_path)

    # group seeds: (env, algo, l) -> [curve, ...]
    groups = defaultdict(list)
    for (env, algo, l, seed), k in sorted(curves.items(), key=lambda kv: str(kv[0])):
        groups[(env, algo, l)].append(k)
    for env in sorted({g[0] for g in groups}):
        dims = sorted({g[2] for g in groups if g[0] == env and g[2] != "na"}, key=int) or ["na"]
        for l in dims:
            fig, ax = plt.subplots(figsize=(6, 4))
            for (e, algo, gl), ks in sorted(groups.items()):
                if e != env or (gl != l and algo not in BASELINES):
                    continue
                n = min(len(k) for k in ks)
                mean, lo, hi, band = curve_band([k[:n] for k in ks])
                x = np.arange(n)
                label = f"{algo} ({band})" if band else algo
                line, = ax.plot(x, mean, label=label, lw=1.2)
                if lo is not None:
                    ax.fill_between(x, lo, hi, color=line.get_color(), alpha=0.2, lw=0)
            ax.set_xlabel("exploration epoch")
            ax.set_ylabel("KLC (nats)")
            ax.set_title(f"{env}, l = {l}")
            ax.legend(fontsize=7)
            path = out / f"klc_{env}_l{l}.svg"
            _save(fig, path)
            written.append(path)

    # final object positions, first seed of each (env, algo, l)
    first = {}
    for c in cells:
        key = (c["env"], c["algorithm"], c["latent_dim"])
        if key not in first or c["seed"] < first[key]["seed"]:
            first[key] = c
    for (env, algo, l), c in sorted(first.items()):
        pts = read_states(root / c["path"] / "states.csv")
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.add_patch(plt.Circle((0, 0), 1.0, fill=False, color="0.6", lw=0.8))
        ax.scatter(pts[:, 0], pts[:, 1], s=3, alpha=0.4)
        ax.plot(*INITIAL_POSITION, "kx", ms=6)
        ax.set_xlim(-1.05, 1.05)
        ax.set_ylim(-1.05, 1.05)
        ax.set_aspect("equal")
        ax.set_title(f"{env} {algo} l={l} seed {c['seed']}", fontsize=8)
        path = out / f"scatter_{env}_{algo}_l{l}_s{c['seed']}.svg"
        _save(fig, path)
        written.append(path)
    return written
