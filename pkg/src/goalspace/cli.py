"""Command line entry point: ``goalspace observe|fit|explore|campaign|plot``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from goalspace.campaign import CampaignConfig, run_campaign
from goalspace.env import EnvKind, sample_dataset, write_pgm, write_states_csv
from goalspace.errors import GoalspaceError
from goalspace.explorer import (
    EngineeredFeatures,
    run_exploration,
    write_epoch_log_csv,
    write_history_jsonl,
)
from goalspace.goal_policy import GoalPolicy
from goalspace.metrics import attainable_histogram, handled_curve, klc_curve, write_klc_csv

log = logging.getLogger("goalspace")


def _config(args) -> CampaignConfig:
    cfg = CampaignConfig.load(args.config) if args.config else CampaignConfig()
    if args.paper_scale:
        cfg = cfg.with_paper_scale()
    overrides = {}
    if args.seed is not None:
        overrides["seeds"] = (args.seed,)
    if args.out is not None:
        overrides["out_dir"] = args.out
    return CampaignConfig.from_dict({**cfg.as_dict(), **overrides}) if overrides else cfg


def cmd_observe(args, cfg):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = args.n or cfg.n_observation
    states, images = sample_dataset(args.env, n, np.random.default_rng(cfg.seeds[0]))
    np.savez_compressed(out / "observations.npz", images=images,
                        states=np.array([s.as_vector() for s in states]))
    write_states_csv(out / "states.csv", states)
    if args.pgm:
        (out / "images").mkdir(exist_ok=True)
        for i in range(min(args.pgm, n)):
            write_pgm(out / "images" / f"{i:05d}.pgm", images[i].reshape(70, 70))
    log.info("wrote %d observations to %s", n, out)
    return 0


def cmd_fit(args, cfg):
    from goalspace.representation import Variant, fit_embedding
    from goalspace.representation.neural import write_loss_curve
    from goalspace.representation.serialize import save_model

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with np.load(args.data) as f:
        images = f["images"]
    variant = Variant.parse(args.variant)
    tcfg = None
    if variant.is_neural:
        if args.n_updates is not None:
            cfg = CampaignConfig.from_dict({**cfg.as_dict(), "training":
                                            {**cfg.training, "n_updates": args.n_updates}})
        tcfg = cfg.train_config(variant, cfg.seeds[0])
    model = fit_embedding(images, args.latent_dim, variant, tcfg, cfg.kappa)
    policy = GoalPolicy.from_outcomes(model.encode(images))
    save_model(out / "model.gsm", model, policy)
    if getattr(model, "loss_curve", None):
        write_loss_curve(out / "loss.csv", model.loss_curve)
    log.info("wrote %s model (l=%d) to %s", variant.value, args.latent_dim, out)
    return 0


def cmd_explore(args, cfg):
    from goalspace.representation.serialize import load_model

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = EnvKind.parse(args.env)
    if args.model:
        embedding, policy = load_model(args.model)
        if args.goal_policy == "prior":
            policy = GoalPolicy.gaussian_prior(embedding.latent_dim)
    elif args.efr:
        embedding = EngineeredFeatures(kind)
        policy = GoalPolicy.uniform(embedding.dim)
    else:
        embedding = policy = None
    history, epochs = run_exploration(kind, embedding, policy, cfg.exploration(cfg.seeds[0]))
    A = attainable_histogram(kind, cfg.klc_bins, cfg.mc_samples, cache_dir=out / "_cache")
    curve = klc_curve(history.state_matrix(), A)
    write_klc_csv(out / "klc.csv", curve, handled_curve(history.handled))
    write_epoch_log_csv(out / "log.csv", epochs, 0 if policy is None else policy.dim)
    write_states_csv(out / "states.csv", history.states, history.handled)
    write_history_jsonl(out / "history.jsonl", history)
    print(json.dumps({"final_klc": float(curve[-1]),
                      "handled_fraction": float(history.handled.mean())}))
    return 0


def cmd_campaign(args, cfg):
    def progress(rec):
        msg = rec.get("error", "") if rec["status"] != "ok" else \
            f"klc {rec['final_klc']:.3f} handled {rec['handled_fraction']:.3f}"
        log.info("%-40s %-6s %s (%.1fs)", rec["path"], rec["status"], msg, rec["runtime_s"])

    manifest = run_campaign(cfg, workers=args.workers, progress=progress)
    log.info("%d/%d cells succeeded", manifest["n_ok"], manifest["n_cells"])
    if args.plot and manifest["n_ok"]:
        from goalspace.plots import emit_plots
        emit_plots(cfg.out_dir)
    return 0 if manifest["n_failed"] == 0 else 1


def cmd_plot(args, cfg):
    from goalspace.plots import emit_plots

    root = args.root or cfg.out_dir
    for p in emit_plots(root):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON campaign config")
    common.add_argument("--seed", type=int, help="single seed (overrides the config seeds)")
    common.add_argument("--paper-scale", action="store_true",
                        help="full-size datasets, exploration budgets and training budgets")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="goalspace",
                                description="Goal exploration with learned goal spaces")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("observe", parents=[common], help="sample a passive image dataset")
    s.add_argument("--env", default="ArmBall")
    s.add_argument("--n", type=int, help="number of observations")
    s.add_argument("--pgm", type=int, default=0, help="also export the first N images as PGM")
    s.set_defaults(func=cmd_observe)

    s = sub.add_parser("fit", parents=[common], help="fit a representation and its KDE")
    s.add_argument("--data", required=True, help="observations.npz from `observe`")
    s.add_argument("--variant", default="PCA", help="PCA, Isomap, AE, VAE or RFVAE")
    s.add_argument("--latent-dim", type=int, default=2)
    s.add_argument("--n-updates", type=int, help="training updates for neural variants")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("explore", parents=[common], help="run one exploration")
    s.add_argument("--env", default="ArmBall")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--model", help="model.gsm from `fit` (RGE with a learned goal space)")
    g.add_argument("--efr", action="store_true", help="engineered features (RGE-EFR)")
    s.add_argument("--goal-policy", choices=("kde", "prior"), default="kde")
    s.set_defaults(func=cmd_explore)

    s = sub.add_parser("campaign", parents=[common], help="run a full grid")
    s.add_argument("--workers", type=int, help="pool size (default $GOALSPACE_THREADS)")
    s.add_argument("--plot", action="store_true", help="emit plots when done")
    s.set_defaults(func=cmd_campaign)

    s = sub.add_parser("plot", parents=[common], help="plots from a result tree")
    s.add_argument("root", nargs="?", help="result tree (default: --out)")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(message)s")
    try:
        cfg = _config(args)
        return args.func(args, cfg)
    except (GoalspaceError, ValueError, OSError) as exc:
        log.error("error: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
