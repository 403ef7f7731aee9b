"""
Goal exploration with learned and engineered goal spaces
========================================================

Compares random parameter exploration (RPE), random goals in engineered
features (RGE-EFR) and random goals in a PCA goal space (RGE-PCA) by the
KL-coverage of the final ball positions.  Lower is better.
"""
import numpy as np

from goalspace.env import sample_dataset
from goalspace.explorer import EngineeredFeatures, ExplorationConfig, run_exploration
from goalspace.goal_policy import GoalPolicy
from goalspace.metrics import attainable_histogram, klc_curve
from goalspace.representation import fit_pca

cfg = ExplorationConfig(n_exploration=1000, seed=0)
A = attainable_histogram("ArmBall")

_, images = sample_dataset("ArmBall", 1000, np.random.default_rng(0))
pca = fit_pca(images, 2)

runs = {
    "RPE": (None, None),
    "RGE-EFR": (EngineeredFeatures("ArmBall"), GoalPolicy.uniform(2)),
    "RGE-PCA": (pca, GoalPolicy.from_outcomes(pca.encode(images))),
}
for name, (embedding, policy) in runs.items():
    history, _ = run_exploration("ArmBall", embedding, policy, cfg)
    curve = klc_curve(history.state_matrix(), A)
    print(f"{name:8s} KLC after 100/500/1100 epochs: "
          f"{curve[99]:.2f} {curve[499]:.2f} {curve[-1]:.2f}; "
          f"ball handled {history.handled.sum()} times")

# The same comparison over a grid of seeds:
#   goalspace campaign --config demos/desk.yaml --out results --plot
