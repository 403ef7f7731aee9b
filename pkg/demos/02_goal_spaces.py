"""
Learning a goal space from images
=================================

A passive stage shows the learner images of the ball placed uniformly at
random.  We fit PCA, Isomap and a small VAE on them, then check how well
each 2-D embedding follows the true ball position.
"""
import numpy as np
from scipy.stats import spearmanr

from goalspace.env import sample_dataset
from goalspace.goal_policy import GoalPolicy
from goalspace.representation import TrainConfig, fit_embedding

states, images = sample_dataset("ArmBall", 1000, np.random.default_rng(0))
pos = np.array([s.object_pos for s in states])

# short budget so the demo runs in about a minute
vae_cfg = TrainConfig.for_variant("VAE", n_updates=300, warmup_updates=50)

for variant, cfg in (("PCA", None), ("Isomap", None), ("VAE", vae_cfg)):
    model = fit_embedding(images, 2, variant, cfg)
    z = model.encode(images)
    # best rank correlation of each latent axis with x or y
    rho = max(abs(spearmanr(z[:, i], pos[:, j]).statistic) for i in range(2) for j in range(2))
    policy = GoalPolicy.from_outcomes(z)
    print(f"{variant:7s} best |spearman| latent vs position: {rho:.2f}; "
          f"KDE bandwidth diag {np.round(np.diag(policy.kde.bandwidth), 4)}")
