"""
The ArmBall and ArmArrow environments
=====================================

A 7-joint arm moves for 50 steps under a DMP controller with 21 parameters.
If the tip comes within grab range of the object, the object sticks to it.
The learner only sees a 70x70 frame of the object at the end.
"""
import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from goalspace.env import dmp_rollout, forward_kinematics, run_episode, simulate_episode

rng = np.random.default_rng(0)

# neutral parameters (all 0.5) give zero forcing: the arm stays at rest
print("rest posture:", np.abs(dmp_rollout(np.full(21, 0.5))).max())

# random parameters rarely touch the object
handled = [run_episode("ArmBall", rng.random(21))[2] for _ in range(500)]
print(f"random parameters handle the ball in {np.mean(handled):.1%} of episodes")

# find one episode that grabs the ball and draw the tip path and the final frame
while True:
    ep = simulate_episode("ArmBall", rng.random(21))
    if ep.handled:
        break
fig, (a, b) = plt.subplots(1, 2, figsize=(8, 4))
a.add_patch(plt.Circle((0, 0), 1, fill=False, color="0.7"))
a.plot(*ep.tips.T, ".-", ms=3, label="tip")
a.plot(*ep.object_track.T, "o", ms=2, label="ball")
a.set_aspect("equal")
a.legend()
b.imshow(ep.image, cmap="gray")
b.set_title("what the learner sees")
fig.savefig("demo_environment.svg")
print("contact at step", ep.contact_step, "final position", np.round(ep.state.object_pos, 3))

# straight arm reaches (1, 0)
print("straight arm tip:", forward_kinematics(np.zeros(7)))
