"""Training and evaluation workbench for collision-reset policies in
deep-RL mapless navigation: a deterministic 2D lidar world, an episode
manager with a per-episode collision budget, collision-aware replay, a
from-scratch soft actor-critic, and an experiment CLI."""

__version__ = "0.1.0"
