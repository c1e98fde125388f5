"""Rendering toolkit for training-run export bundles.

Consumes only the documented bundle files (curves, thresholds, replay
stats, trajectories, map geometry); every plotted number is read from
the bundle, never recomputed from raw runs."""

__version__ = "0.1.0"
