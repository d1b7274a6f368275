"""Logically diverse, physically checked simulated environments.

The package turns a natural-language household task into decision-tree
behavior plans, enumerates the logical trajectories those plans induce,
selects a small trajectory set that still covers every branch, builds one
concrete 3D scene per selected trajectory, validates the scenes against
physics rules, and executes behavior-tree policies against them to measure
coverage, plausibility, and fault detection.
"""

__version__ = "0.1.0"
