"""Utility modules for diesel-empc.

This package contains one subpackage per stage of the lab:

- plant: reference engine airpath, emission maps and measurement proxies
- data: data generation, input selection, outlier filtering and splits
- nn: multilayer emissions network, training and model files
- lpv: scheduling grid, local model identification and target maps
- mpc: dense QP solver, rate-based models and condensed horizons
- control: economic MPC, airpath feedforward/feedback and the pipeline
- harness: drive cycles, closed-loop runs, metrics and reports
"""

from . import control, data, harness, lpv, mpc, nn, plant

__all__ = ["control", "data", "harness", "lpv", "mpc", "nn", "plant"]
