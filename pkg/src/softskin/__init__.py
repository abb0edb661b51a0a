"""Simulated soft bending segment with strain-skin curvature sensing.

The package couples a piecewise-constant-curvature segment model with a
resistive skin sensor, an LSTM curvature estimator trained on random
actuation and an adaptive tracking controller.

Modules
-------
dynamics
    Planar constant-curvature segment: kinematics, dynamics terms, RK4 step.
actuation
    Ground-truth duty-to-torque plant and the cubic calibration that inverts it.
sensing
    Skin strain, resistance, ADC readout and frame streams.
estimator
    Numpy LSTM with exact BPTT, Adam, early stopping and streaming inference.
control
    Adaptive sliding-variable controller with a filtered differentiator.
harness
    Data collection, training, evaluation and closed-loop tracking runs.
export, config, cli
    CSV/SVG output, INI configuration and the ``python -m softskin`` commands.
"""

from .control import AdaptiveController, ControllerGains
from .dynamics import RobotState, SegmentParams, step
from .estimator import Dataset, LstmModel, StreamingEstimator, TrainConfig
from .harness import ExperimentConfig, collect, evaluate, run_tracking, train_estimator
from .sensing import SkinParams
from .trajectories import TrajectorySpec

__all__ = [
    "AdaptiveController",
    "ControllerGains",
    "Dataset",
    "ExperimentConfig",
    "LstmModel",
    "RobotState",
    "SegmentParams",
    "SkinParams",
    "StreamingEstimator",
    "TrainConfig",
    "TrajectorySpec",
    "collect",
    "evaluate",
    "run_tracking",
    "step",
    "train_estimator",
]

__version__ = "0.1.0"
