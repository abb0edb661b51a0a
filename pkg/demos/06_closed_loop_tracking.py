"""
Closed-loop tracking with the learned estimator
===============================================

The full pipeline: calibrate the actuator, train the estimator, then track
a reference curvature using the estimator's output as feedback. The same run
with true curvature as feedback is the ablation baseline. Plot data for the
run lands in ``demos/out``.

This uses a reduced training budget; with it the estimator is rougher than
the default pipeline and tracking suffers accordingly.
"""

from pathlib import Path

from softskin.export import export_plots
from softskin.harness import ExperimentConfig, calibrate_config, collect, run_tracking, train_estimator
from softskin.trajectories import TrajectorySpec

config = ExperimentConfig.default("uni", total_points=12000, n_sessions=2, tracking_duration=30.0)
maps = calibrate_config(config)
model = train_estimator(config, collect(config)).model

# %% Track uni_low both ways
for feedback in ("truth", "estimator"):
    res = run_tracking(config, TrajectorySpec("uni_low"), model, maps, feedback=feedback)
    print(f"{feedback:9s}: tracking RMSE {res.tracking_rmse:.3f} deg, estimation RMSE {res.estimation_rmse:.3f} deg")

# %% Export the estimator run as CSV + SVG panels
out = Path(__file__).with_name("out")
for path in export_plots(res.log, out, prefix="uni_low_"):
    print("wrote", path)
