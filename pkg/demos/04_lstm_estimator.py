"""
Learning curvature from skin readings
=====================================

Random actuation drives the simulated segment while both skins are sampled.
An LSTM maps (raw counts, commanded duties) to curvature. The full default
budget (115k frames, up to 200 epochs) takes a few minutes; set FULL = True
to run it. The reduced run below finishes in well under a minute.
"""

from softskin.harness import ExperimentConfig, collect, collect_test, evaluate, train_estimator

FULL = False

if FULL:
    config = ExperimentConfig.default("uni")
else:
    config = ExperimentConfig.default("uni", total_points=12000, n_sessions=2, test_duration=30.0)

# %% Collect training data and a separate held-out run
data = collect(config, log=print)
test = collect_test(config)
print({name: sl.stop - sl.start for name, sl in data.splits.items()}, "frames per split")

# %% Train with Adam, dropout, L2 and early stopping on the first validation split
result = train_estimator(config, data, log=lambda rec: print(rec) if rec["iteration"] % 500 == 0 else None)
print(f"{result.iterations} iterations, best val_alpha {result.best_val_alpha:.3f} deg, "
      f"val_beta {result.val_beta:.3f} deg")

# %% Held-out estimation error
ev = evaluate(result.model, test)
print(f"held-out RMSE {ev['rmse']:.3f} deg over {len(test)} frames")
