"""Command line entry point: ``python -m softskin <command>``.

Commands mirror the experiment pipeline and pass files between each other
through ``--out``::

    python -m softskin calibrate --out run/
    python -m softskin collect   --out run/
    python -m softskin train     --out run/
    python -m softskin eval      --out run/
    python -m softskin track     --out run/ --trajectory uni_low
    python -m softskin export    --out run/ --log run/track_uni_low_estimator.csv

Exit status: 0 on success, 2 for configuration or input errors, 3 when a
simulation or training run diverges.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import estimator, export, harness
from .actuation import CalibrationError, load_calibration, save_calibration
from .config import ConfigError, dump_config, load_config
from .dynamics import NonFiniteState
from .estimator import DimensionMismatch, LstmModel
from .trajectories import ALL_KINDS, TrajectorySpec

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3

logger = logging.getLogger("softskin")


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise ConfigError(f"{what} not found: {path} (run the producing command first or pass it explicitly)")
    return path


def cmd_calibrate(config, args, out: Path):
    maps = harness.calibrate_config(config)
    path = out / "calibration.json"
    save_calibration(maps, path)
    for m in maps:
        print(f"compartment {m.compartment}: tau_max={m.tau_max:.4f} N m, residual_rms={m.residual_rms:.3f} counts")
    print(f"wrote {path}")


def cmd_collect(config, args, out: Path):
    ds = harness.collect(config, log=print)
    test = harness.collect_test(config)
    export.write_dataset_csv(ds, out / "dataset.csv")
    export.write_dataset_csv(test, out / "test.csv")
    sizes = {k: s.stop - s.start for k, s in ds.splits.items()}
    print(f"{len(ds)} frames, splits {sizes}, held-out {len(test)} frames")
    print(f"wrote {out / 'dataset.csv'} and {out / 'test.csv'}")


def cmd_train(config, args, out: Path):
    data = _require(Path(args.data) if args.data else out / "dataset.csv", "dataset")
    ds = export.read_dataset_csv(data, config.mode)
    res = harness.train_estimator(config, ds, log=lambda r: logger.info("%s", r))
    path = Path(args.model) if args.model else out / "model.json"
    res.model.save(path)
    print(f"{res.iterations} iterations, best val_alpha RMSE {res.best_val_alpha:.3f} deg, "
          f"val_beta RMSE {res.val_beta:.3f} deg")
    print(f"wrote {path}")


def cmd_eval(config, args, out: Path):
    model = LstmModel.load(_require(Path(args.model) if args.model else out / "model.json", "model"))
    data = _require(Path(args.data) if args.data else out / "test.csv", "held-out data")
    ds = export.read_dataset_csv(data, config.mode)
    ev = harness.evaluate(model, ds)
    log = {
        "t": ds.t, "raw_A": ds.raw_A, "raw_B": ds.raw_B, "duty_A": ds.duty_A, "duty_B": ds.duty_B,
        "q_truth_deg": ev["truth"], "q_hat_deg": ev["pred"],
    }
    path = out / "predictions.csv"
    export.write_columns(path, log, tuple(log))
    print(f"estimation RMSE {ev['rmse']:.4f} deg over {len(ds)} frames")
    print(f"wrote {path}")


def cmd_track(config, args, out: Path):
    maps = load_calibration(_require(Path(args.calibration) if args.calibration else out / "calibration.json",
                                     "calibration"))
    model = None
    if args.feedback == "estimator":
        model = LstmModel.load(_require(Path(args.model) if args.model else out / "model.json", "model"))
    if args.trajectory == "all":
        kinds = [k for k in ALL_KINDS if TrajectorySpec(k).mode == config.mode]
    else:
        kinds = [args.trajectory]
    for kind in kinds:
        traj = TrajectorySpec(kind)
        if traj.mode != config.mode:
            raise ConfigError(f"trajectory {kind} needs mode={traj.mode}, config has mode={config.mode}")
        res = harness.run_tracking(config, traj, model, maps, feedback=args.feedback)
        stem = f"track_{kind}_{args.feedback}"
        export.write_run_log(res.log, out / f"{stem}.csv")
        (out / f"{stem}.json").write_text(json.dumps(res.metrics(), indent=2) + "\n")
        print(f"{kind} ({args.feedback}): tracking RMSE {res.tracking_rmse:.3f} deg, "
              f"estimation RMSE {res.estimation_rmse:.3f} deg")


def cmd_export(config, args, out: Path):
    log = export.read_columns(_require(Path(args.log), "log"))
    prefix = args.prefix if args.prefix is not None else Path(args.log).stem + "_"
    written = export.export_plots(log, out, prefix=prefix)
    if not written:
        raise ConfigError(f"{args.log} has none of the columns needed for a panel")
    for p in written:
        print(f"wrote {p}")


def cmd_config(config, args, out: Path):
    sys.stdout.write(dump_config(config))


COMMANDS = {
    "calibrate": (cmd_calibrate, "fit duty-to-torque maps for both compartments"),
    "collect": (cmd_collect, "record random-actuation training data and a held-out run"),
    "train": (cmd_train, "train the LSTM curvature estimator"),
    "eval": (cmd_eval, "estimation RMSE on the held-out run"),
    "track": (cmd_track, "closed-loop trajectory tracking"),
    "export": (cmd_export, "plot data (CSV + SVG) for a log"),
    "config": (cmd_config, "print the resolved configuration"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [experiment], [segment], ... sections")
    common.add_argument("--seed", type=int, help="experiment seed (overrides the config)")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="softskin", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    cmds = {name: sub.add_parser(name, parents=[common], help=text) for name, (_, text) in COMMANDS.items()}
    for name in ("train", "eval"):
        cmds[name].add_argument("--data", help="dataset CSV (default: OUT/dataset.csv or OUT/test.csv)")
    for name in ("train", "eval", "track"):
        cmds[name].add_argument("--model", help="model JSON (default: OUT/model.json)")
    cmds["track"].add_argument("--trajectory", default="all", choices=ALL_KINDS + ("all",),
                               help="trajectory name, or 'all' for those matching the mode")
    cmds["track"].add_argument("--feedback", default="estimator", choices=("estimator", "truth"))
    cmds["track"].add_argument("--calibration", help="calibration JSON (default: OUT/calibration.json)")
    cmds["export"].add_argument("--log", required=True, help="run log or predictions CSV")
    cmds["export"].add_argument("--prefix", help="file name prefix (default: log name)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, args.set, args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command][0](config, args, out)
    except (ConfigError, CalibrationError, DimensionMismatch, ValueError) as exc:
        print(f"softskin: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (harness.Diverged, estimator.Diverged, NonFiniteState) as exc:
        print(f"softskin: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK
