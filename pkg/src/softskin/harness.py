"""Experiment orchestration: data collection, training, tracking, evaluation.

All randomness flows from ``ExperimentConfig.seed`` through
``numpy.random.SeedSequence`` so a (config, seed) pair reproduces every
dataset, model and run log bit for bit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import dynamics
from .actuation import PlantActuator, calibrate, plant_torque, torque_to_duty
from .control import THETA0, AdaptiveController, ControllerGains, lyapunov
from .dynamics import RobotState, SegmentParams, shape_fn
from .estimator import (
    Dataset,
    LstmModel,
    StreamingEstimator,
    TrainConfig,
    predict_sessions,
    rmse,
    split_contiguous,
    train,
)
from .sensing import SkinParams, make_channels, sample_frame
from .trajectories import TrajectorySpec

logger = logging.getLogger(__name__)

PWM_MAX = 255.0

# stream ids for SeedSequence, keep stable: changing them changes every dataset
_SCHEDULE, _SENSOR, _TEST, _TRACK, _INIT = 1, 2, 3, 4, 5


class Diverged(RuntimeError):
    """Closed loop pinned at the workspace limit for too long."""


@dataclass
class ExperimentConfig:
    mode: str = "uni"
    sensor_rate: float = 85.0
    physics_per_sample: int = 8
    hold_interval: tuple[float, float] = (0.8, 1.25)
    duty_range: tuple[float, float] = (0.0, PWM_MAX)
    n_sessions: int = 8
    total_points: int = 115410
    test_duration: float = 120.0
    tracking_duration: float = 60.0
    precycle: bool = False
    seed: int = 0
    hidden: int = 30
    segment: SegmentParams = field(default_factory=SegmentParams)
    skin_A: SkinParams = field(default_factory=lambda: SkinParams(side="A"))
    skin_B: SkinParams = field(default_factory=lambda: SkinParams(side="B"))
    actuator: PlantActuator = field(default_factory=PlantActuator)
    gains: ControllerGains = field(default_factory=ControllerGains)
    theta0: tuple[float, float, float] = THETA0
    rate_cutoff: float = 5.0
    clamp_theta: bool = False
    training: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.mode not in ("uni", "bi"):
            raise ValueError(f"mode must be 'uni' or 'bi', got {self.mode!r}")
        if self.sensor_rate <= 0 or self.physics_per_sample < 1:
            raise ValueError("rates must be positive")
        lo, hi = self.hold_interval
        if not 0 < lo <= hi:
            raise ValueError("hold_interval must satisfy 0 < lo <= hi")
        dlo, dhi = self.duty_range
        if not 0 <= dlo <= dhi <= PWM_MAX:
            raise ValueError("duty_range must lie in [0, 255]")
        if self.test_duration <= 0 or self.tracking_duration <= 0 or self.total_points <= 0:
            raise ValueError("durations must be positive")

    @classmethod
    def default(cls, mode: str = "uni", **kw) -> "ExperimentConfig":
        """Defaults for the uni (85 Hz, ~1 Hz holds) or bi (60 Hz, 1-4 Hz) setup."""
        if mode == "bi":
            base = dict(
                mode="bi",
                sensor_rate=60.0,
                physics_per_sample=10,
                hold_interval=(0.25, 1.0),
                n_sessions=7,
                total_points=107090,
                # duty feeds the estimator, so the rate filter closes a fast loop;
                # 2 Hz keeps it stable at 60 Hz for the trained models
                rate_cutoff=2.0,
            )
        else:
            base = dict(mode="uni")
        base.update(kw)
        return cls(**base)

    @property
    def input_dim(self) -> int:
        return 2 if self.mode == "uni" else 4

    @property
    def sample_dt(self) -> float:
        return 1.0 / self.sensor_rate

    @property
    def physics_dt(self) -> float:
        return 1.0 / (self.sensor_rate * self.physics_per_sample)


def _rng(config: ExperimentConfig, *stream) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([config.seed, *stream]))


def generate_actuation(config: ExperimentConfig, rng: np.random.Generator, n: int):
    """Random piecewise-constant duty schedule, one entry per sample.

    Hold lengths are uniform in ``config.hold_interval`` seconds (rounded to
    whole samples). Uni mode only drives compartment A; bi mode picks A or B
    with equal probability. Entry 0 is rest.
    """
    duty_A = np.zeros(n)
    duty_B = np.zeros(n)
    lo, hi = config.hold_interval
    dlo, dhi = config.duty_range
    k = 1
    while k < n:
        hold = rng.uniform(lo, hi)
        m = max(1, int(round(hold * config.sensor_rate)))
        u = rng.uniform(dlo, dhi)
        use_B = config.mode == "bi" and rng.random() < 0.5
        (duty_B if use_B else duty_A)[k : k + m] = u
        k += m
    return duty_A, duty_B


def switch_intervals(duty_A, duty_B, rate):
    """Durations (s) between command changes in a schedule, excluding the tail."""
    d = np.stack([duty_A, duty_B], axis=1)
    change = np.flatnonzero(np.any(np.diff(d, axis=0) != 0, axis=1)) + 1
    return np.diff(change) / rate


def _advance(config, state, tau):
    for _ in range(config.physics_per_sample):
        state = dynamics.step(config.segment, state, tau, config.physics_dt)
    return state


def precycle(config: ExperimentConfig, state: RobotState) -> RobotState:
    """Two inflate/deflate cycles per compartment, 5 s each phase.

    The simulated skin has no first-cycle effect, so this only exercises
    the plant; the segment is back at rest afterwards.
    """
    n = int(round(5.0 * config.sensor_rate))
    comps = ("A", "B") if config.mode == "bi" else ("A",)
    for comp in comps:
        for _ in range(2):
            for duty in (PWM_MAX, 0.0):
                duties = (duty, 0.0) if comp == "A" else (0.0, duty)
                tau = plant_torque(config.actuator, *duties)
                for _ in range(n):
                    state = _advance(config, state, tau)
    return state


def run_session(config: ExperimentConfig, duty_A, duty_B, sensor_seed) -> dict:
    """Open-loop run of a duty schedule through plant, dynamics and skins."""
    n = len(duty_A)
    h = config.sample_dt
    channels = make_channels((config.skin_A, config.skin_B), sensor_seed)
    use_B = config.mode == "bi"
    state = RobotState()
    if config.precycle:
        state = precycle(config, state)
    out = {k: np.empty(n) for k in ("t", "duty_A", "duty_B", "q_deg")}
    raw_A = np.empty(n, dtype=np.int64)
    raw_B = np.empty(n, dtype=np.int64)
    for k in range(n):
        t = k * h
        frame = sample_frame(config.segment, state, (duty_A[k], duty_B[k]), channels, t, h, use_B)
        out["t"][k] = t
        raw_A[k], raw_B[k] = frame.raw_A, frame.raw_B
        out["duty_A"][k], out["duty_B"][k] = frame.duty_A, frame.duty_B
        out["q_deg"][k] = math.degrees(state.q)
        # command switches right after sampling; hold it until the next tick
        nxt = min(k + 1, n - 1)
        tau = plant_torque(config.actuator, duty_A[nxt], duty_B[nxt])
        state = _advance(config, state, tau)
    out["raw_A"], out["raw_B"] = raw_A, raw_B
    out["reads_A"], out["reads_B"] = channels[0].reads, channels[1].reads
    return out


def _session_sizes(total, n_sessions):
    base, extra = divmod(total, n_sessions)
    return [base + (1 if i < extra else 0) for i in range(n_sessions)]


def _to_dataset(mode, runs) -> Dataset:
    cat = {k: np.concatenate([r[k] for r in runs]) for k in ("t", "raw_A", "raw_B", "duty_A", "duty_B", "q_deg")}
    session = np.concatenate([np.full(len(r["t"]), i) for i, r in enumerate(runs)])
    return Dataset(mode=mode, session=session, **cat)


def collect(config: ExperimentConfig, log=None) -> Dataset:
    """Concatenate ``n_sessions`` random-actuation sessions and split 70/15/15."""
    runs = []
    for i, n in enumerate(_session_sizes(config.total_points, config.n_sessions)):
        dA, dB = generate_actuation(config, _rng(config, _SCHEDULE, i), n)
        runs.append(run_session(config, dA, dB, [config.seed, _SENSOR, i]))
        if log is not None:
            log(f"session {i + 1}/{config.n_sessions}: {n} frames")
    ds = _to_dataset(config.mode, runs)
    ds.splits = split_contiguous(len(ds))
    ds.reads = (sum(r["reads_A"] for r in runs), sum(r["reads_B"] for r in runs))
    return ds


def collect_test(config: ExperimentConfig) -> Dataset:
    """Held-out random-actuation run (independent seed stream)."""
    n = int(round(config.test_duration * config.sensor_rate))
    dA, dB = generate_actuation(config, _rng(config, _TEST, 0), n)
    run = run_session(config, dA, dB, [config.seed, _TEST, 1])
    ds = _to_dataset(config.mode, [run])
    ds.splits = {"test": slice(0, n)}
    return ds


def train_estimator(config: ExperimentConfig, dataset: Dataset, log=None):
    model = LstmModel.init(config.input_dim, config.hidden, seed=[config.seed, _INIT])
    return train(model, dataset, replace(config.training, seed=config.seed), log=log)


def select_hidden(config: ExperimentConfig, dataset: Dataset, candidates=(10, 20, 30, 40)):
    """Train one model per hidden size; pick the lowest val_beta RMSE."""
    results = {}
    for H in candidates:
        res = train_estimator(replace(config, hidden=H), dataset)
        results[H] = res
    best = min(results, key=lambda H: results[H].val_beta)
    return best, results


def evaluate(model: LstmModel, data: Dataset, split: str | None = None) -> dict:
    """Streaming estimation RMSE (degrees) with per-step predictions.

    The LSTM state starts from zero at the beginning of every recording
    session; carrying it across a boundary would feed the model a jump
    between two unrelated runs.
    """
    sl = data.splits[split] if split else slice(None)
    X = data.inputs(sl)
    truth = data.q_deg[sl]
    pred = predict_sessions(model, X, None if data.session is None else data.session[sl])
    return {"rmse": rmse(pred, truth), "t": data.t[sl], "pred": pred, "truth": truth}


def calibrate_config(config: ExperimentConfig):
    return calibrate(config.actuator, config.segment)


@dataclass
class TrackingResult:
    log: dict
    tracking_rmse: float
    estimation_rmse: float
    feedback: str
    kind: str
    reads: tuple[int, int]

    def metrics(self) -> dict:
        return {
            "trajectory": self.kind,
            "feedback": self.feedback,
            "tracking_rmse_deg": self.tracking_rmse,
            "estimation_rmse_deg": self.estimation_rmse,
        }


def run_tracking(
    config: ExperimentConfig,
    trajectory: TrajectorySpec,
    model: LstmModel | None,
    maps,
    feedback: str = "estimator",
    duration: float | None = None,
    saturation_limit: float = 1.0,
) -> TrackingResult:
    """Closed-loop curvature tracking at the sensor rate.

    Each tick: sample skins -> LSTM estimate -> rate filter -> adaptive law
    -> torque_to_duty -> plant -> dynamics. ``feedback='truth'`` replaces the
    LSTM estimate by the simulated curvature (sensors are still sampled so
    the noise streams match). The segment starts at rest at q = 0.
    """
    if feedback not in ("estimator", "truth"):
        raise ValueError(f"feedback must be 'estimator' or 'truth', got {feedback!r}")
    if feedback == "estimator" and model is None:
        raise ValueError("estimator feedback needs a model")
    duration = config.tracking_duration if duration is None else duration
    n = int(round(duration * config.sensor_rate))
    h = config.sample_dt
    params = config.segment
    theta_true = np.array(params.theta)
    G = config.gains.gamma_matrix
    use_B = config.mode == "bi"

    channels = make_channels((config.skin_A, config.skin_B), [config.seed, _TRACK, 0])
    est = StreamingEstimator(model, config.mode) if model is not None else None
    ctrl = AdaptiveController(config.gains, np.array(config.theta0), config.rate_cutoff, config.clamp_theta)
    state = RobotState()
    if config.precycle:
        state = precycle(config, state)
    duties = (0.0, 0.0)
    cols = ("t", "q_d_deg", "q_truth_deg", "q_hat_deg", "s", "tau", "duty_A", "duty_B",
            "theta_hat_1", "theta_hat_2", "theta_hat_3", "V", "raw_A", "raw_B")
    log = {k: np.empty(n) for k in cols}
    pinned = 0.0
    for k in range(n):
        t = k * h
        frame = sample_frame(params, state, duties, channels, t, h, use_B)
        q_hat_deg = est.update(frame) if est is not None else math.degrees(state.q)
        q_fb = state.q if feedback == "truth" else math.radians(q_hat_deg)
        q_d, q_d_dot, q_d_ddot = trajectory(t)
        s_true = (state.q_dot - q_d_dot) + config.gains.lam * (state.q - q_d)
        V = lyapunov(params.theta[0] * shape_fn(state.q)[0], s_true, ctrl.theta_hat - theta_true, G)
        theta_before = ctrl.theta_hat
        tau, info = ctrl.update(q_fb, q_d, q_d_dot, q_d_ddot, h)
        duties = torque_to_duty(maps, tau)
        tau_plant = plant_torque(config.actuator, *duties)

        log["t"][k] = t
        log["q_d_deg"][k] = math.degrees(q_d)
        log["q_truth_deg"][k] = math.degrees(state.q)
        log["q_hat_deg"][k] = q_hat_deg
        log["s"][k] = info["s"]
        log["tau"][k] = tau
        log["duty_A"][k], log["duty_B"][k] = duties
        log["theta_hat_1"][k], log["theta_hat_2"][k], log["theta_hat_3"][k] = theta_before
        log["V"][k] = V
        log["raw_A"][k], log["raw_B"][k] = frame.raw_A, frame.raw_B

        state = _advance(config, state, tau_plant)
        pinned = pinned + h if dynamics.is_saturated(state) else 0.0
        if pinned > saturation_limit:
            raise Diverged(f"curvature pinned at the workspace limit for {pinned:.2f} s at t={t:.2f}")

    track = rmse(log["q_truth_deg"], log["q_d_deg"])
    est_rmse = rmse(log["q_hat_deg"], log["q_truth_deg"])
    return TrackingResult(log, track, est_rmse, feedback, trajectory.kind,
                          (channels[0].reads, channels[1].reads))
