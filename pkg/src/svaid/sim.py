"""Fixed-step plant simulation, reference trajectories and the scripted experiments."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .control import (
    IDENTIFIED,
    NOMINAL,
    ControllerConfig,
    SwitchLog,
    TrajectoryPoint,
    gated_controller_step,
)
from .dynamics import SingularMassMatrixError, forward_dynamics, total_energy
from .identify import (
    AccelerationFilter,
    OnlineEstimator,
    Sample,
    fit,
    stack,
)
from .model import ChainModel, load_model

SCENARIO_VERSION = 1
SCENARIO_NAMES = ("double_pendulum_offline", "leg_offline_growing", "arm_online_gated")
INTEGRATORS = ("rk4", "semi-implicit-euler")


class ScenarioFormatError(ValueError):
    pass


class SimulationError(RuntimeError):
    def __init__(self, tick: int, cause: Exception):
        self.tick = tick
        super().__init__(f"integration failed at tick {tick}: {cause}")


@dataclass(frozen=True)
class NoiseConfig:
    """Additive Gaussian measurement noise (standard deviations, scalar or per joint)."""

    q: object = 0.0
    dq: object = 0.0
    ddq: object = 0.0
    u: object = 0.0

    def is_zero(self) -> bool:
        return all(not np.any(np.asarray(getattr(self, k))) for k in ("q", "dq", "ddq", "u"))


@dataclass(frozen=True)
class SimConfig:
    duration: float
    dt: float = 1e-3
    integrator: str = "rk4"
    noise: NoiseConfig = NoiseConfig()
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.duration < 0:
            raise ValueError("duration must be non-negative")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


# ------------------------------------------------------------ integration

def step(model: ChainModel, q, dq, u, dt: float, integrator: str = "rk4"):
    """Advance ``(q, dq)`` by ``dt`` with torque ``u`` held constant."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    q = np.asarray(q, dtype=float)
    dq = np.asarray(dq, dtype=float)
    if integrator == "semi-implicit-euler":
        dq_next = dq + dt * forward_dynamics(model, q, dq, u)
        return q + dt * dq_next, dq_next
    if integrator != "rk4":
        raise ValueError(f"unknown integrator {integrator!r}")
    k1q, k1v = dq, forward_dynamics(model, q, dq, u)
    k2q = dq + 0.5 * dt * k1v
    k2v = forward_dynamics(model, q + 0.5 * dt * k1q, k2q, u)
    k3q = dq + 0.5 * dt * k2v
    k3v = forward_dynamics(model, q + 0.5 * dt * k2q, k3q, u)
    k4q = dq + dt * k3v
    k4v = forward_dynamics(model, q + dt * k3q, k4q, u)
    q_next = q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
    dq_next = dq + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return q_next, dq_next


def simulate_unforced(model: ChainModel, q0, dq0, duration: float, dt: float = 1e-3, integrator: str = "rk4"):
    """Free motion under gravity only; returns times, positions, velocities and energies."""
    n_steps = int(round(duration / dt))
    q, dq = np.asarray(q0, dtype=float), np.asarray(dq0, dtype=float)
    u = np.zeros(model.n)
    qs, dqs, energy = [q], [dq], [total_energy(model, q, dq)]
    for _ in range(n_steps):
        q, dq = step(model, q, dq, u, dt, integrator)
        qs.append(q)
        dqs.append(dq)
        energy.append(total_energy(model, q, dq))
    return np.arange(n_steps + 1) * dt, np.array(qs), np.array(dqs), np.array(energy)


# ------------------------------------------------------------ trajectories

def sinusoid_trajectory(amplitudes, frequencies, phases, t: float, offsets=None) -> TrajectoryPoint:
    """``q = A sin(2 pi f t + phi) + offset`` with analytic derivatives."""
    A = np.asarray(amplitudes, dtype=float)
    w = 2 * np.pi * np.asarray(frequencies, dtype=float)
    phi = np.asarray(phases, dtype=float)
    off = np.zeros_like(A) if offsets is None else np.asarray(offsets, dtype=float)
    if not (A.shape == w.shape == phi.shape == off.shape):
        raise ValueError("amplitudes, frequencies, phases and offsets must have equal length")
    arg = w * t + phi
    return TrajectoryPoint(A * np.sin(arg) + off, A * w * np.cos(arg), -A * w ** 2 * np.sin(arg))


def _min_jerk(tau: float):
    """Position, velocity and acceleration of the 10-15-6 quintic on [0, 1]."""
    s = tau ** 3 * (10 - 15 * tau + 6 * tau ** 2)
    ds = 30 * tau ** 2 * (1 - tau) ** 2
    dds = 60 * tau * (1 - tau) * (1 - 2 * tau)
    return s, ds, dds


def ticktock_trajectory(pose_a, pose_b, period: float, t: float) -> TrajectoryPoint:
    """Rest-to-rest minimum-jerk moves A -> B -> A, each taking half a period."""
    if period <= 0:
        raise ValueError("period must be positive")
    a = np.asarray(pose_a, dtype=float)
    b = np.asarray(pose_b, dtype=float)
    half = 0.5 * period
    phase = t % period
    start, end = (a, b) if phase < half else (b, a)
    tau = (phase if phase < half else phase - half) / half
    s, ds, dds = _min_jerk(tau)
    delta = end - start
    return TrajectoryPoint(start + s * delta, ds / half * delta, dds / half ** 2 * delta)


def trajectory_from_spec(spec: dict) -> Callable[[float], TrajectoryPoint]:
    kind = spec.get("kind")
    if kind == "sinusoid":
        amps, freqs = spec["amplitudes"], spec["frequencies"]
        phases = spec.get("phases", [0.0] * len(amps))
        offsets = spec.get("offsets", [0.0] * len(amps))
        return lambda t: sinusoid_trajectory(amps, freqs, phases, t, offsets)
    if kind == "ticktock":
        return lambda t: ticktock_trajectory(spec["pose_a"], spec["pose_b"], spec["period"], t)
    raise ScenarioFormatError(f"unknown trajectory kind {kind!r}")


# ------------------------------------------------------------ scenarios

@dataclass
class EstimatorConfig:
    capacity: int = 50
    grow: bool = False
    alpha: float = 0.99
    update_period: float = 1.0 / 3.0
    sample_period: float = 1.0 / 3.0
    r2_threshold: float = 0.95


@dataclass
class Scenario:
    name: str
    plant: ChainModel
    trajectory: dict
    controller: ControllerConfig
    nominal: Optional[ChainModel] = None
    estimator: Optional[EstimatorConfig] = None
    acceleration: str = "exact"
    ema_smoothing: float = 0.2
    settle_time: float = 1.0

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ScenarioFormatError(f"unknown scenario {self.name!r}")
        if self.acceleration not in ("exact", "ema"):
            raise ScenarioFormatError("acceleration must be 'exact' or 'ema'")
        if self.name != "double_pendulum_offline" and self.estimator is None:
            raise ScenarioFormatError(f"scenario {self.name!r} needs an estimator section")

    @property
    def nominal_theta(self) -> np.ndarray:
        return (self.nominal or self.plant).theta


@dataclass
class ScenarioResult:
    samples: list
    control: dict
    metrics: dict
    switch_events: list = field(default_factory=list)


def _std(value, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(value, dtype=float), (n,))


def run_scenario(scn: Scenario, cfg: SimConfig) -> ScenarioResult:
    """Closed-loop run of plant, controller and (where configured) estimator."""
    plant = scn.plant
    n = plant.n
    traj = trajectory_from_spec(scn.trajectory)
    rng = np.random.default_rng(cfg.seed)
    noise = {k: _std(getattr(cfg.noise, k), n) for k in ("q", "dq", "ddq", "u")}
    nominal_theta = scn.nominal_theta

    est = None
    if scn.estimator is not None:
        e = scn.estimator
        est = OnlineEstimator(plant, nominal_theta, capacity=e.capacity, alpha=e.alpha,
                              update_period=e.update_period, r2_threshold=e.r2_threshold, grow=e.grow)
    gated = scn.name == "arm_online_gated"
    acc_filter = AccelerationFilter(scn.ema_smoothing) if scn.acceleration == "ema" else None

    ref0 = traj(0.0)
    q, dq = ref0.q_des.copy(), ref0.dq_des.copy()
    steps = cfg.n_steps
    samples = []
    log = {k: [] for k in ("t", "model_used", "q_des", "q", "u_cmd", "saturated")}
    switches = SwitchLog()
    r2_history = []
    next_sample_t = scn.estimator.sample_period if est is not None else np.inf

    for k in range(steps):
        t = k * cfg.dt
        ref = traj(t)
        q_meas = q + noise["q"] * rng.standard_normal(n)
        dq_meas = dq + noise["dq"] * rng.standard_normal(n)
        snapshot = est.snapshot if (est is not None and gated) else None
        cmd = gated_controller_step(scn.controller, plant, nominal_theta, snapshot, ref, q_meas, dq_meas)
        try:
            ddq_true = forward_dynamics(plant, q, dq, cmd.u)
        except SingularMassMatrixError as exc:
            raise SimulationError(k, exc) from exc
        if acc_filter is not None:
            ddq_meas = acc_filter.update(dq_meas, cfg.dt)
        else:
            ddq_meas = ddq_true + noise["ddq"] * rng.standard_normal(n)
        u_meas = cmd.u + noise["u"] * rng.standard_normal(n)
        sample = Sample.from_arrays(t, q_meas, dq_meas, ddq_meas, u_meas)
        samples.append(sample)

        log["t"].append(t)
        log["model_used"].append(cmd.model_used)
        log["q_des"].append(ref.q_des)
        log["q"].append(q.copy())
        log["u_cmd"].append(cmd.u)
        log["saturated"].append(cmd.saturated)
        switches.observe(t, cmd.model_used)

        if est is not None and t >= next_sample_t - 1e-9:
            next_sample_t += scn.estimator.sample_period
            if not cmd.saturated:
                before = est.snapshot
                snap = est.update(sample)
                if snap is not before:
                    r2_history.append((t, snap.r_squared, snap.model_valid))

        try:
            q, dq = step(plant, q, dq, cmd.u, cfg.dt, cfg.integrator)
        except SingularMassMatrixError as exc:
            raise SimulationError(k, exc) from exc
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(dq))):
            raise SimulationError(k, FloatingPointError("state became non-finite"))

    control = {
        "t": np.array(log["t"]),
        "model_used": log["model_used"],
        "q_des": np.array(log["q_des"]).reshape(-1, n),
        "q": np.array(log["q"]).reshape(-1, n),
        "u_cmd": np.array(log["u_cmd"]).reshape(-1, n),
        "saturated": np.array(log["saturated"], dtype=bool),
    }
    metrics = _metrics(scn, plant, samples, control, est, r2_history, switches)
    return ScenarioResult(samples, control, metrics, switches.events)


def _metrics(scn, plant, samples, control, est, r2_history, switches) -> dict:
    metrics: dict = {"scenario": scn.name, "n_ticks": len(samples)}
    if not samples:
        return metrics
    if scn.name == "double_pendulum_offline":
        sys = stack(plant, samples)
        result = fit(sys)
        predicted = sys.Y_C @ result.theta_hat
        metrics.update(
            final_r2=result.r_squared,
            per_joint_r2=result.per_joint_r_squared.tolist(),
            max_abs_torque_residual=float(np.max(np.abs(predicted - sys.U_C))),
            theta_hat=result.theta_hat.tolist(),
            rank=int(np.sum(result.singular_values > 1e-10 * result.singular_values[0])),
        )
        return metrics

    snap = est.snapshot
    metrics["r2_history"] = [[t, r2, valid] for t, r2, valid in r2_history]
    metrics["n_buffered"] = len(est)
    if snap.fit is not None:
        metrics["final_r2"] = snap.r_squared
        metrics["per_joint_r2"] = snap.fit.per_joint_r_squared.tolist()
        metrics["theta_hat"] = snap.theta_hat.tolist()
    full_times = [s.t for s in est.history if s.buffer_full]
    metrics["buffer_full_time"] = full_times[0] if full_times else None
    valid = [s for s in est.history if s.model_valid]
    metrics["model_valid_time"] = valid[0].t if valid else None
    metrics["r2_at_valid"] = valid[0].r_squared if valid else None

    if scn.name == "arm_online_gated":
        t = control["t"]
        err = control["q_des"] - control["q"]
        used = np.array([m == IDENTIFIED for m in control["model_used"]])
        switch_t = float(t[np.argmax(used)]) if used.any() else None
        metrics["switch_time"] = switch_t
        metrics["switch_events"] = [[ts, a, b] for ts, a, b in switches.events]
        metrics["r2_at_switch"] = metrics["r2_at_valid"]
        if switch_t is not None:
            before = (t >= scn.settle_time) & (t < switch_t) & ~used
            after = (t >= switch_t + scn.settle_time) & used
            metrics["mean_error_before"] = err[before].mean(axis=0).tolist() if before.any() else None
            metrics["mean_error_after"] = err[after].mean(axis=0).tolist() if after.any() else None
            metrics["ptp_error_before"] = np.ptp(err[before], axis=0).tolist() if before.any() else None
            metrics["ptp_error_after"] = np.ptp(err[after], axis=0).tolist() if after.any() else None
        metrics["ticks_nominal"] = int(np.sum(~used))
    return metrics


# ------------------------------------------------------------ scenario files

_TOP_KEYS = {"format_version", "name", "nominal_model", "trajectory", "controller",
             "estimator", "measurement", "sim", "settle_time"}


def _check_keys(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ScenarioFormatError(f"{where}: unknown keys {sorted(unknown)}")


def load_scenario(path, plant: ChainModel):
    """Read a JSON scenario file; returns ``(Scenario, SimConfig)``.

    ``nominal_model`` paths are resolved relative to the scenario file.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(doc, plant, base_dir=os.path.dirname(os.path.abspath(path)))


def scenario_from_dict(doc: dict, plant: ChainModel, base_dir: str = "."):
    if not isinstance(doc, dict):
        raise ScenarioFormatError("scenario must be a JSON object")
    _check_keys(doc, _TOP_KEYS, "scenario")
    if doc.get("format_version") != SCENARIO_VERSION:
        raise ScenarioFormatError(f"unsupported format_version {doc.get('format_version')!r}")
    n = plant.n
    try:
        ctrl = doc.get("controller", {})
        _check_keys(ctrl, {"kp", "kd", "torque_limits", "r2_threshold"}, "controller")
        controller = ControllerConfig(
            kp=_std(ctrl.get("kp", 100.0), n),
            kd=_std(ctrl.get("kd", 20.0), n),
            torque_limits=_std(ctrl.get("torque_limits", np.inf), n),
            r2_threshold=float(ctrl.get("r2_threshold", 0.95)),
        )
        estimator = None
        if doc.get("estimator") is not None:
            e = doc["estimator"]
            _check_keys(e, set(EstimatorConfig.__dataclass_fields__), "estimator")
            estimator = EstimatorConfig(**e)
        meas = doc.get("measurement", {})
        _check_keys(meas, {"acceleration", "ema_smoothing"}, "measurement")
        sim = doc.get("sim", {})
        _check_keys(sim, {"dt", "duration", "integrator", "seed", "noise"}, "sim")
        noise = sim.get("noise", {})
        _check_keys(noise, {"q", "dq", "ddq", "u"}, "sim.noise")
        cfg = SimConfig(
            duration=float(sim.get("duration", 10.0)),
            dt=float(sim.get("dt", 1e-3)),
            integrator=sim.get("integrator", "rk4"),
            noise=NoiseConfig(**noise),
            seed=int(sim.get("seed", 0)),
        )
        traj = doc["trajectory"]
        trajectory_from_spec(traj)
        nominal = None
        if doc.get("nominal_model"):
            nominal = load_model(os.path.join(base_dir, doc["nominal_model"]))
            if nominal.n != n:
                raise ScenarioFormatError("nominal model has a different number of links")
        scn = Scenario(
            name=doc.get("name", ""),
            plant=plant,
            trajectory=traj,
            controller=controller,
            nominal=nominal,
            estimator=estimator,
            acceleration=meas.get("acceleration", "exact"),
            ema_smoothing=float(meas.get("ema_smoothing", 0.2)),
            settle_time=float(doc.get("settle_time", 1.0)),
        )
    except ScenarioFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioFormatError(f"invalid scenario: {exc}") from None
    return scn, cfg
