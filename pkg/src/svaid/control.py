"""Computed-torque control with a PD outer loop and a validity-gated model switch."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .identify import EstimatorSnapshot
from .model import ChainModel
from .regressor import compute_regressor

NOMINAL = "nominal"
IDENTIFIED = "identified"
CONTROL_LOG_VERSION = 1


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    kp: np.ndarray
    kd: np.ndarray
    torque_limits: np.ndarray
    r2_threshold: float = 0.95

    def __post_init__(self):
        kp = np.atleast_1d(np.asarray(self.kp, dtype=float))
        kd = np.atleast_1d(np.asarray(self.kd, dtype=float))
        lim = np.atleast_1d(np.asarray(self.torque_limits, dtype=float))
        if np.any(kp < 0) or np.any(kd < 0):
            raise ValueError("gains must be non-negative")
        if np.any(lim <= 0):
            raise ValueError("torque limits must be positive")
        object.__setattr__(self, "kp", kp)
        object.__setattr__(self, "kd", kd)
        object.__setattr__(self, "torque_limits", lim)

    @classmethod
    def uniform(cls, n: int, kp: float = 100.0, kd: float = 20.0,
                torque_limit: float = np.inf, r2_threshold: float = 0.95) -> "ControllerConfig":
        return cls(np.full(n, kp), np.full(n, kd), np.full(n, torque_limit), r2_threshold)


@dataclass(frozen=True, eq=False)
class TrajectoryPoint:
    q_des: np.ndarray
    dq_des: np.ndarray
    ddq_des: np.ndarray


@dataclass(frozen=True, eq=False)
class TorqueCommand:
    u: np.ndarray
    saturated: bool = False
    model_used: str = IDENTIFIED


def computed_torque(model: ChainModel, theta_hat, q, dq, ddq_cmd, torque_limits=None) -> TorqueCommand:
    """``Y(q, dq, ddq_cmd) @ theta_hat``, clamped to ``torque_limits`` if given."""
    u = compute_regressor(model, q, dq, ddq_cmd) @ np.asarray(theta_hat, dtype=float)
    saturated = False
    if torque_limits is not None:
        lim = np.broadcast_to(np.asarray(torque_limits, dtype=float), u.shape)
        clipped = np.clip(u, -lim, lim)
        saturated = bool(np.any(clipped != u))
        u = clipped
    return TorqueCommand(u, saturated)


def pd_acceleration(cfg: ControllerConfig, ref: TrajectoryPoint, q, dq) -> np.ndarray:
    return ref.ddq_des + cfg.kd * (ref.dq_des - dq) + cfg.kp * (ref.q_des - q)


def gated_controller_step(cfg: ControllerConfig, model: ChainModel, nominal_theta,
                          snapshot: Optional[EstimatorSnapshot], ref: TrajectoryPoint,
                          q, dq) -> TorqueCommand:
    """Computed torque using the identified parameters only while the estimator
    reports a valid model (full buffer and R² at or above threshold)."""
    use_identified = snapshot is not None and snapshot.model_valid and snapshot.fit is not None
    theta = snapshot.theta_hat if use_identified else nominal_theta
    cmd = computed_torque(model, theta, q, dq, pd_acceleration(cfg, ref, q, dq), cfg.torque_limits)
    return TorqueCommand(cmd.u, cmd.saturated, IDENTIFIED if use_identified else NOMINAL)


class SwitchLog:
    """Records the ticks at which the controller changes model."""

    def __init__(self):
        self.events: list[tuple[float, str, str]] = []
        self._current: Optional[str] = None

    def observe(self, t: float, model_used: str) -> None:
        if self._current is not None and model_used != self._current:
            self.events.append((t, self._current, model_used))
        self._current = model_used


def control_header(n: int) -> list[str]:
    cols = ["t", "model_used"]
    for prefix in ("q_des", "q", "u_cmd"):
        cols += [f"{prefix}{j + 1}" for j in range(n)]
    return cols + ["saturated"]


def write_control_csv(path, t, model_used, q_des, q, u_cmd, saturated, n=None) -> None:
    if n is None:
        n = np.asarray(q).reshape(len(t), -1).shape[1] if len(t) else 0
    q_des, q, u_cmd = (np.asarray(a, dtype=float).reshape(len(t), n) for a in (q_des, q, u_cmd))
    with open(path, "w", newline="") as fh:
        fh.write(f"# format_version {CONTROL_LOG_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(control_header(n))
        for k in range(len(t)):
            row = [format(float(t[k]), ".17g"), model_used[k]]
            row += [format(float(x), ".17g") for x in (*q_des[k], *q[k], *u_cmd[k])]
            row.append(str(int(bool(saturated[k]))))
            writer.writerow(row)
