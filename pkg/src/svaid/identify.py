"""Least-squares identification of inertial parameters, offline and online."""
from __future__ import annotations

import csv
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .dynamics import JointState
from .model import ChainModel
from .regressor import compute_regressor

PINV_REL_CUTOFF = 1e-10
SAMPLE_LOG_VERSION = 1


class DegenerateSystemError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class Sample:
    t: float
    state: JointState
    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).reshape(-1)
        if u.size != self.state.n:
            raise ValueError("torque vector length does not match the joint state")
        if not (np.isfinite(self.t) and np.all(np.isfinite(u))
                and all(np.all(np.isfinite(a)) for a in (self.state.q, self.state.dq, self.state.ddq))):
            raise ValueError("sample entries must be finite")
        object.__setattr__(self, "u", u)

    @classmethod
    def from_arrays(cls, t, q, dq, ddq, u) -> "Sample":
        return cls(float(t), JointState(q, dq, ddq), u)


@dataclass(frozen=True, eq=False)
class StackedSystem:
    Y_C: np.ndarray
    U_C: np.ndarray
    n: int

    def __post_init__(self):
        if self.Y_C.shape[0] != self.U_C.shape[0] or self.Y_C.shape[0] % self.n:
            raise ValueError("stacked system rows must be a multiple of the joint count")

    @property
    def s(self) -> int:
        return self.Y_C.shape[0] // self.n


@dataclass(frozen=True, eq=False)
class FitResult:
    theta_hat: np.ndarray
    r_squared: float
    residual_norm: float
    singular_values: np.ndarray
    per_joint_r_squared: np.ndarray

    def __post_init__(self):
        for name in ("theta_hat", "singular_values", "per_joint_r_squared"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def r_squared(measured, predicted) -> float:
    """``1 - e'e / U'U``; 1 for an exact fit of all-zero torques."""
    measured = np.asarray(measured, dtype=float)
    e = measured - np.asarray(predicted, dtype=float)
    ee = float(e @ e)
    uu = float(measured @ measured)
    if uu == 0.0:
        return 1.0 if ee == 0.0 else -np.inf
    return 1.0 - ee / uu


def per_joint_r_squared(measured, predicted, n: int) -> np.ndarray:
    measured = np.asarray(measured).reshape(-1, n)
    predicted = np.asarray(predicted).reshape(-1, n)
    return np.array([r_squared(measured[:, j], predicted[:, j]) for j in range(n)])


def stack(model: ChainModel, samples: Iterable[Sample]) -> StackedSystem:
    samples = list(samples)
    if not samples:
        raise ValueError("cannot stack an empty sample list")
    Y = np.vstack([compute_regressor(model, s.state.q, s.state.dq, s.state.ddq) for s in samples])
    U = np.concatenate([s.u for s in samples])
    return StackedSystem(Y, U, model.n)


def pinv_solve(A: np.ndarray, b: np.ndarray, rel_cutoff: float = PINV_REL_CUTOFF):
    """Minimum-norm least-squares solution via a truncated SVD.

    Returns ``(x, singular_values)``.
    """
    Uh, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(A.shape[1]), s
    keep = s > rel_cutoff * s[0]
    coeffs = (Uh[:, keep].T @ b) / s[keep]
    return Vt[keep].T @ coeffs, s


def _result(sys: StackedSystem, theta: np.ndarray, sigma: np.ndarray) -> FitResult:
    predicted = sys.Y_C @ theta
    return FitResult(
        theta_hat=theta,
        r_squared=r_squared(sys.U_C, predicted),
        residual_norm=float(np.linalg.norm(sys.U_C - predicted)),
        singular_values=sigma,
        per_joint_r_squared=per_joint_r_squared(sys.U_C, predicted, sys.n),
    )


def fit(sys: StackedSystem, rel_cutoff: float = PINV_REL_CUTOFF) -> FitResult:
    """Minimum-norm minimiser of ``||U_C - Y_C theta||``."""
    if sys.Y_C.size == 0 or not np.any(sys.Y_C):
        raise DegenerateSystemError("stacked regressor is identically zero")
    theta, sigma = pinv_solve(sys.Y_C, sys.U_C, rel_cutoff)
    return _result(sys, theta, sigma)


def fit_with_prior(sys: StackedSystem, theta_0, alpha: float, rel_cutoff: float = PINV_REL_CUTOFF) -> FitResult:
    """Least squares on ``[alpha Y_C; (1-alpha) I] theta = [alpha U_C; (1-alpha) theta_0]``.

    Singular values reported are those of the unaugmented ``Y_C``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    theta_0 = np.asarray(theta_0, dtype=float)
    p = sys.Y_C.shape[1]
    if theta_0.shape != (p,):
        raise ValueError(f"theta_0 must have {p} entries")
    A = np.vstack([alpha * sys.Y_C, (1.0 - alpha) * np.eye(p)])
    b = np.concatenate([alpha * sys.U_C, (1.0 - alpha) * theta_0])
    theta, _ = pinv_solve(A, b, rel_cutoff)
    sigma = np.linalg.svd(sys.Y_C, compute_uv=False)
    return _result(sys, theta, sigma)


def predict_torque(model: ChainModel, theta_hat, samples: Iterable[Sample]) -> np.ndarray:
    sys = stack(model, samples)
    return sys.Y_C @ np.asarray(theta_hat, dtype=float)


# ------------------------------------------------------------------ filters

class AccelerationFilter:
    """Exponential moving average of finite-differenced joint velocities.

    The estimate starts at zero; ``smoothing=1`` gives the raw difference.
    """

    def __init__(self, smoothing: float = 0.2):
        if not 0.0 < smoothing <= 1.0:
            raise ValueError("smoothing factor must lie in (0, 1]")
        self.smoothing = smoothing
        self.prev_dq: Optional[np.ndarray] = None
        self.value: Optional[np.ndarray] = None

    def update(self, dq, dt: float) -> np.ndarray:
        if dt <= 0:
            raise ValueError("dt must be positive")
        dq = np.asarray(dq, dtype=float)
        if self.prev_dq is None:
            self.value = np.zeros_like(dq)
        else:
            raw = (dq - self.prev_dq) / dt
            self.value = self.smoothing * raw + (1.0 - self.smoothing) * self.value
        self.prev_dq = dq.copy()
        return self.value.copy()


def estimate_acceleration(filter_state: AccelerationFilter, dq, dt: float) -> np.ndarray:
    return filter_state.update(dq, dt)


# ------------------------------------------------------------------ online

@dataclass(frozen=True, eq=False)
class EstimatorSnapshot:
    t: float
    fit: Optional[FitResult]
    n_samples: int
    buffer_full: bool
    model_valid: bool

    @property
    def theta_hat(self) -> Optional[np.ndarray]:
        return None if self.fit is None else self.fit.theta_hat

    @property
    def r_squared(self) -> float:
        return float("nan") if self.fit is None else self.fit.r_squared


@dataclass
class GateConfig:
    """Admission rule for a full buffer: keep a sample that raises the
    smallest singular value of the buffered regressor or whose torque
    prediction error exceeds ``error_threshold``."""

    error_threshold: float = 0.5


@dataclass
class OnlineEstimator:
    """Buffered least squares with a nominal prior and decimated refits.

    ``capacity`` bounds a ring buffer; with ``grow=True`` the buffer is
    unbounded and counts as full once it holds ``capacity`` samples.
    A refit is due once ``(1 - period_tolerance) * update_period`` has
    elapsed, so samples quantised to a control tick do not skip a cycle.
    Ingestion (``ingest``) and refitting (``refit``) may run on different
    threads; readers only ever see whole snapshots via ``snapshot``.
    """

    model: ChainModel
    theta_0: np.ndarray
    capacity: int = 50
    alpha: float = 0.99
    update_period: float = 1.0 / 3.0
    r2_threshold: float = 0.95
    grow: bool = False
    gate: Optional[GateConfig] = None
    rel_cutoff: float = PINV_REL_CUTOFF
    period_tolerance: float = 0.05
    snapshot: EstimatorSnapshot = field(init=False)
    history: list = field(init=False, default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("buffer capacity must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        self.theta_0 = np.asarray(self.theta_0, dtype=float)
        if self.theta_0.shape != (self.model.n_params,):
            raise ValueError("theta_0 has the wrong length")
        self._buffer = deque(maxlen=None if self.grow else self.capacity)
        self._lock = threading.Lock()
        self._last_fit_t = -np.inf
        self.rejected = 0
        self.snapshot = EstimatorSnapshot(-np.inf, None, 0, False, False)

    def __len__(self) -> int:
        return len(self._buffer)

    @property
    def buffer_full(self) -> bool:
        return len(self._buffer) >= self.capacity

    def _admit(self, Y: np.ndarray, sample: Sample) -> bool:
        if self.gate is None or not self.buffer_full:
            return True
        theta = self.snapshot.theta_hat
        if theta is not None and np.max(np.abs(Y @ theta - sample.u)) > self.gate.error_threshold:
            return True
        current = np.vstack([y for y, _ in self._buffer])
        candidate = np.vstack([y for y, _ in list(self._buffer)[1:]] + [Y])
        s_now = np.linalg.svd(current, compute_uv=False)[-1]
        s_new = np.linalg.svd(candidate, compute_uv=False)[-1]
        return s_new > s_now

    def ingest(self, sample: Sample) -> bool:
        """Buffer ``sample`` (evicting the oldest if full). Returns False if gated out."""
        Y = compute_regressor(self.model, sample.state.q, sample.state.dq, sample.state.ddq)
        with self._lock:
            if not self._admit(Y, sample):
                self.rejected += 1
                return False
            self._buffer.append((Y, sample.u))
        return True

    def refit(self, t: float) -> EstimatorSnapshot:
        with self._lock:
            rows = list(self._buffer)
            full = self.buffer_full
        if not rows:
            return self.snapshot
        sys = StackedSystem(np.vstack([y for y, _ in rows]), np.concatenate([u for _, u in rows]), self.model.n)
        result = fit_with_prior(sys, self.theta_0, self.alpha, self.rel_cutoff)
        snap = EstimatorSnapshot(
            t=float(t),
            fit=result,
            n_samples=len(rows),
            buffer_full=full,
            model_valid=full and result.r_squared >= self.r2_threshold,
        )
        with self._lock:
            if snap.t >= self.snapshot.t:
                self.snapshot = snap
                self.history.append(snap)
        return self.snapshot

    def update(self, sample: Sample) -> EstimatorSnapshot:
        """Ingest ``sample`` and refit once the buffer is full and a period has elapsed."""
        self.ingest(sample)
        if self.buffer_full and sample.t - self._last_fit_t >= (1.0 - self.period_tolerance) * self.update_period:
            self._last_fit_t = sample.t
            return self.refit(sample.t)
        return self.snapshot


def online_update(est: OnlineEstimator, sample: Sample) -> OnlineEstimator:
    est.update(sample)
    return est


# ------------------------------------------------------------------ CSV logs

def sample_header(n: int) -> list[str]:
    cols = ["t"]
    for prefix in ("q", "dq", "ddq", "u"):
        cols += [f"{prefix}{j + 1}" for j in range(n)]
    return cols


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_samples_csv(path, samples: Iterable[Sample], n: int) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# format_version {SAMPLE_LOG_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(sample_header(n))
        for s in samples:
            row = [s.t, *s.state.q, *s.state.dq, *s.state.ddq, *s.u]
            writer.writerow([_fmt(x) for x in row])


class SampleLogError(ValueError):
    pass


def read_samples_csv(path, n: Optional[int] = None) -> list[Sample]:
    with open(path, newline="") as fh:
        lines = [line for line in fh if line.strip() and not line.startswith("#")]
    if not lines:
        raise SampleLogError(f"{path}: no header")
    reader = csv.reader(lines)
    header = next(reader)
    cols = len(header) - 1
    if cols <= 0 or cols % 4:
        raise SampleLogError(f"{path}: header has {len(header)} columns")
    width = cols // 4
    if n is not None and width != n:
        raise SampleLogError(f"{path}: log has {width} joints, model has {n}")
    if header != sample_header(width):
        raise SampleLogError(f"{path}: header does not match t,q1..qn,dq1..dqn,ddq1..ddqn,u1..un")
    samples = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise SampleLogError(f"{path}: row {lineno} has {len(row)} fields")
        try:
            vals = np.array([float(x) for x in row])
        except ValueError as exc:
            raise SampleLogError(f"{path}: row {lineno}: {exc}") from None
        w = width
        samples.append(Sample.from_arrays(vals[0], vals[1:1 + w], vals[1 + w:1 + 2 * w],
                                          vals[1 + 2 * w:1 + 3 * w], vals[1 + 3 * w:]))
    return samples
