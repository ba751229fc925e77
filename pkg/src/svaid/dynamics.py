"""Joint-space dynamics ``D(q) q'' + C(q, q') q' + G(q) = u`` of a ChainModel.

Four independent routes are kept deliberately separate so they can check
each other:

* ``mass_matrix`` sums body-Jacobian quadratic forms of the link tensors,
* ``coriolis_matrix`` builds Christoffel symbols from finite differences of D,
* ``gravity_vector`` differentiates the potential energy using base-frame
  forward kinematics,
* ``inverse_dynamics`` is a recursive Newton-Euler pass.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChainModel, N_LINK_PARAMS, forward_kinematics, params_to_tensor
from .spatial import crf, crm

FD_STEP = 1e-6
COND_LIMIT = 1e12


class SingularMassMatrixError(ArithmeticError):
    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"mass matrix is singular or ill-conditioned (condition estimate {condition:.3g})")


@dataclass(frozen=True, eq=False)
class JointState:
    q: np.ndarray
    dq: np.ndarray
    ddq: np.ndarray

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, k), dtype=float).reshape(-1) for k in ("q", "dq", "ddq")]
        if len({a.size for a in arrays}) != 1:
            raise ValueError("q, dq and ddq must have the same length")
        for key, arr in zip(("q", "dq", "ddq"), arrays):
            object.__setattr__(self, key, arr)

    @property
    def n(self) -> int:
        return self.q.size


@dataclass(frozen=True, eq=False)
class DynamicsTerms:
    D: np.ndarray
    C: np.ndarray
    G: np.ndarray


def _check_q(model: ChainModel, *vectors):
    out = []
    for v in vectors:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size != model.n:
            raise ValueError(f"expected {model.n} joint values, got {v.size}")
        out.append(v)
    return out


def _tensors(model: ChainModel, theta=None) -> list[np.ndarray]:
    if theta is None:
        return list(model.tensors)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.n_params,):
        raise ValueError(f"expected {model.n_params} parameters, got shape {theta.shape}")
    return [params_to_tensor(t) for t in theta.reshape(model.n, N_LINK_PARAMS)]


def joint_matrices(model: ChainModel, q) -> list[np.ndarray]:
    """Parent-to-child motion transforms of every joint at configuration ``q``."""
    return [spec.motion_matrix(qi) for spec, qi in zip(model.links, q)]


def motion_subspaces(model: ChainModel) -> list[np.ndarray]:
    return [spec._subspace for spec in model.links]


def link_kinematics(model: ChainModel, q, dq, ddq, X=None):
    """Forward Newton-Euler pass: transforms, axes, link velocities and accelerations.

    Gravity enters as a fictitious upward acceleration of the base, so the
    returned accelerations already include it.
    """
    X = joint_matrices(model, q) if X is None else X
    S = motion_subspaces(model)
    v_prev = np.zeros(6)
    a_prev = np.concatenate([np.zeros(3), -model.base_gravity])
    vs, acs = [], []
    for Xi, Si, dqi, ddqi in zip(X, S, dq, ddq):
        v = Xi @ v_prev + Si * dqi
        a = Xi @ a_prev + Si * ddqi + (crm(v) @ Si) * dqi
        vs.append(v)
        acs.append(a)
        v_prev, a_prev = v, a
    return X, S, vs, acs


def _rnea(model, X, tensors, dq, ddq) -> np.ndarray:
    X, S, vs, acs = link_kinematics(model, None, dq, ddq, X)
    forces = [I @ a + crf(v) @ (I @ v) for I, v, a in zip(tensors, vs, acs)]
    tau = np.zeros(model.n)
    for i in range(model.n - 1, -1, -1):
        tau[i] = S[i] @ forces[i]
        if i > 0:
            forces[i - 1] = forces[i - 1] + X[i].T @ forces[i]
    return tau


def inverse_dynamics(model: ChainModel, q, dq, ddq, theta=None) -> np.ndarray:
    """Joint torques ``K(q, q', q'')`` by recursive Newton-Euler."""
    q, dq, ddq = _check_q(model, q, dq, ddq)
    return _rnea(model, joint_matrices(model, q), _tensors(model, theta), dq, ddq)


def body_jacobians(model: ChainModel, q, X=None) -> list[np.ndarray]:
    """Body Jacobians of all links, each 6×n and expressed in that link's joint frame."""
    if X is None:
        (q,) = _check_q(model, q)
        X = joint_matrices(model, q)
    S = motion_subspaces(model)
    J = np.zeros((6, model.n))
    out = []
    for i in range(model.n):
        J = X[i] @ J
        J[:, i] = S[i]
        out.append(J)
    return out


def body_jacobian(model: ChainModel, q, i: int) -> np.ndarray:
    """Body Jacobian of link ``i`` (0-based) so that ``v_i = J @ dq``."""
    if not 0 <= i < model.n:
        raise IndexError(f"link index {i} out of range for a {model.n}-link chain")
    return body_jacobians(model, q)[i]


def _mass_matrix(model, X, tensors, symmetrize: bool = True) -> np.ndarray:
    D = np.zeros((model.n, model.n))
    for J, I in zip(body_jacobians(model, None, X), tensors):
        D += J.T @ I @ J
    return 0.5 * (D + D.T) if symmetrize else D


def mass_matrix(model: ChainModel, q, theta=None, symmetrize: bool = True) -> np.ndarray:
    """``sum_i J_i^T I_i J_i``. ``symmetrize=False`` returns the raw sum, useful
    for checking that round-off keeps it symmetric."""
    (q,) = _check_q(model, q)
    return _mass_matrix(model, joint_matrices(model, q), _tensors(model, theta), symmetrize)


def mass_matrix_derivatives(model: ChainModel, q, theta=None, h: float = FD_STEP) -> np.ndarray:
    """``dD[k] = dD/dq_k`` by central differences, shape (n, n, n)."""
    (q,) = _check_q(model, q)
    dD = np.empty((model.n, model.n, model.n))
    for k in range(model.n):
        e = np.zeros(model.n)
        e[k] = h
        dD[k] = (mass_matrix(model, q + e, theta) - mass_matrix(model, q - e, theta)) / (2 * h)
    return dD


def coriolis_matrix(model: ChainModel, q, dq, theta=None, h: float = FD_STEP) -> np.ndarray:
    """Christoffel-symbol Coriolis matrix, ``C[i, j] = sum_k Gamma_ijk dq_k``."""
    q, dq = _check_q(model, q, dq)
    dD = mass_matrix_derivatives(model, q, theta, h)
    # dD[k, i, j] = dD_ij/dq_k
    gamma = 0.5 * (
        np.einsum("kij->ijk", dD) + np.einsum("jik->ijk", dD) - np.einsum("ikj->ijk", dD)
    )
    return gamma @ dq


def _link_moments(model: ChainModel, theta):
    if theta is None:
        return [(p.mass, p.first_moment) for p in model.params]
    t = np.asarray(theta, dtype=float).reshape(model.n, N_LINK_PARAMS)
    return [(row[9], np.array([row[7], row[4], row[3]])) for row in t]


def gravity_vector(model: ChainModel, q, theta=None) -> np.ndarray:
    """Gradient of the potential energy from base-frame geometry."""
    (q,) = _check_q(model, q)
    g = model.gravity_magnitude
    up = model.vertical_axis
    rotations, origins = forward_kinematics(model, q)
    moments = _link_moments(model, theta)
    G = np.zeros(model.n)
    for k in range(model.n):
        axis_k = rotations[k] @ model.links[k].joint_axis
        for i in range(k, model.n):
            m, mc = moments[i]
            lever = m * (origins[i] - origins[k]) + rotations[i] @ mc
            G[k] += g * up @ np.cross(axis_k, lever)
    return G


def dynamics_terms(model: ChainModel, q, dq, theta=None) -> DynamicsTerms:
    return DynamicsTerms(
        D=mass_matrix(model, q, theta),
        C=coriolis_matrix(model, q, dq, theta),
        G=gravity_vector(model, q, theta),
    )


def forward_dynamics(model: ChainModel, q, dq, u, theta=None, cond_limit: float = COND_LIMIT) -> np.ndarray:
    """Joint accelerations produced by torques ``u``."""
    q, dq, u = _check_q(model, q, dq, u)
    X = joint_matrices(model, q)
    tensors = _tensors(model, theta)
    D = _mass_matrix(model, X, tensors)
    eig = np.linalg.eigvalsh(D)
    lo, hi = float(np.min(np.abs(eig))), float(np.max(np.abs(eig)))
    cond = np.inf if lo == 0.0 else hi / lo
    if not np.isfinite(cond) or cond > cond_limit or hi == 0.0:
        raise SingularMassMatrixError(cond)
    bias = _rnea(model, X, tensors, dq, np.zeros(model.n))
    return np.linalg.solve(D, u - bias)


def potential_energy(model: ChainModel, q, theta=None) -> float:
    (q,) = _check_q(model, q)
    g = model.gravity_magnitude
    up = model.vertical_axis
    rotations, origins = forward_kinematics(model, q)
    V = 0.0
    for (m, mc), R, p in zip(_link_moments(model, theta), rotations, origins):
        V += g * (m * up @ p + up @ (R @ mc))
    return float(V)


def kinetic_energy(model: ChainModel, q, dq, theta=None) -> float:
    q, dq = _check_q(model, q, dq)
    return 0.5 * float(dq @ mass_matrix(model, q, theta) @ dq)


def total_energy(model: ChainModel, q, dq, theta=None) -> float:
    return kinetic_energy(model, q, dq, theta) + potential_energy(model, q, theta)
