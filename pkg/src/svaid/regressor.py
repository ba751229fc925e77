"""Parameter-linear regressor ``Y(q, q', q'')`` with ``Y @ theta == K``.

Columns are produced by toggling one inertial parameter at a time: with
``theta[k] = 1`` and every other parameter zero, the joint torques of the
chain are exactly column ``k``. Kinematics do not depend on the parameters,
so one forward pass is shared and each column costs a single backward
sweep over all ``n`` links, giving ``10 n`` sweeps of ``O(n)`` each.
"""
from __future__ import annotations

import numpy as np

from .dynamics import (
    _check_q,
    coriolis_matrix,
    gravity_vector,
    link_kinematics,
    mass_matrix,
)
from .model import ChainModel, N_LINK_PARAMS, basis_tensors
from .spatial import crf

SIGMA_REL_TOL = 1e-8

_BASIS = basis_tensors()


# crf(v).ravel() == v @ _CRF_MAP
_CRF_MAP = np.stack([crf(e).ravel() for e in np.eye(6)])


def _basis_forces(vs, acs, basis=None):
    """Link forces for every unit parameter of every link, shape (n, 10, 6).

    ``out[i, j]`` is ``I_j a_i + v_i ×* I_j v_i`` for the tensor ``I_j`` with
    only parameter ``j`` set to one.
    """
    B = _BASIS if basis is None else basis
    vs = np.asarray(vs)
    Bv = np.einsum("jrc,nc->njr", B, vs)
    Ba = np.einsum("jrc,nc->njr", B, np.asarray(acs))
    cross = (vs @ _CRF_MAP).reshape(-1, 6, 6)
    return Ba + np.einsum("nrs,njs->njr", cross, Bv)


def compute_regressor(model: ChainModel, q, dq, ddq) -> np.ndarray:
    """n × 10n regressor, columns ordered link-major then parameter index."""
    q, dq, ddq = _check_q(model, q, dq, ddq)
    n = model.n
    X, S, vs, acs = link_kinematics(model, q, dq, ddq)
    # row 0: joint torque S.f; rows 1..6: force handed to the parent, X^T f
    sweep = [np.vstack([Si, Xi.T]) for Si, Xi in zip(S, X)]
    unit_forces = _basis_forces(vs, acs)
    Y = np.empty((n, n * N_LINK_PARAMS))
    zero = np.zeros(6)
    for i in range(n):
        for j in range(N_LINK_PARAMS):
            col = i * N_LINK_PARAMS + j
            # full inverse-dynamics backward pass with theta[i, j] = 1, all else 0
            f = zero
            for link in range(n - 1, -1, -1):
                if link == i:
                    f = f + unit_forces[i][j]
                out = sweep[link] @ f
                Y[link, col] = out[0]
                f = out[1:]
    return Y


def regressor_reference(model: ChainModel, q, dq, ddq, h: float = 1e-6) -> np.ndarray:
    """Slow regressor from ``D q'' + C q' + G`` evaluated per unit parameter.

    Coriolis terms come from finite-differenced Christoffel symbols, so this
    agrees with :func:`compute_regressor` only to finite-difference accuracy.
    """
    q, dq, ddq = _check_q(model, q, dq, ddq)
    Y = np.empty((model.n, model.n_params))
    for k in range(model.n_params):
        theta = np.zeros(model.n_params)
        theta[k] = 1.0
        D = mass_matrix(model, q, theta)
        C = coriolis_matrix(model, q, dq, theta, h)
        Y[:, k] = D @ ddq + C @ dq + gravity_vector(model, q, theta)
    return Y


def stacked_regressor(model: ChainModel, states) -> np.ndarray:
    """Vertically stacked regressors for ``(q, dq, ddq)`` triples or JointStates."""
    blocks = []
    for s in states:
        if hasattr(s, "q"):
            blocks.append(compute_regressor(model, s.q, s.dq, s.ddq))
        else:
            blocks.append(compute_regressor(model, *s))
    if not blocks:
        raise ValueError("at least one state is required")
    return np.vstack(blocks)


def identifiable_columns(model: ChainModel, states, rel_tol: float = SIGMA_REL_TOL) -> list[int]:
    """Columns that are numerically independent of the columns before them.

    Columns are scanned in link-major order; a column is kept when adding it
    to the kept set leaves the smallest singular value above
    ``rel_tol * sigma_max`` of the full stacked regressor. Parameters of
    dropped columns only appear in linear combinations with kept ones.
    """
    states = list(states)
    if not states:
        raise ValueError("identifiable_columns needs at least one state")
    Y = stacked_regressor(model, states)
    return independent_columns(Y, rel_tol)


def independent_columns(Y: np.ndarray, rel_tol: float = SIGMA_REL_TOL) -> list[int]:
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] > Y.shape[1]:
        # same column geometry, far fewer rows
        Y = np.linalg.qr(Y, mode="r")
    sigma_max = np.linalg.norm(Y, 2)
    if sigma_max == 0.0:
        return []
    kept: list[int] = []
    for k in range(Y.shape[1]):
        trial = Y[:, kept + [k]]
        s = np.linalg.svd(trial, compute_uv=False)
        if s.size == len(kept) + 1 and s[-1] > rel_tol * sigma_max:
            kept.append(k)
    return kept


def numerical_rank(Y: np.ndarray, rel_tol: float = SIGMA_REL_TOL) -> int:
    s = np.linalg.svd(np.asarray(Y, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))
