"""Numerical property checks run by ``svaid verify``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    coriolis_matrix,
    gravity_vector,
    inverse_dynamics,
    kinetic_energy,
    mass_matrix,
)
from .model import ChainModel
from .oracles import double_pendulum_from_model, is_planar_double_pendulum
from .regressor import compute_regressor
from .sim import simulate_unforced
from .spatial import PluckerTransform, force_transform, motion_transform, rotation_about

TOLERANCES = {
    "regressor_identity": 1e-9,
    "mass_matrix_symmetry": 1e-9,
    "skew_symmetry": 1e-5,
    "formulation_identity": 1e-8,
    "power_invariance": 1e-10,
    "energy_conservation": 1e-6,
    "oracle_equivalence": 1e-6,
}


@dataclass(frozen=True)
class PropertyResult:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_error < self.tolerance)


def _random_transform(rng) -> PluckerTransform:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return PluckerTransform(rotation_about(axis, rng.uniform(-np.pi, np.pi)), rng.uniform(-1, 1, 3))


def energy_drift(model: ChainModel, q0, dq0, duration: float = 10.0, dt: float = 1e-3) -> float:
    """Relative drift of total energy in an unforced RK4 run.

    Normalised by ``max(|E0|, max T)`` so that a potential datum which
    happens to make ``E0`` small does not inflate the ratio.
    """
    _, qs, dqs, energy = simulate_unforced(model, q0, dq0, duration, dt)
    T_max = max(kinetic_energy(model, q, dq) for q, dq in zip(qs[::100], dqs[::100]))
    scale = max(abs(energy[0]), T_max, 1e-12)
    return float(np.max(np.abs(energy - energy[0])) / scale)


def run_property_suite(model: ChainModel, trials: int, seed: int = 0,
                       energy_duration: float = 10.0) -> list[PropertyResult]:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    n = model.n
    err = {k: 0.0 for k in TOLERANCES}
    oracle = double_pendulum_from_model(model) if is_planar_double_pendulum(model) else None
    if oracle is None:
        del err["oracle_equivalence"]
    h = 1e-6
    for _ in range(trials):
        q, dq, ddq = rng.uniform(-np.pi, np.pi, (3, n))
        theta = rng.normal(size=model.n_params)
        Y = compute_regressor(model, q, dq, ddq)
        err["regressor_identity"] = max(err["regressor_identity"], float(np.max(np.abs(
            Y @ theta - inverse_dynamics(model, q, dq, ddq, theta)))))

        D = mass_matrix(model, q, symmetrize=False)
        err["mass_matrix_symmetry"] = max(err["mass_matrix_symmetry"], float(np.max(np.abs(D - D.T))))

        C = coriolis_matrix(model, q, dq)
        D_dot = (mass_matrix(model, q + h * dq) - mass_matrix(model, q - h * dq)) / (2 * h)
        N = D_dot - 2 * C
        err["skew_symmetry"] = max(err["skew_symmetry"], float(np.max(np.abs(N + N.T))))

        G = gravity_vector(model, q)
        bias = inverse_dynamics(model, q, dq, np.zeros(n))
        err["formulation_identity"] = max(err["formulation_identity"], float(np.max(np.abs(C @ dq + G - bias))))

        X = _random_transform(rng)
        v, f = rng.normal(size=(2, 6))
        err["power_invariance"] = max(err["power_invariance"],
                                      abs(float(f @ v - force_transform(X, f) @ motion_transform(X, v))))

        if oracle is not None:
            e = max(
                np.max(np.abs(mass_matrix(model, q) - oracle.mass_matrix(q))),
                np.max(np.abs(C @ dq - oracle.coriolis_matrix(q, dq) @ dq)),
                np.max(np.abs(G - oracle.gravity_vector(q))),
            )
            err["oracle_equivalence"] = max(err["oracle_equivalence"], float(e))

    q0, dq0 = rng.uniform(-1, 1, (2, n))
    err["energy_conservation"] = energy_drift(model, q0, dq0, energy_duration)
    return [PropertyResult(k, v, TOLERANCES[k]) for k, v in err.items()]
