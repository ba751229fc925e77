"""Closed-form Lagrangian model of the planar double pendulum.

Written directly from the textbook energy expressions with no use of the
spatial-algebra code, so it can serve as an independent check. Angles are
measured from the horizontal +x axis, gravity acts along -y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ChainModel


@dataclass(frozen=True)
class DoublePendulum:
    m1: float
    m2: float
    l1: float
    lc1: float
    lc2: float
    I1: float  # z inertia about the centre of mass
    I2: float
    g: float = 9.81

    def mass_matrix(self, q) -> np.ndarray:
        c2 = math.cos(q[1])
        m2, l1, lc2 = self.m2, self.l1, self.lc2
        d11 = self.m1 * self.lc1 ** 2 + m2 * (l1 ** 2 + lc2 ** 2 + 2 * l1 * lc2 * c2) + self.I1 + self.I2
        d12 = m2 * (lc2 ** 2 + l1 * lc2 * c2) + self.I2
        d22 = m2 * lc2 ** 2 + self.I2
        return np.array([[d11, d12], [d12, d22]])

    def coriolis_matrix(self, q, dq) -> np.ndarray:
        h = -self.m2 * self.l1 * self.lc2 * math.sin(q[1])
        return np.array([[h * dq[1], h * (dq[0] + dq[1])], [-h * dq[0], 0.0]])

    def gravity_vector(self, q) -> np.ndarray:
        c1, c12 = math.cos(q[0]), math.cos(q[0] + q[1])
        g2 = self.m2 * self.lc2 * self.g * c12
        return np.array([(self.m1 * self.lc1 + self.m2 * self.l1) * self.g * c1 + g2, g2])

    def inverse_dynamics(self, q, dq, ddq) -> np.ndarray:
        return self.mass_matrix(q) @ ddq + self.coriolis_matrix(q, dq) @ dq + self.gravity_vector(q)

    def energy(self, q, dq) -> float:
        s1, s12 = math.sin(q[0]), math.sin(q[0] + q[1])
        V = self.g * (self.m1 * self.lc1 * s1 + self.m2 * (self.l1 * s1 + self.lc2 * s12))
        return 0.5 * float(dq @ self.mass_matrix(q) @ dq) + V


def double_pendulum_from_model(model: ChainModel, tol: float = 1e-12) -> DoublePendulum:
    """Read the closed-form parameters off a planar 2R ChainModel.

    Raises ``ValueError`` if the model is not a planar z-axis double pendulum
    with links along x and gravity along -y.
    """
    if not is_planar_double_pendulum(model, tol):
        raise ValueError("model is not a planar double pendulum")
    out = []
    for p in model.params:
        m = p.mass
        lc = p.theta[7] / m if m > 0 else 0.0
        out.append((m, lc, p.theta[8] - m * lc ** 2))
    (m1, lc1, I1), (m2, lc2, I2) = out
    return DoublePendulum(m1, m2, float(model.links[1].offset[0]), float(lc1), float(lc2),
                          float(I1), float(I2), model.gravity_magnitude)


def is_planar_double_pendulum(model: ChainModel, tol: float = 1e-12) -> bool:
    if model.n != 2:
        return False
    z = np.array([0.0, 0.0, 1.0])
    if any(np.max(np.abs(l.joint_axis - z)) > tol for l in model.links):
        return False
    if np.max(np.abs(model.links[0].offset)) > tol or np.max(np.abs(model.links[1].offset[1:])) > tol:
        return False
    g = model.gravity_magnitude
    if g > 0 and np.max(np.abs(model.base_gravity - np.array([0.0, -g, 0.0]))) > tol * max(1.0, g):
        return False
    for p in model.params:
        t = p.theta
        # first moment along x only; in-plane products of inertia that couple z vanish
        if abs(t[3]) > tol or abs(t[4]) > tol or abs(t[2]) > tol or abs(t[6]) > tol:
            return False
    return True
