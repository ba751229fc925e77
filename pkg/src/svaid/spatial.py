"""6-D spatial vector algebra in Plücker coordinates.

Motion vectors are ``[wx, wy, wz, vx, vy, vz]`` and force vectors are
``[tx, ty, tz, fx, fy, fz]``; angular part first everywhere in the package.
Vectors are plain ``numpy`` arrays of shape ``(6,)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ORTHONORMAL_TOL = 1e-12
SYMMETRY_TOL = 1e-9

_EYE3 = np.eye(3)


def skew(a) -> np.ndarray:
    """Matrix ``a×`` such that ``skew(a) @ b == cross(a, b)``."""
    x, y, z = a
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def motion(angular, linear) -> np.ndarray:
    return np.concatenate([np.asarray(angular, float), np.asarray(linear, float)])


def force(moment, linear_force) -> np.ndarray:
    return np.concatenate([np.asarray(moment, float), np.asarray(linear_force, float)])


def crm(v) -> np.ndarray:
    """Spatial cross product operator for motion vectors (``v×``)."""
    wx, wy, wz, vx, vy, vz = v
    return np.array([
        [0.0, -wz, wy, 0.0, 0.0, 0.0],
        [wz, 0.0, -wx, 0.0, 0.0, 0.0],
        [-wy, wx, 0.0, 0.0, 0.0, 0.0],
        [0.0, -vz, vy, 0.0, -wz, wy],
        [vz, 0.0, -vx, wz, 0.0, -wx],
        [-vy, vx, 0.0, -wy, wx, 0.0],
    ])


def crf(v) -> np.ndarray:
    """Spatial cross product operator for force vectors (``v×*``)."""
    return -crm(v).T


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit ``axis``."""
    k = skew(axis)
    return _EYE3 + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


@dataclass(frozen=True, eq=False)
class PluckerTransform:
    """Coordinate transform from frame A to frame B.

    ``translation`` is the position of B's origin expressed in A and
    ``rotation`` maps A-coordinates into B-coordinates. The translation is
    applied first, then the rotation about the new origin.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        E = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        r = np.asarray(self.translation, dtype=float).reshape(3)
        if not (np.all(np.isfinite(E)) and np.all(np.isfinite(r))):
            raise ValueError("transform entries must be finite")
        if np.max(np.abs(E @ E.T - np.eye(3))) > ORTHONORMAL_TOL * 10:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(E) - 1.0) > ORTHONORMAL_TOL * 10:
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "rotation", E)
        object.__setattr__(self, "translation", r)

    @classmethod
    def identity(cls) -> "PluckerTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_rotation(cls, E) -> "PluckerTransform":
        return cls(E, np.zeros(3))

    @classmethod
    def from_translation(cls, r) -> "PluckerTransform":
        return cls(np.eye(3), r)

    def matrix(self) -> np.ndarray:
        """6×6 matrix acting on motion vectors."""
        E, rx = self.rotation, skew(self.translation)
        X = np.zeros((6, 6))
        X[:3, :3] = E
        X[3:, 3:] = E
        X[3:, :3] = -E @ rx
        return X

    def force_matrix(self) -> np.ndarray:
        """6×6 matrix acting on force vectors (the inverse transpose of :meth:`matrix`)."""
        E, rx = self.rotation, skew(self.translation)
        X = np.zeros((6, 6))
        X[:3, :3] = E
        X[3:, 3:] = E
        X[:3, 3:] = -E @ rx
        return X

    def inverse(self) -> "PluckerTransform":
        E = self.rotation
        return PluckerTransform(E.T, -E @ self.translation)

    def __matmul__(self, other: "PluckerTransform") -> "PluckerTransform":
        return compose(self, other)


def motion_transform(X: PluckerTransform, v) -> np.ndarray:
    E, r = X.rotation, X.translation
    w, lin = v[:3], v[3:]
    return np.concatenate([E @ w, E @ (lin - np.cross(r, w))])


def force_transform(X: PluckerTransform, f) -> np.ndarray:
    E, r = X.rotation, X.translation
    n, lin = f[:3], f[3:]
    return np.concatenate([E @ (n - np.cross(r, lin)), E @ lin])


def compose(X1: PluckerTransform, X2: PluckerTransform) -> PluckerTransform:
    """Transform equivalent to applying ``X2`` then ``X1``."""
    E1, r1 = X1.rotation, X1.translation
    E2, r2 = X2.rotation, X2.translation
    return PluckerTransform(E1 @ E2, r2 + E2.T @ r1)


def rotate_then_translate(rotation, r) -> PluckerTransform:
    """Rotate by ``rotation`` first, then translate by ``r`` given in the rotated frame.

    Equivalent to translating by ``rotation.T @ r`` first, so the result
    is expressed through the canonical translate-then-rotate form.
    """
    return compose(PluckerTransform.from_translation(r), PluckerTransform.from_rotation(rotation))


def spatial_inertia_from_params(m: float, c, I_C) -> np.ndarray:
    """Spatial inertia about a point O of a body with mass ``m``, centre of
    mass ``c`` (relative to O) and rotational inertia ``I_C`` about the CoM."""
    if m < 0:
        raise ValueError(f"mass must be non-negative, got {m}")
    I_C = np.asarray(I_C, dtype=float).reshape(3, 3)
    if np.max(np.abs(I_C - I_C.T)) > SYMMETRY_TOL:
        raise ValueError("rotational inertia must be symmetric")
    cx = skew(np.asarray(c, dtype=float))
    out = np.empty((6, 6))
    out[:3, :3] = I_C + m * cx @ cx.T
    out[:3, 3:] = m * cx
    out[3:, :3] = m * cx.T
    out[3:, 3:] = m * np.eye(3)
    return out


def check_spatial_inertia(I, tol: float = SYMMETRY_TOL) -> None:
    """Raise ``ValueError`` unless ``I`` has the block structure of a spatial inertia."""
    I = np.asarray(I, dtype=float)
    if I.shape != (6, 6):
        raise ValueError(f"spatial inertia must be 6x6, got {I.shape}")
    if np.max(np.abs(I - I.T)) > tol:
        raise ValueError("spatial inertia is not symmetric")
    m = I[3, 3]
    if np.max(np.abs(I[3:, 3:] - m * np.eye(3))) > tol:
        raise ValueError("lower-right block must be m * identity")
    upper = I[:3, 3:]
    if np.max(np.abs(upper + upper.T)) > tol:
        raise ValueError("coupling block must be skew-symmetric")


def momentum(I, v) -> np.ndarray:
    return np.asarray(I) @ np.asarray(v)


def kinetic_energy(I, v) -> float:
    v = np.asarray(v)
    return 0.5 * float(v @ (np.asarray(I) @ v))


def transform_inertia(X: PluckerTransform, I) -> np.ndarray:
    """Express a spatial inertia given in frame A in frame B coordinates."""
    Xi = X.inverse()
    return Xi.matrix().T @ np.asarray(I) @ Xi.matrix()
