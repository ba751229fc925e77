"""Fixed-base serial revolute chains and their inertial parameters.

Each link carries ten parameters read directly off its spatial inertia
about the joint origin::

    [[t1, t2, t3,   0, -t4,  t5],
     [t2, t6, t7,  t4,   0, -t8],
     [t3, t7, t9, -t5,  t8,   0],
     [ 0, t4, -t5, t10,  0,   0],
     [-t4, 0,  t8,   0, t10,  0],
     [t5, -t8,  0,   0,   0, t10]]

so ``t10`` is the mass, ``(t8, t5, t4)`` is the first moment ``m*c`` and the
remaining six entries are ``I_C + m (c×)(c×)^T``. The stacked parameter
vector of a chain is link-major: ``theta[10*i + j]`` is parameter ``j+1`` of
link ``i``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .spatial import PluckerTransform, skew, spatial_inertia_from_params

FORMAT_VERSION = 1
N_LINK_PARAMS = 10
AXIS_TOL = 1e-9
_EYE3 = np.eye(3)

# (row, col, param index, sign) for every nonzero entry of the tensor
_LAYOUT = [
    (0, 0, 0, 1), (0, 1, 1, 1), (0, 2, 2, 1), (0, 4, 3, -1), (0, 5, 4, 1),
    (1, 0, 1, 1), (1, 1, 5, 1), (1, 2, 6, 1), (1, 3, 3, 1), (1, 5, 7, -1),
    (2, 0, 2, 1), (2, 1, 6, 1), (2, 2, 8, 1), (2, 3, 4, -1), (2, 4, 7, 1),
    (3, 1, 3, 1), (3, 2, 4, -1), (3, 3, 9, 1),
    (4, 0, 3, -1), (4, 2, 7, 1), (4, 4, 9, 1),
    (5, 0, 4, 1), (5, 1, 7, -1), (5, 5, 9, 1),
]


class ModelFormatError(ValueError):
    """Malformed model document. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = []
        if line is not None:
            where.append(f"line {line}")
        if path is not None:
            where.append(path)
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True, eq=False)
class LinkSpec:
    """Known geometry of one revolute joint.

    ``offset`` locates this joint's origin in the parent joint frame and
    ``joint_axis`` is the unit rotation axis in the parent frame.
    """

    name: str
    joint_axis: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        axis = np.asarray(self.joint_axis, dtype=float).reshape(3)
        offset = np.asarray(self.offset, dtype=float).reshape(3)
        if not np.all(np.isfinite(offset)):
            raise ValueError(f"link {self.name!r}: offset must be finite")
        if not np.all(np.isfinite(axis)) or abs(np.linalg.norm(axis) - 1.0) > AXIS_TOL:
            raise ValueError(f"link {self.name!r}: joint axis must be a unit vector, got {axis.tolist()}")
        object.__setattr__(self, "joint_axis", axis)
        object.__setattr__(self, "offset", offset)
        # cached for the dynamics inner loops
        k = skew(axis)
        object.__setattr__(self, "_axis_skew", k)
        object.__setattr__(self, "_axis_skew_sq", k @ k)
        object.__setattr__(self, "_offset_skew", skew(offset))
        object.__setattr__(self, "_subspace", np.concatenate([axis, np.zeros(3)]))
        # motion transform X(q) = X0 + sin(q) X1 + (1 - cos(q)) X2
        rx = skew(offset)
        blocks = []
        for E in (_EYE3, -k, k @ k):
            X = np.zeros((6, 6))
            X[:3, :3] = E
            X[3:, 3:] = E
            X[3:, :3] = -E @ rx
            blocks.append(X)
        object.__setattr__(self, "_transform_blocks", tuple(blocks))

    def motion_matrix(self, q: float) -> np.ndarray:
        """6×6 parent-to-child motion transform at joint angle ``q``."""
        X0, X1, X2 = self._transform_blocks
        return X0 + math.sin(q) * X1 + (1.0 - math.cos(q)) * X2

    def rotation(self, q: float) -> np.ndarray:
        """Orientation of this joint's frame relative to the parent after rotating by ``q``."""
        return _EYE3 + math.sin(q) * self._axis_skew + (1.0 - math.cos(q)) * self._axis_skew_sq


@dataclass(frozen=True, eq=False)
class LinkParams:
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if theta.shape != (N_LINK_PARAMS,):
            raise ValueError(f"link parameters need {N_LINK_PARAMS} entries, got {theta.size}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def mass(self) -> float:
        return float(self.theta[9])

    @property
    def first_moment(self) -> np.ndarray:
        """``m*c`` in the joint frame."""
        return np.array([self.theta[7], self.theta[4], self.theta[3]])


@dataclass(frozen=True, eq=False)
class ChainModel:
    """Serial chain with a fixed base.

    ``base_gravity`` is the gravitational acceleration vector in the base
    frame; when nonzero it must point along ``-vertical_axis``.
    """

    links: tuple
    params: tuple
    base_gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    vertical_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        links = tuple(self.links)
        params = tuple(p if isinstance(p, LinkParams) else LinkParams(p) for p in self.params)
        if not links:
            raise ValueError("a chain needs at least one link")
        if len(params) != len(links):
            raise ValueError(f"{len(links)} links but {len(params)} parameter sets")
        g = np.asarray(self.base_gravity, dtype=float).reshape(3)
        up = np.asarray(self.vertical_axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(up) - 1.0) > AXIS_TOL:
            raise ValueError("vertical axis must be a unit vector")
        g_mag = np.linalg.norm(g)
        if g_mag > 0 and np.max(np.abs(g + g_mag * up)) > 1e-9 * max(1.0, g_mag):
            raise ValueError("gravity must point along -vertical_axis")
        object.__setattr__(self, "links", links)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "base_gravity", g)
        object.__setattr__(self, "vertical_axis", up)
        object.__setattr__(self, "_tensors", tuple(params_to_tensor(p) for p in params))

    @property
    def n(self) -> int:
        return len(self.links)

    @property
    def n_params(self) -> int:
        return N_LINK_PARAMS * len(self.links)

    @property
    def gravity_magnitude(self) -> float:
        return float(np.linalg.norm(self.base_gravity))

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([p.theta for p in self.params])

    @property
    def tensors(self) -> tuple:
        """Spatial inertia of every link about its joint frame."""
        return self._tensors

    def with_theta(self, theta) -> "ChainModel":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        params = tuple(LinkParams(t) for t in theta.reshape(self.n, N_LINK_PARAMS))
        return replace(self, params=params)

    def with_gravity(self, g) -> "ChainModel":
        return replace(self, base_gravity=np.asarray(g, dtype=float))


def params_to_tensor(p) -> np.ndarray:
    theta = p.theta if isinstance(p, LinkParams) else np.asarray(p, dtype=float)
    out = np.zeros((6, 6))
    for row, col, k, sign in _LAYOUT:
        out[row, col] = sign * theta[k]
    return out


def basis_tensors() -> np.ndarray:
    """The ten tensors obtained by setting one parameter to 1, shape (10, 6, 6)."""
    return np.stack([params_to_tensor(row) for row in np.eye(N_LINK_PARAMS)])


def params_from_physical(m: float, c, I_C) -> LinkParams:
    I = spatial_inertia_from_params(m, c, I_C)
    theta = np.array([
        I[0, 0], I[0, 1], I[0, 2], I[1, 3], I[0, 5],
        I[1, 1], I[1, 2], I[2, 4], I[2, 2], I[3, 3],
    ])
    return LinkParams(theta)


def joint_transform(spec: LinkSpec, q: float) -> PluckerTransform:
    """Transform from the parent joint frame to this joint's (rotated) frame."""
    return PluckerTransform(spec.rotation(q).T, spec.offset)


def forward_kinematics(model: ChainModel, q) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Base-frame orientations and origins of every joint frame."""
    R = np.eye(3)
    p = np.zeros(3)
    rotations, origins = [], []
    for spec, qi in zip(model.links, q):
        p = p + R @ spec.offset
        R = R @ spec.rotation(qi)
        rotations.append(R)
        origins.append(p)
    return rotations, origins


# ---------------------------------------------------------------- file format

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$|^[+-]?(inf|nan)$")


def _floats(tokens: Sequence[str], count: int, line: int, path: str) -> list[float]:
    if len(tokens) < count:
        raise ModelFormatError(f"expected {count} numbers, got {len(tokens)}", line, path)
    values = []
    for tok in tokens[:count]:
        if not _NUMBER.match(tok):
            raise ModelFormatError(f"not a number: {tok!r}", line, path)
        values.append(float(tok))
    return values


def _parse_link(tokens: list[str], line: int):
    if len(tokens) < 2:
        raise ModelFormatError("link needs a name", line)
    name = tokens[1]
    path = f"links[{name}]"
    rest = tokens[2:]
    axis = offset = params = None
    while rest:
        key = rest[0]
        if key == "axis":
            axis = _floats(rest[1:], 3, line, f"{path}.axis")
            rest = rest[4:]
        elif key == "offset":
            offset = _floats(rest[1:], 3, line, f"{path}.offset")
            rest = rest[4:]
        elif key == "theta":
            params = LinkParams(_floats(rest[1:], 10, line, f"{path}.theta"))
            rest = rest[11:]
        elif key == "physical":
            if len(rest) < 14 or rest[1] != "m" or rest[3] != "com" or rest[7] != "inertia":
                raise ModelFormatError("expected 'physical m <m> com <x y z> inertia <xx yy zz xy xz yz>'", line, path)
            m = _floats(rest[2:3], 1, line, f"{path}.m")[0]
            com = _floats(rest[4:7], 3, line, f"{path}.com")
            xx, yy, zz, xy, xz, yz = _floats(rest[8:14], 6, line, f"{path}.inertia")
            I_C = np.array([[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]])
            try:
                params = params_from_physical(m, com, I_C)
            except ValueError as exc:
                raise ModelFormatError(str(exc), line, path) from None
            rest = rest[14:]
        else:
            raise ModelFormatError(f"unknown key {key!r}", line, path)
    for label, value in (("axis", axis), ("offset", offset), ("theta/physical", params)):
        if value is None:
            raise ModelFormatError(f"missing {label}", line, path)
    axis = np.asarray(axis)
    if abs(np.linalg.norm(axis) - 1.0) > AXIS_TOL:
        raise ModelFormatError(f"joint axis {axis.tolist()} is not a unit vector", line, f"{path}.axis")
    return LinkSpec(name, axis, np.asarray(offset)), params


def parse_model(text: str) -> ChainModel:
    """Parse the line-oriented model format.

    ::

        format_version 1
        gravity 0 -9.81 0
        vertical 0 1 0
        link upper axis 0 0 1 offset 0 0 0 physical m 1 com 0.2 0 0 inertia 0 0 0.01 0 0 0
        link lower axis 0 0 1 offset 0.4 0 0 theta <10 numbers>

    ``#`` starts a comment. ``gravity`` defaults to ``0 0 -9.81`` and
    ``vertical`` to ``0 0 1``.
    """
    version = None
    gravity = vertical = None
    links, params, names = [], [], set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        key = tokens[0]
        if version is None and key != "format_version":
            raise ModelFormatError("document must start with 'format_version'", lineno)
        if key == "format_version":
            if version is not None:
                raise ModelFormatError("duplicate format_version", lineno)
            if len(tokens) != 2 or tokens[1] != str(FORMAT_VERSION):
                raise ModelFormatError(f"unsupported format_version {' '.join(tokens[1:])!r}", lineno)
            version = FORMAT_VERSION
        elif key == "gravity":
            if len(tokens) != 4:
                raise ModelFormatError("gravity takes 3 numbers", lineno, "gravity")
            gravity = _floats(tokens[1:], 3, lineno, "gravity")
        elif key == "vertical":
            if len(tokens) != 4:
                raise ModelFormatError("vertical takes 3 numbers", lineno, "vertical")
            vertical = _floats(tokens[1:], 3, lineno, "vertical")
        elif key == "link":
            spec, p = _parse_link(tokens, lineno)
            if spec.name in names:
                raise ModelFormatError(f"duplicate link name {spec.name!r}", lineno, f"links[{spec.name}]")
            names.add(spec.name)
            links.append(spec)
            params.append(p)
        else:
            raise ModelFormatError(f"unknown key {key!r}", lineno)
    if version is None:
        raise ModelFormatError("empty document")
    if not links:
        raise ModelFormatError("no links defined", path="links")
    kwargs = {}
    if gravity is not None:
        kwargs["base_gravity"] = np.array(gravity)
    if vertical is not None:
        if abs(np.linalg.norm(vertical) - 1.0) > AXIS_TOL:
            raise ModelFormatError("vertical axis must be a unit vector", path="vertical")
        kwargs["vertical_axis"] = np.array(vertical)
    try:
        return ChainModel(links=tuple(links), params=tuple(params), **kwargs)
    except ValueError as exc:
        raise ModelFormatError(str(exc), path="model") from None


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def serialize_model(model: ChainModel) -> str:
    lines = [
        f"format_version {FORMAT_VERSION}",
        "gravity " + " ".join(map(_fmt, model.base_gravity)),
        "vertical " + " ".join(map(_fmt, model.vertical_axis)),
    ]
    for spec, p in zip(model.links, model.params):
        lines.append(
            f"link {spec.name} axis {' '.join(map(_fmt, spec.joint_axis))} "
            f"offset {' '.join(map(_fmt, spec.offset))} theta {' '.join(map(_fmt, p.theta))}"
        )
    return "\n".join(lines) + "\n"


def load_model(path) -> ChainModel:
    with open(path) as fh:
        return parse_model(fh.read())


def planar_chain(lengths, masses, coms=None, inertias=None, gravity=9.81) -> ChainModel:
    """Planar chain in the x-y plane with z joint axes and gravity along -y.

    Links extend along their local x axis; ``coms`` are distances along it and
    ``inertias`` are the z moments of inertia about each centre of mass.
    """
    n = len(masses)
    coms = [0.5 * l for l in lengths] if coms is None else coms
    inertias = [0.0] * n if inertias is None else inertias
    links, params = [], []
    for i in range(n):
        offset = [0.0, 0.0, 0.0] if i == 0 else [lengths[i - 1], 0.0, 0.0]
        links.append(LinkSpec(f"link{i + 1}", [0.0, 0.0, 1.0], offset))
        I_C = np.diag([0.0, 0.0, float(inertias[i])])
        params.append(params_from_physical(float(masses[i]), [coms[i], 0.0, 0.0], I_C))
    return ChainModel(
        links=tuple(links),
        params=tuple(params),
        base_gravity=np.array([0.0, -gravity, 0.0]),
        vertical_axis=np.array([0.0, 1.0, 0.0]),
    )


def random_physical_params(rng: np.random.Generator, max_com: float = 0.2) -> LinkParams:
    """Physically consistent parameters: principal moments obey the triangle inequality."""
    m = rng.uniform(0.5, 3.0)
    c = rng.uniform(-max_com, max_com, 3)
    a, b = rng.uniform(0.005, 0.05, 2)
    moments = np.array([a, b, rng.uniform(abs(a - b), a + b)])
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    I_C = Q @ np.diag(moments) @ Q.T
    return params_from_physical(m, c, 0.5 * (I_C + I_C.T))


def random_chain(rng: np.random.Generator, n: int, gravity: float = 9.81) -> ChainModel:
    links = []
    for i in range(n):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        offset = np.zeros(3) if i == 0 else rng.uniform(-0.4, 0.4, 3)
        links.append(LinkSpec(f"j{i + 1}", axis, offset))
    params = [random_physical_params(rng) for _ in range(n)]
    return ChainModel(
        links=tuple(links),
        params=tuple(params),
        base_gravity=np.array([0.0, 0.0, -gravity]),
        vertical_axis=np.array([0.0, 0.0, 1.0]),
    )


def is_physically_consistent(p: LinkParams, tol: float = 1e-12) -> bool:
    """True when the tensor is PSD with a positive mass."""
    I = params_to_tensor(p)
    return p.mass > 0 and float(np.min(np.linalg.eigvalsh(I))) >= -tol


__all__ = [
    "ChainModel", "LinkParams", "LinkSpec", "ModelFormatError", "N_LINK_PARAMS",
    "basis_tensors", "forward_kinematics", "is_physically_consistent", "joint_transform",
    "load_model", "params_from_physical", "params_to_tensor", "parse_model", "planar_chain",
    "random_chain", "random_physical_params", "serialize_model",
]
