import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svaid.dynamics import (
    JointState,
    SingularMassMatrixError,
    body_jacobian,
    body_jacobians,
    coriolis_matrix,
    dynamics_terms,
    forward_dynamics,
    gravity_vector,
    inverse_dynamics,
    joint_matrices,
    kinetic_energy,
    link_kinematics,
    mass_matrix,
    potential_energy,
    total_energy,
)
from svaid.model import ChainModel, LinkSpec, forward_kinematics, params_from_physical, planar_chain, random_chain
from svaid.oracles import double_pendulum_from_model
from svaid.spatial import kinetic_energy as body_energy

seeds = st.integers(0, 2 ** 32 - 1)


def _state(rng, n, scale=np.pi):
    return rng.uniform(-scale, scale, (3, n))


def test_joint_state_validation():
    s = JointState([1, 2], [3, 4], [5, 6])
    assert s.n == 2
    with pytest.raises(ValueError):
        JointState([1, 2], [3], [5, 6])


def test_wrong_length_rejected(dp_model):
    with pytest.raises(ValueError):
        inverse_dynamics(dp_model, [0.0], [0.0], [0.0])


def test_one_link_jacobian_is_axis():
    model = ChainModel((LinkSpec("a", [0.6, 0.8, 0], [0.1, 0.2, 0.3]),), (np.ones(10),))
    J = body_jacobian(model, [0.7], 0)
    # the axis is invariant under rotation about itself
    assert np.allclose(J[:, 0], [0.6, 0.8, 0, 0, 0, 0])
    with pytest.raises(IndexError):
        body_jacobian(model, [0.7], 1)


def test_planar_2r_jacobian_at_zero():
    l1 = 0.7
    model = planar_chain([l1, 0.4], [1.0, 1.0])
    J2 = body_jacobian(model, [0.0, 0.0], 1)
    # link-2 frame coincides in orientation with the base; its origin sits at (l1, 0, 0)
    expected = np.zeros((6, 2))
    expected[2] = 1.0
    expected[4, 0] = l1  # v = w x p for the first joint
    assert np.allclose(J2, expected)
    J1 = body_jacobian(model, [0.0, 0.0], 0)
    assert np.allclose(J1[:, 1], 0)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_jacobian_matches_finite_difference_of_pose(seed):
    rng = np.random.default_rng(seed)
    model = random_chain(rng, 4)
    q, dq = rng.uniform(-2, 2, (2, 4))
    h = 1e-6
    Rp, pp = forward_kinematics(model, q + h * dq)
    Rm, pm = forward_kinematics(model, q - h * dq)
    R, _ = forward_kinematics(model, q)
    for i, J in enumerate(body_jacobians(model, q)):
        v = J @ dq
        R_dot = (Rp[i] - Rm[i]) / (2 * h)
        w_skew = R[i].T @ R_dot
        w = np.array([w_skew[2, 1], w_skew[0, 2], w_skew[1, 0]])
        p_dot = (pp[i] - pm[i]) / (2 * h)
        assert np.allclose(v[:3], w, atol=1e-6)
        assert np.allclose(v[3:], R[i].T @ p_dot, atol=1e-6)


def test_zero_params_give_zero_mass_matrix(rng):
    model = random_chain(rng, 3)
    assert np.array_equal(mass_matrix(model, rng.normal(size=3), np.zeros(30)), np.zeros((3, 3)))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 6))
def test_kinetic_energy_matches_link_sum(seed, n):
    rng = np.random.default_rng(seed)
    model = random_chain(rng, n)
    q, dq, _ = _state(rng, n)
    _, _, vs, _ = link_kinematics(model, q, dq, np.zeros(n))
    direct = sum(body_energy(I, v) for I, v in zip(model.tensors, vs))
    assert np.isclose(kinetic_energy(model, q, dq), direct, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 6))
def test_mass_matrix_symmetric_psd(seed, n):
    rng = np.random.default_rng(seed)
    model = random_chain(rng, n)
    q = rng.uniform(-np.pi, np.pi, n)
    D = mass_matrix(model, q, symmetrize=False)
    assert np.max(np.abs(D - D.T)) < 1e-9
    assert np.linalg.eigvalsh(D).min() >= -1e-9


def test_coriolis_vanishes_at_rest(dp_model):
    assert np.allclose(coriolis_matrix(dp_model, [0.3, 0.2], [0, 0]) @ np.zeros(2), 0)


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 5))
def test_formulation_identity(seed, n):
    rng = np.random.default_rng(seed)
    model = random_chain(rng, n)
    q, dq, _ = _state(rng, n)
    lhs = coriolis_matrix(model, q, dq) @ dq + gravity_vector(model, q)
    assert np.allclose(lhs, inverse_dynamics(model, q, dq, np.zeros(n)), atol=1e-8, rtol=0)


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(2, 5))
def test_skew_symmetry(seed, n):
    rng = np.random.default_rng(seed)
    model = random_chain(rng, n)
    q, dq, _ = _state(rng, n)
    h = 1e-6
    D_dot = (mass_matrix(model, q + h * dq) - mass_matrix(model, q - h * dq)) / (2 * h)
    N = D_dot - 2 * coriolis_matrix(model, q, dq)
    assert np.max(np.abs(N + N.T)) < 1e-5


def test_single_pendulum_gravity():
    m, l, g = 1.3, 0.6, 9.81
    # hanging straight down along -y at q = 0
    p = params_from_physical(m, [0, -l, 0], np.zeros((3, 3)))
    model = ChainModel((LinkSpec("a", [0, 0, 1], [0, 0, 0]),), (p,), [0, -g, 0], [0, 1, 0])
    for q in np.linspace(-3, 3, 13):
        assert np.isclose(gravity_vector(model, [q])[0], m * g * l * np.sin(q))


def test_gravity_along_plane_normal_gives_zero(rng):
    model = planar_chain([0.5, 0.4, 0.3], [1.0, 2.0, 1.5]).with_gravity([0, 0, 0])
    model = ChainModel(model.links, model.params, [0, 0, -9.81], [0, 0, 1])
    for _ in range(10):
        assert np.allclose(gravity_vector(model, rng.uniform(-3, 3, 3)), 0, atol=1e-12)


def test_zero_gravity(rng):
    model = random_chain(rng, 3, gravity=0.0)
    assert np.array_equal(gravity_vector(model, rng.normal(size=3)), np.zeros(3))


def test_static_inverse_dynamics_is_gravity(rng):
    model = random_chain(rng, 4)
    q = rng.normal(size=4)
    assert np.allclose(inverse_dynamics(model, q, np.zeros(4), np.zeros(4)), gravity_vector(model, q), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 5))
def test_inverse_dynamics_linear_in_theta(seed, n):
    rng = np.random.default_rng(seed)
    model = random_chain(rng, n)
    q, dq, ddq = _state(rng, n)
    t1, t2 = rng.normal(size=(2, 10 * n))
    both = inverse_dynamics(model, q, dq, ddq, t1 + t2)
    split = inverse_dynamics(model, q, dq, ddq, t1) + inverse_dynamics(model, q, dq, ddq, t2)
    assert np.max(np.abs(both - split)) < 1e-10


def test_inverse_dynamics_equals_terms(rng):
    model = random_chain(rng, 4)
    q, dq, ddq = _state(rng, 4)
    terms = dynamics_terms(model, q, dq)
    assert np.allclose(terms.D @ ddq + terms.C @ dq + terms.G, inverse_dynamics(model, q, dq, ddq), atol=1e-8)


def test_double_pendulum_against_oracle(dp_model, rng):
    oracle = double_pendulum_from_model(dp_model)
    for _ in range(50):
        q, dq, ddq = _state(rng, 2)
        assert np.allclose(mass_matrix(dp_model, q), oracle.mass_matrix(q), atol=1e-6)
        assert np.allclose(coriolis_matrix(dp_model, q, dq) @ dq, oracle.coriolis_matrix(q, dq) @ dq, atol=1e-6)
        assert np.allclose(gravity_vector(dp_model, q), oracle.gravity_vector(q), atol=1e-6)
        assert np.allclose(inverse_dynamics(dp_model, q, dq, ddq), oracle.inverse_dynamics(q, dq, ddq), atol=1e-6)
        assert np.isclose(total_energy(dp_model, q, dq), oracle.energy(q, dq), atol=1e-9)


def test_point_mass_double_pendulum_mass_matrix(rng):
    model = planar_chain([0.7, 0.5], [1.2, 0.8], coms=[0.7, 0.5])
    m1, m2, l1, l2 = 1.2, 0.8, 0.7, 0.5
    for _ in range(10):
        q = rng.uniform(-3, 3, 2)
        c2 = np.cos(q[1])
        D = np.array([[m1 * l1 ** 2 + m2 * (l1 ** 2 + l2 ** 2 + 2 * l1 * l2 * c2), m2 * (l2 ** 2 + l1 * l2 * c2)],
                      [m2 * (l2 ** 2 + l1 * l2 * c2), m2 * l2 ** 2]])
        assert np.allclose(mass_matrix(model, q), D)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 5))
def test_forward_inverse_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    model = random_chain(rng, n)
    q, dq, _ = _state(rng, n)
    u = rng.normal(size=n) * 5
    ddq = forward_dynamics(model, q, dq, u)
    assert np.allclose(inverse_dynamics(model, q, dq, ddq), u, atol=1e-8, rtol=0)


def test_gravity_torque_holds_still(rng):
    model = random_chain(rng, 3)
    q = rng.normal(size=3)
    assert np.allclose(forward_dynamics(model, q, np.zeros(3), gravity_vector(model, q)), 0, atol=1e-9)


def test_zero_params_singular(rng):
    model = random_chain(rng, 2)
    with pytest.raises(SingularMassMatrixError) as info:
        forward_dynamics(model, [0, 0], [0, 0], [0, 0], theta=np.zeros(20))
    assert "condition" in str(info.value)


def test_energy_examples(rng):
    model = random_chain(rng, 3)
    q, dq = rng.normal(size=(2, 3))
    assert np.isclose(total_energy(model, q, np.zeros(3)), potential_energy(model, q))
    assert potential_energy(model.with_gravity([0, 0, 0]), q) == 0.0
    assert np.isclose(total_energy(model, q, dq, 2 * model.theta), 2 * total_energy(model, q, dq))


def test_joint_matrices_shape(dp_model):
    X = joint_matrices(dp_model, [0.1, 0.2])
    assert len(X) == 2 and X[0].shape == (6, 6)
