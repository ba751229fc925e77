import numpy as np
import pytest

from svaid.dynamics import inverse_dynamics
from svaid.identify import (
    AccelerationFilter,
    DegenerateSystemError,
    GateConfig,
    OnlineEstimator,
    Sample,
    SampleLogError,
    StackedSystem,
    estimate_acceleration,
    fit,
    fit_with_prior,
    online_update,
    per_joint_r_squared,
    pinv_solve,
    predict_torque,
    r_squared,
    read_samples_csv,
    stack,
    write_samples_csv,
)
from svaid.model import random_chain
from svaid.regressor import compute_regressor


def _samples(model, rng, s, theta=None, t0=0.0, dt=0.1):
    out = []
    for k in range(s):
        q, dq, ddq = rng.uniform(-2, 2, (3, model.n))
        u = inverse_dynamics(model, q, dq, ddq, theta)
        out.append(Sample.from_arrays(t0 + k * dt, q, dq, ddq, u))
    return out


def test_sample_validation():
    with pytest.raises(ValueError):
        Sample.from_arrays(0.0, [0, 0], [0, 0], [0, 0], [1.0])
    with pytest.raises(ValueError):
        Sample.from_arrays(0.0, [np.nan], [0], [0], [0])


def test_stack_order_and_single_sample(dp_model, rng):
    samples = _samples(dp_model, rng, 3)
    sys = stack(dp_model, samples)
    assert sys.s == 3 and sys.Y_C.shape == (6, 20)
    for k, s in enumerate(samples):
        assert np.array_equal(sys.Y_C[2 * k:2 * k + 2], compute_regressor(dp_model, s.state.q, s.state.dq, s.state.ddq))
        assert np.array_equal(sys.U_C[2 * k:2 * k + 2], s.u)
    with pytest.raises(ValueError):
        stack(dp_model, [])
    with pytest.raises(ValueError):
        StackedSystem(np.zeros((3, 20)), np.zeros(3), 2)


def test_noiseless_stack_is_consistent(arm_model, rng):
    sys = stack(arm_model, _samples(arm_model, rng, 20))
    assert np.allclose(sys.Y_C @ arm_model.theta, sys.U_C, atol=1e-10)


def test_noiseless_fit_reproduces_torque(dp_model, rng):
    sys = stack(dp_model, _samples(dp_model, rng, 100))
    res = fit(sys)
    assert res.r_squared >= 1 - 1e-9
    assert np.allclose(sys.Y_C @ res.theta_hat, sys.U_C, atol=1e-8)
    # only a 6-dimensional subspace is identifiable, so the answer differs from the plant
    assert not np.allclose(res.theta_hat, dp_model.theta)
    assert res.theta_hat.flags.writeable is False
    assert np.all(res.per_joint_r_squared >= 1 - 1e-9)


def test_zero_torque_fit():
    sys = StackedSystem(np.array([[1.0, 0.0], [0.0, 2.0]]), np.zeros(2), 2)
    res = fit(sys)
    assert np.array_equal(res.theta_hat, np.zeros(2))
    assert res.r_squared == 1.0


def test_degenerate_fit_raises():
    with pytest.raises(DegenerateSystemError):
        fit(StackedSystem(np.zeros((4, 3)), np.ones(4), 2))


def test_rank_one_minimum_norm():
    Y = np.outer([1.0, 2.0, 3.0, 4.0], [1.0, 1.0])
    U = Y @ np.array([3.0, -1.0])
    res = fit(StackedSystem(Y, U, 2))
    assert np.allclose(res.theta_hat, [1.0, 1.0])
    assert np.isclose(res.r_squared, 1.0)


def test_pinv_matches_lstsq(rng):
    A = rng.normal(size=(30, 8)) @ np.diag([1, 1, 1, 1, 1, 1, 0, 0]) @ rng.normal(size=(8, 8))
    b = rng.normal(size=30)
    x, s = pinv_solve(A, b)
    ref = np.linalg.lstsq(A, b, rcond=1e-10)[0]
    assert np.allclose(x, ref, atol=1e-9)
    assert s.shape == (8,)


def test_fit_is_minimiser(arm_model, rng):
    samples = _samples(arm_model, rng, 40)
    sys = stack(arm_model, samples)
    noisy = StackedSystem(sys.Y_C, sys.U_C + rng.normal(scale=0.5, size=sys.U_C.shape), 4)
    res = fit(noisy)
    base = np.linalg.norm(noisy.U_C - noisy.Y_C @ res.theta_hat)
    for _ in range(100):
        d = rng.normal(scale=1e-3, size=40)
        assert np.linalg.norm(noisy.U_C - noisy.Y_C @ (res.theta_hat + d)) >= base - 1e-9


def test_r_squared_properties(rng):
    u = rng.normal(size=50)
    assert r_squared(u, u) == 1.0
    assert r_squared(u, u + 0.1) < 1.0
    assert r_squared(np.zeros(3), np.ones(3)) == -np.inf
    pj = per_joint_r_squared(np.arange(6.0), np.arange(6.0), 2)
    assert np.array_equal(pj, [1.0, 1.0])


def test_torque_equivalence_of_minimisers(dp_model, rng):
    sys = stack(dp_model, _samples(dp_model, rng, 60))
    a = fit(sys)
    b = fit_with_prior(sys, rng.normal(size=20), 0.999)
    assert np.allclose(sys.Y_C @ a.theta_hat, sys.Y_C @ b.theta_hat, atol=1e-8)
    assert not np.allclose(a.theta_hat, b.theta_hat)


def test_prior_fit_examples(dp_model, rng):
    theta0 = rng.normal(size=20)
    empty = StackedSystem(np.zeros((4, 20)), np.zeros(4), 2)
    assert np.allclose(fit_with_prior(empty, theta0, 0.5).theta_hat, theta0)
    sys = stack(dp_model, _samples(dp_model, rng, 50))
    for alpha in (0.1, 0.5, 0.9):
        res = fit_with_prior(sys, dp_model.theta, alpha)
        assert res.residual_norm < 1e-9
    near = fit_with_prior(sys, theta0, 1 - 1e-7)
    assert np.max(np.abs(sys.Y_C @ near.theta_hat - sys.Y_C @ fit(sys).theta_hat)) < 1e-6
    far = fit_with_prior(sys, theta0, 1e-9)
    assert np.allclose(far.theta_hat, theta0, atol=1e-6)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            fit_with_prior(sys, theta0, bad)
    with pytest.raises(ValueError):
        fit_with_prior(sys, theta0[:5], 0.5)


def test_predict_torque(dp_model, rng):
    samples = _samples(dp_model, rng, 20)
    res = fit(stack(dp_model, samples))
    U = np.concatenate([s.u for s in samples])
    assert np.allclose(predict_torque(dp_model, res.theta_hat, samples), U, atol=1e-8)
    assert np.array_equal(predict_torque(dp_model, np.zeros(20), samples), np.zeros(40))
    static = Sample.from_arrays(0, [0.3, 0.1], [0, 0], [0, 0], [0, 0])
    from svaid.dynamics import gravity_vector

    assert np.allclose(predict_torque(dp_model, dp_model.theta, [static]), gravity_vector(dp_model, [0.3, 0.1]))


def test_acceleration_filter():
    f = AccelerationFilter(0.2)
    for _ in range(20):
        out = estimate_acceleration(f, np.array([1.0, -2.0]), 0.01)
    assert np.allclose(out, 0)
    lam, a, dt = 0.2, 3.0, 1e-3
    f = AccelerationFilter(lam)
    for k in range(int(5 / lam) + 1):
        out = f.update(np.array([a * k * dt]), dt)
    assert abs(out[0] - a) < 0.01 * a
    raw = AccelerationFilter(1.0)
    raw.update(np.array([0.0]), 0.1)
    assert np.allclose(raw.update(np.array([0.5]), 0.1), [5.0])
    with pytest.raises(ValueError):
        f.update(np.array([0.0]), 0.0)
    with pytest.raises(ValueError):
        AccelerationFilter(0.0)


def test_online_estimator_validity_requires_full_buffer(arm_model, rng):
    est = OnlineEstimator(arm_model, arm_model.theta * 1.3, capacity=10, update_period=0.0)
    for s in _samples(arm_model, rng, 9):
        est.update(s)
        assert not est.snapshot.model_valid
    assert est.snapshot.fit is None
    online_update(est, _samples(arm_model, rng, 1, t0=1.0)[0])
    assert est.snapshot.buffer_full and est.snapshot.model_valid
    assert est.snapshot.r_squared >= 0.95


def test_ring_buffer_evicts_and_grow_mode_keeps(arm_model, rng):
    samples = _samples(arm_model, rng, 15)
    ring = OnlineEstimator(arm_model, arm_model.theta, capacity=5)
    grow = OnlineEstimator(arm_model, arm_model.theta, capacity=5, grow=True)
    for s in samples:
        ring.ingest(s)
        grow.ingest(s)
    assert len(ring) == 5 and len(grow) == 15
    assert ring.buffer_full and grow.buffer_full


def test_decimated_refits_and_monotone_snapshots(arm_model, rng):
    est = OnlineEstimator(arm_model, arm_model.theta, capacity=3, update_period=1.0)
    for s in _samples(arm_model, rng, 40, dt=0.1):
        est.update(s)
    times = [s.t for s in est.history]
    assert np.allclose(np.diff(times), 1.0)
    est.refit(0.0)  # an older timestamp never replaces a newer snapshot
    assert est.snapshot.t == times[-1]


def test_noiseless_snapshots_converge(arm_model, rng):
    est = OnlineEstimator(arm_model, np.zeros(40), capacity=50, alpha=0.999, update_period=0.0)
    for s in _samples(arm_model, rng, 80):
        est.update(s)
    assert est.snapshot.r_squared >= 1 - 1e-6


def test_estimator_argument_validation(arm_model):
    with pytest.raises(ValueError):
        OnlineEstimator(arm_model, np.zeros(40), capacity=0)
    with pytest.raises(ValueError):
        OnlineEstimator(arm_model, np.zeros(40), alpha=1.0)
    with pytest.raises(ValueError):
        OnlineEstimator(arm_model, np.zeros(39))


def test_gated_ingestion_rejects_uninformative_samples(arm_model, rng):
    est = OnlineEstimator(arm_model, arm_model.theta, capacity=20, gate=GateConfig(error_threshold=1e-3))
    for s in _samples(arm_model, rng, 20):
        est.ingest(s)
    est.refit(2.0)
    repeat = Sample.from_arrays(3.0, np.zeros(4), np.zeros(4), np.zeros(4),
                                inverse_dynamics(arm_model, np.zeros(4), np.zeros(4), np.zeros(4)))
    kept = [est.ingest(repeat) for _ in range(5)]
    assert not all(kept) and est.rejected > 0
    wrong = Sample.from_arrays(4.0, repeat.state.q, repeat.state.dq, repeat.state.ddq, repeat.u + 10)
    assert est.ingest(wrong)


def test_constant_excitation_keeps_flag_on_r2_only(arm_model):
    est = OnlineEstimator(arm_model, arm_model.theta, capacity=10, update_period=0.0)
    q = np.full(4, 0.2)
    u = inverse_dynamics(arm_model, q, np.zeros(4), np.zeros(4))
    for k in range(10):
        est.update(Sample.from_arrays(k * 0.1, q, np.zeros(4), np.zeros(4), u))
    assert est.snapshot.model_valid
    assert np.sum(est.snapshot.fit.singular_values > 1e-8 * est.snapshot.fit.singular_values[0]) < 10


def test_sample_csv_round_trip(tmp_path, dp_model, rng):
    samples = _samples(dp_model, rng, 5)
    path = tmp_path / "s.csv"
    write_samples_csv(path, samples, 2)
    lines = path.read_text().splitlines()
    assert lines[0] == "# format_version 1"
    assert lines[1] == "t,q1,q2,dq1,dq2,ddq1,ddq2,u1,u2"
    back = read_samples_csv(path, 2)
    for a, b in zip(samples, back):
        assert a.t == b.t and np.array_equal(a.u, b.u) and np.array_equal(a.state.ddq, b.state.ddq)


@pytest.mark.parametrize("content, fragment", [
    ("", "no header"),
    ("t,q1,dq1\n", "columns"),
    ("t,a1,b1,c1,d1\n", "header"),
    ("t,q1,dq1,ddq1,u1\n0,1,2,3\n", "fields"),
    ("t,q1,dq1,ddq1,u1\n0,1,2,x,4\n", "row"),
])
def test_sample_csv_errors(tmp_path, content, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(SampleLogError) as info:
        read_samples_csv(path)
    assert fragment in str(info.value)


def test_sample_csv_joint_mismatch(tmp_path, dp_model, rng):
    path = tmp_path / "s.csv"
    write_samples_csv(path, _samples(dp_model, rng, 2), 2)
    with pytest.raises(SampleLogError):
        read_samples_csv(path, 3)
