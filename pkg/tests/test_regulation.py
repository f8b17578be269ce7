import numpy as np
import pytest

from modcoord.errors import AssumptionViolated
from modcoord.regulation import (RegulationParams, control_jacobian, control_target,
                                 derivative_bounds, queue_error_rate)


def params(q_bar=(0.0, 0.0, 0.0)):
    return RegulationParams(c_min=2.0, c_max=3.0, beta_max=6.0, n_players=2, margin=0.5, q_bar=q_bar)


def test_target_queue_gives_arrival_rate():
    p = params((1.0, 2.0, 3.0))
    c = np.array([2.2, 2.5, 2.9])
    np.testing.assert_allclose(control_target(p.q_bar, c, p), c)


def test_limits():
    p = params()
    c = np.full(3, 2.5)
    np.testing.assert_allclose(control_target(np.full(3, 200.0), c, p), c - 3.0 + 6.0 - 1.0)
    np.testing.assert_allclose(control_target(np.full(3, -200.0), c, p), c - 1.0)


def test_slope_at_target():
    # the logistic term increases with the queue, so the slope is +2/3 here
    dU, _ = control_jacobian(np.zeros(3), np.full(3, 2.5), params())
    np.testing.assert_allclose(np.diag(dU[:, :3]), 2.0 / 3.0)
    np.testing.assert_array_equal(dU[:, 3:], np.eye(3))


def test_jacobian_matches_finite_differences(rng):
    p = params((1.0, 0.5, 2.0))
    for _ in range(20):
        Q = rng.uniform(0, 6, 3)
        c = rng.uniform(2, 3, 3)
        dU, d2 = control_jacobian(Q, c, p)
        h = 1e-6
        fd = np.empty((3, 6))
        for k in range(6):
            e = np.zeros(6)
            e[k] = h
            xp, xm = np.concatenate([Q, c]) + e, np.concatenate([Q, c]) - e
            fd[:, k] = (control_target(xp[:3], xp[3:], p) - control_target(xm[:3], xm[3:], p)) / (2 * h)
        assert np.linalg.norm(fd - dU) / np.linalg.norm(dU) <= 1e-6
        g1 = np.diag(control_jacobian(Q + h, c, p)[0][:, :3])
        g0 = np.diag(control_jacobian(Q - h, c, p)[0][:, :3])
        np.testing.assert_allclose((g1 - g0) / (2 * h), d2, rtol=1e-5, atol=1e-8)


def test_first_derivative_bound_value():
    d1, d2 = derivative_bounds(params())
    assert d1 == pytest.approx(5.0)
    assert d2 > 0 and np.isfinite(d2)


def test_first_bound_scales_with_station_count():
    d3, _ = derivative_bounds(params())
    d6, _ = derivative_bounds(RegulationParams(2.0, 3.0, 6.0, 2, 0.5, np.zeros(6)))
    assert d6 == pytest.approx(2 * d3)


def test_sampled_derivatives_respect_bounds(rng):
    p = params((0.5, 1.0, 0.0))
    d1, d2 = derivative_bounds(p)
    Q = rng.uniform(0, 20, (100_000, 3))
    w = p.ratio * np.exp(-(Q - p.q_bar))
    slope = p.lift * w / (1 + w) ** 2
    curv = np.abs(p.lift * w * (w - 1) / (1 + w) ** 3)
    # spectral norm of [diag(slope), I] is sqrt(1 + max slope^2)
    assert np.sqrt(1 + slope.max(axis=1) ** 2).max() <= d1
    assert curv.max() <= d2


def test_range_and_sign_condition(rng):
    p = params((1.0, 2.0, 0.5))
    Q = rng.uniform(0, 30, (5000, 3))
    c = rng.uniform(2, 3, (5000, 3))
    U = np.array([control_target(q, cc, p) for q, cc in zip(Q, c)])
    assert U.min() >= 1.0 and U.max() <= 5.0
    gap = Q - p.q_bar
    rate = np.array([queue_error_rate(q, p) for q in Q])
    mask = np.abs(gap) > 1e-9
    assert np.all(gap[mask] * rate[mask] < 0)


def test_capacity_ordering_is_enforced():
    with pytest.raises(AssumptionViolated):
        RegulationParams(c_min=2.0, c_max=5.5, beta_max=6.0, n_players=2, margin=0.5, q_bar=[0.0])
    with pytest.raises(AssumptionViolated):
        RegulationParams(c_min=1.5, c_max=3.0, beta_max=6.0, n_players=2, margin=0.5, q_bar=[0.0])
