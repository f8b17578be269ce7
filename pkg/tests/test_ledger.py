import numpy as np
import pytest

from modcoord.errors import DeltaMaxUndefined
from modcoord.harness.ledger import constants_ledger, regulation_bounds, theta, theta_minimizer


def test_theta_example():
    assert theta(0.5, 1.0, 1.0, 0.0, 1.0, 0.0) == pytest.approx(np.sqrt(0.75))


def test_theta_minimizer_is_minimum():
    g, th = theta_minimizer(0.3, 2.0, 0.1, 1.0, 0.2)
    grid = np.linspace(0, 1, 10001)
    assert th <= min(theta(x, 0.3, 2.0, 0.1, 1.0, 0.2) for x in grid) + 1e-12
    assert theta(g, 0.3, 2.0, 0.1, 1.0, 0.2) == pytest.approx(th)


def test_regulation_bound_examples():
    # 2 varsigma / slack = 0.1
    _, d_max = regulation_bounds(0.05, 1.0, 1.0, 0.0)
    assert d_max == pytest.approx(0.1054, abs=1e-4)
    assert regulation_bounds(0.0, 1.0, 1.0, 2.0) == (0.0, 0.0)
    with pytest.raises(DeltaMaxUndefined):
        regulation_bounds(0.6, 1.0, 1.0, 0.0)


def test_default_ledger(scenario):
    led = constants_ledger(scenario, sample_count=2000)
    d = led.to_dict()
    assert all(np.isfinite(v) for v in d.values())
    assert led.D_U1 > 0 and led.varsigma_G > 0
    assert led.L_Omega_empirical <= led.L_Omega and led.L_J_empirical <= led.L_J
    assert led.theta_min <= led.theta
    assert led.regulation_radius == max(led.Delta_min, led.Delta_max)
    assert led.lemma4_product == pytest.approx(scenario.config.epsilon)
