import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morrey_nls import (AssumptionViolation, ConfigurationError, GridField, MorreySpec, default_state_space,
                        hat_lebesgue_norm, hat_morrey_norm, morrey_norm, size_function)
from morrey_nls.experiments import _random_blocks, random_smooth_field
from morrey_nls.spaces import (almost_periodicity_residual, alpha_interval, compactness_modulus, conjugate,
                               duality_pairing_check, dyadic_average_projection, modulate, r_interval, star)


def test_exponent_helpers():
    assert conjugate(3.0) == 1.5 and star(4.5) == pytest.approx(18 / 5)
    lo, hi = alpha_interval(1)
    assert lo == pytest.approx(float(Fraction(2) / Fraction(3, 2))) and hi == 2
    assert r_interval(1, 1.5) == pytest.approx((3.0, 3.6))
    assert default_state_space(1, 1.5).r == pytest.approx(3.3)


def test_spec_validation():
    with pytest.raises(AssumptionViolation):
        MorreySpec(2.0, 1.5, 2.0)                      # Morrey mode needs q < p < r
    with pytest.raises(ConfigurationError):
        MorreySpec(1.0, 2.0, 3.0, hat=True)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 100), st.floats(-math.pi, math.pi), st.integers(0, 2**16))
def test_hat_norm_is_homogeneous(c, angle, seed):
    spec = default_state_space(1, 1.5)
    f = random_smooth_field(np.random.default_rng(seed), 1, 128, 8 * math.pi, modes=2)
    scaled = f * (c * complex(math.cos(angle), math.sin(angle)))
    assert hat_morrey_norm(scaled, spec) == pytest.approx(c * hat_morrey_norm(f, spec), rel=1e-12)


def test_morrey_norm_blind_to_modulation():
    spec = MorreySpec(1.5, 1.2, 3.0)
    f = random_smooth_field(np.random.default_rng(1), 1, 256, 16.0)
    g = f.with_values(f.values * np.exp(0.7j * f.axis()))
    assert morrey_norm(g, spec) == pytest.approx(morrey_norm(f, spec), rel=1e-13)


def test_hat_lebesgue_of_gaussian():
    f = GridField.from_function(lambda x: np.exp(-x**2 / 2), 1, 256, 8 * math.pi)
    assert hat_lebesgue_norm(f, 1.5) == pytest.approx((2 * math.pi / 3) ** (1 / 6), abs=1e-10)
    assert hat_lebesgue_norm(f, 2) == pytest.approx(f.l2_norm(), rel=1e-12)


def test_size_function_properties(Q, spec):
    res = size_function(Q, spec)
    assert 0 < res.value <= hat_morrey_norm(Q, spec)
    moved = size_function(modulate(Q, [1.3]), spec)
    assert moved.value == pytest.approx(res.value, rel=1e-3)
    assert moved.xi_star[0] == pytest.approx(res.xi_star[0] - 1.3, abs=0.05)   # e^{-ix xi} shifts by -xi
    with pytest.raises(ConfigurationError):
        size_function(Q, MorreySpec(1.5, 1.2, 3.0))


def test_duality_pairing_holds_for_random_blocks():
    rng = np.random.default_rng(2)
    spec = MorreySpec(1.5, 1.2, 3.0)
    for _ in range(20):
        f = random_smooth_field(rng, 1, 256, 16.0)
        check = duality_pairing_check(f, _random_blocks(rng, f, spec, 4), spec)
        assert check.passed and check.lhs <= check.rhs * (1 + 1e-12)


def test_dyadic_average_projection_is_a_projection():
    f = random_smooth_field(np.random.default_rng(3), 1, 256, 16.0)
    p = dyadic_average_projection(f, -2, 1)
    pp = dyadic_average_projection(p, -2, 1)
    assert np.abs(pp.values - p.values).max() < 1e-13
    assert np.all(p.values[np.abs(p.axis()) > 4] == 0)
    with pytest.raises(ConfigurationError):
        dyadic_average_projection(f, 1, 0)


def test_compactness_moduli_shrink_with_C(Q, spec):
    m_spec = MorreySpec(1.5, 1.2, 3.0)
    g = GridField.from_function(lambda x: np.exp(-x**2), 1, 256, 16.0)
    loose, tight = compactness_modulus(g, m_spec, 1.0), compactness_modulus(g, m_spec, 4.0)
    assert tight.tail < loose.tail
    r1 = almost_periodicity_residual(Q, 1.0, [0.0], [0.0], 2.0, spec)
    r2 = almost_periodicity_residual(Q, 1.0, [0.0], [0.0], 8.0, spec)
    assert 0 < r2 < r1
    assert almost_periodicity_residual(Q * 0, 1.0, [0.0], [0.0], 8.0, spec) == 0.0
