import math

import numpy as np
import pytest

from morrey_nls import ConfigurationError, critical_thresholds, ground_state
from morrey_nls.stationary import (aubin_talenti_residual, closed_form_q, energy, ground_state_residual,
                                   pohozaev_check, rescale, w_hdot1_sq)

ALPHA = 1.5


def test_closed_form_ground_state():
    gs = ground_state(1, ALPHA)
    assert gs.residual_Linf <= 1e-6
    v, x = gs.field.values.real, gs.field.axis()
    assert np.all(v > 0)
    right = x >= 0
    assert np.all(np.diff(v[right]) <= 0)
    assert gs.peak == pytest.approx(closed_form_q(np.array([0.0]), ALPHA)[0])


@pytest.mark.parametrize("d, alpha", [(2, 0.9), (3, 0.6)])
def test_shooting_in_higher_dimensions(d, alpha):
    n, extent = (256, 8 * math.pi) if d == 2 else (128, 4 * math.pi)
    gs = ground_state(d, alpha, n=n, extent=extent)
    assert gs.method == "radial-shooting" and gs.residual_Linf <= 1e-4
    assert max(pohozaev_check(gs, alpha)) <= 1e-5
    assert np.all(gs.field.values.real > 0)


def test_rescaled_ground_state_solves_scaled_equation():
    gs = ground_state(1, ALPHA)
    Q2 = rescale(gs, 0.5)
    assert ground_state_residual(Q2, ALPHA, lam=0.5) <= 1e-8


def test_energy_sign_flips_for_large_multiples():
    Q = ground_state(1, ALPHA).field
    assert energy(Q * 0.5, ALPHA) > 0 and energy(Q * 3, ALPHA) < 0


def test_critical_numbers():
    for d in (3, 4, 5):
        E1, E2 = critical_thresholds(d)
        assert E1 / E2 == pytest.approx(math.sqrt(2 / d), abs=4e-16)
        assert E2**2 == pytest.approx(w_hdot1_sq(d), rel=1e-14)
        # ||W||^2 = S_d^{d/2} with S_d the sharp Sobolev constant
        S = math.pi * d * (d - 2) * (math.gamma(d / 2) / math.gamma(d)) ** (2 / d)
        assert w_hdot1_sq(d) == pytest.approx(S ** (d / 2), rel=1e-12)
    with pytest.raises(ConfigurationError):
        critical_thresholds(2)


def test_aubin_talenti_profile_solves_critical_equation():
    assert aubin_talenti_residual(3) < 1e-3


def test_rejects_supercritical_exponent():
    with pytest.raises(ConfigurationError):
        ground_state(3, 2.0)
