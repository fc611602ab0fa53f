import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morrey_nls import ConfigurationError, Deformation, GridField, ValidationError, apply, compose, invert
from morrey_nls.symmetry import is_vanishing_trajectory, orthogonality_divergence

ALPHA = 1.5
BUMP = GridField.from_function(lambda x: np.exp(-x**2 / 2) * (1 + 0.3j * x), 1, 512, 16 * math.pi)

deformations = st.builds(
    Deformation,
    theta=st.floats(-4, 4), m=st.integers(-3, 3), b=st.tuples(st.floats(-3, 3)),
    s=st.floats(-2, 2), a=st.tuples(st.floats(-5, 5)))


def close(G, H, tol=1e-10):
    return G.distance(H, modulo_phase=False) <= tol * (1 + G.magnitude() + H.magnitude())


@settings(max_examples=200, deadline=None)
@given(deformations, deformations, deformations)
def test_composition_is_associative(A, B, C):
    assert close(compose(compose(A, B), C), compose(A, compose(B, C)))


@settings(max_examples=200, deadline=None)
@given(deformations)
def test_inverse_on_both_sides(G):
    I = Deformation.identity()
    assert close(compose(G, invert(G)), I) and close(compose(invert(G), G), I)
    assert close(invert(invert(G)), G)


@settings(max_examples=30, deadline=None)
@given(st.builds(Deformation, theta=st.floats(-4, 4), m=st.integers(-1, 1), b=st.tuples(st.floats(-1, 1)),
                 s=st.floats(-0.3, 0.3), a=st.tuples(st.floats(-2, 2))))
def test_inverse_undoes_the_action(G):
    back = apply(invert(G), apply(G, BUMP, ALPHA), ALPHA)
    assert back.same_grid(BUMP)
    assert np.abs(back.values - BUMP.values).max() < 1e-10


def test_validation_and_json():
    with pytest.raises(ConfigurationError):
        Deformation(m=0.5)
    with pytest.raises(ConfigurationError):
        Deformation.from_h(3.0)
    G = Deformation(1.0, 2, (0.5,), 0.25, (-1.0,))
    assert Deformation.from_json(G.to_json()) == G
    assert Deformation.from_h(0.25).m == -2


def test_divergence():
    G = Deformation(m=2, b=(1.0,), s=0.5, a=(3.0,))
    assert orthogonality_divergence(G, G).total == 0
    far = orthogonality_divergence(Deformation(m=5), Deformation(a=(25.0,)))
    assert far.scale_gap == pytest.approx(5 * math.log(2)) and far.shift_gap == pytest.approx(25 * 32)


def test_vanishing_rule():
    grow = [Deformation(a=(float(n * n),)) for n in range(1, 8)]
    still = [Deformation(a=(1.0,))] * 7
    assert is_vanishing_trajectory(grow) and not is_vanishing_trajectory(still)
    with pytest.raises(ValidationError):
        is_vanishing_trajectory(grow[:2])
