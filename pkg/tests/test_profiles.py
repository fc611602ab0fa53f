import math

import numpy as np
import pytest

from morrey_nls import (ConfigurationError, Deformation, GridField, ValidationError, apply, default_state_space,
                        hat_morrey_norm, profile_decompose)
from morrey_nls.grid import FOURIER
from morrey_nls.profiles import (almost_periodicity_params, beta_shape, canonical_frame, deformed_distance,
                                 eta_lower_bound, extract_bubbles, greedy_scale_decomposition, greedy_spec,
                                 renormalize)
from morrey_nls.symmetry import boost, shift_and_flow

ALPHA = 1.5
GSPEC = greedy_spec(1, ALPHA)


def two_indicators():
    probe = GridField.zeros(1, 2048, 64 * math.pi, FOURIER)
    k = probe.axis()
    return probe.with_values((((k >= 0) & (k < 1)) | ((k >= 8) & (k < 8.125))).astype(complex))


def check_greedy_invariants(u, res):
    uh = u.in_space(FOURIER).values
    assert np.abs(res.reconstruct().in_space(FOURIER).values - uh).max() <= 1e-12 * np.abs(uh).max()
    supports = [np.abs(p.field.in_space(FOURIER).values) > 0 for p in res.raw]
    supports.append(np.abs(res.remainder.in_space(FOURIER).values) > 0)
    assert np.all(sum(s.astype(int) for s in supports) <= 1)
    r = GSPEC.r
    lhs = hat_morrey_norm(u, GSPEC) ** r
    rhs = sum(hat_morrey_norm(p.field, GSPEC) ** r for p in res.raw) + hat_morrey_norm(res.remainder, GSPEC) ** r
    assert lhs >= rhs - 1e-9


def test_greedy_on_two_indicators():
    u = two_indicators()
    res = greedy_scale_decomposition(u, 1e-3 * hat_morrey_norm(u, GSPEC), GSPEC)
    assert sorted((p.cube.j, p.cube.k) for p in res.pieces) == [(0, (0,)), (3, (64,))]
    assert np.abs(res.remainder.in_space(FOURIER).values).max() <= 1e-9
    check_greedy_invariants(u, res)


def test_greedy_on_a_gaussian(gaussian):
    res = greedy_scale_decomposition(gaussian, 0.05 * hat_morrey_norm(gaussian, GSPEC), GSPEC)
    assert len(res.pieces) >= 1
    check_greedy_invariants(gaussian, res)
    # the pieces carry the spectral bulk
    bulk = max(res.pieces, key=lambda p: p.field.l2_norm())
    assert abs(bulk.cube.center[0]) < 2


def test_greedy_threshold_gate(gaussian):
    res = greedy_scale_decomposition(gaussian, 2 * hat_morrey_norm(gaussian, GSPEC), GSPEC)
    assert len(res.pieces) == 0
    assert np.abs(res.remainder.physical_values() - gaussian.values).max() < 1e-15


def test_canonical_frame_round_trip(gaussian):
    piece = boost(gaussian, [-3.0])
    frame = canonical_frame(piece)
    back = apply(frame, renormalize(piece, frame, ALPHA), ALPHA)
    assert back.same_grid(piece)
    assert np.abs(back.in_space(piece.space).values - piece.values).max() < 1e-12


def test_single_bubble_oracle():
    phi = GridField.from_function(lambda x: np.exp(-x**2) * (1 + 0.5j * x), 1, 1024, 32 * math.pi)
    ns = (4, 8, 16)
    ex = extract_bubbles([shift_and_flow(phi, [n], n) for n in ns])
    assert len(ex.bubbles) == 1
    b = ex.bubbles[0]
    assert np.allclose(b.s, ns, atol=1e-6) and np.allclose(np.ravel(b.a), ns, atol=1e-6)
    assert deformed_distance(Deformation(), b.phi, Deformation(), phi, phi, ALPHA) <= 1e-6
    assert len(extract_bubbles([phi * 0] * 3).bubbles) == 0
    with pytest.raises(ValidationError):
        extract_bubbles([phi, phi])


def test_trivial_decompositions(spec):
    phi = GridField.from_function(lambda x: np.exp(-x**2), 1, 256, 16 * math.pi)
    dec = profile_decompose([phi] * 3, 0.01 * hat_morrey_norm(phi, GSPEC), spec, strichartz=False)
    assert len(dec) == 1
    tr = dec.profiles[0]
    assert all(G.distance(Deformation()) < 1e-6 for G in tr.deformations)
    assert deformed_distance(tr.deformations[0], tr.estimates[0], Deformation(), phi, phi, ALPHA) < 1e-9
    assert max(r.l2_norm() for r in dec.remainder) < 1e-9
    for i in range(3):
        assert np.abs(dec.reconstruct(i).values - phi.values).max() < 1e-9
    noise = [phi.with_values(1e-6 * np.random.default_rng(i).normal(size=256)) for i in range(3)]
    quiet = profile_decompose(noise, 0.5, spec, strichartz=False)
    assert len(quiet) == 0 and all(np.array_equal(r.values, u.values) for r, u in zip(quiet.remainder, noise))


def test_eta_report(spec):
    phi = GridField.from_function(lambda x: np.exp(-x**2), 1, 256, 16 * math.pi)
    zero = eta_lower_bound([phi * 0] * 3, spec)
    assert zero.m == 0 and zero.consistent
    dec = profile_decompose([phi] * 3, 0.01 * hat_morrey_norm(phi, GSPEC), spec, strichartz=False)
    rep = eta_lower_bound([phi] * 3, spec, decomposition=dec)
    assert rep.m > 0 and rep.max_profile_size > 0 and rep.consistent
    p = 3 * ALPHA
    assert beta_shape(1.0, 4.0, p, spec.r) < beta_shape(1.0, 2.0, p, spec.r)
    with pytest.raises(ConfigurationError):
        beta_shape(1.0, 2.0, 1.5, spec.r)


def test_almost_periodicity_of_translated_soliton(Q, spec):
    base = almost_periodicity_params(Q, 0.5, spec)
    moved = almost_periodicity_params(shift_and_flow(Q, [5.0], 0.0), 0.5, spec)
    assert base.lam == moved.lam == 0.25
    assert np.all(base.b == 0) and np.all(moved.b == 0)
    assert moved.y[0] - base.y[0] == pytest.approx(5.0, abs=Q.dx)
    with pytest.raises(ValidationError):
        almost_periodicity_params(Q * 1e-3, 0.5, spec)
