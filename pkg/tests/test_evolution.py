import math

import numpy as np
import pytest

from morrey_nls import ConfigurationError, GridField, SolverConfig, ValidationError, evolve, strichartz_ratio
from morrey_nls.evolution import (SCATTERED, SOLITON, classify, duhamel_residual, free_propagate,
                                  free_strichartz_norm, load_trajectory, reverse, save_trajectory)
from morrey_nls.symmetry import dilate

ALPHA = 1.5


def gauss(n=512, extent=16 * math.pi, amp=1.0):
    return GridField.from_function(lambda x: amp * np.exp(-x**2 / 2) + 0j, 1, n, extent)


def test_free_flow_of_gaussian():
    f = gauss()
    t = 0.7
    exact = (1 + 2j * t) ** -0.5 * np.exp(-f.axis() ** 2 / (2 * (1 + 2j * t)))
    assert np.abs(free_propagate(f, t).values - exact).max() < 1e-12


def test_conservation_and_reversibility(Q):
    u0 = Q * 0.8
    cfg = SolverConfig(alpha=ALPHA, dt=1e-3, t_end=0.5, snapshot_stride=100)
    traj = evolve(u0, cfg)
    assert np.abs(traj.mass - traj.mass[0]).max() <= 1e-12 * traj.mass[0]
    assert np.abs(traj.energy - traj.energy[0]).max() <= 1e-4 * abs(traj.energy[0])
    back = evolve(reverse(traj.fields[-1]), cfg).fields[-1]
    assert np.abs(reverse(back).values - u0.values).max() < 1e-10


def test_strang_is_second_order(Q):
    cfg = SolverConfig(alpha=ALPHA, dt=2e-3, t_end=0.4, snapshot_stride=10)
    r1 = duhamel_residual(evolve(Q, cfg), 0.0, 0.4)
    r2 = duhamel_residual(evolve(Q, cfg.halved()), 0.0, 0.4)
    assert 3.5 < r1 / r2 < 4.5


@pytest.mark.parametrize("kw", [{"dt": 0.0}, {"t_end": -1.0}, {"splitting_order": 1}, {"snapshot_stride": 0}])
def test_solver_config_validation(kw):
    with pytest.raises(ConfigurationError):
        SolverConfig(**{"alpha": ALPHA, "dt": 1e-3, "t_end": 1.0, **kw})


def test_rejects_data_touching_the_boundary():
    wide = GridField.from_function(lambda x: np.exp(-x**2 / 200) + 0j, 1, 256, 8 * math.pi)
    with pytest.raises(ValidationError):
        evolve(wide, SolverConfig(alpha=ALPHA, dt=1e-2, t_end=0.1))


def test_classification(Q, spec):
    cfg = SolverConfig(alpha=ALPHA, dt=1e-3, t_end=1.0, snapshot_stride=100)
    assert classify(evolve(Q, cfg), spec=spec) == SOLITON
    small = gauss(n=2048, extent=64 * math.pi, amp=0.05)
    run = SolverConfig(alpha=ALPHA, dt=5e-3, t_end=20.0, snapshot_stride=200)
    assert classify(evolve(small, run), spec=spec) == SCATTERED


def test_trajectory_round_trip(tmp_path, Q):
    traj = evolve(Q, SolverConfig(alpha=ALPHA, dt=1e-2, t_end=0.1, snapshot_stride=5))
    back = load_trajectory(save_trajectory(traj, tmp_path / "traj"))
    assert np.array_equal(back.times, traj.times) and back.status == traj.status
    assert all(np.array_equal(a.values, b.values) for a, b in zip(back.fields, traj.fields))


def test_strichartz_norm_is_scale_invariant(spec):
    p = 3 * ALPHA
    f = gauss(256, 16 * math.pi)
    s0 = free_strichartz_norm(f, p).total
    s1 = free_strichartz_norm(dilate(f, 1, ALPHA), p).total
    assert s1 == pytest.approx(s0, rel=1e-3)
    res = strichartz_ratio(f, spec)
    assert res.ratio > 0 and not res.flagged
