import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from morrey_nls import BandOverflowError, ConfigurationError, DyadicCube, GridField, resample
from morrey_nls.grid import FOURIER, PHYSICAL, dyadic_exponent, restrict_to_cube

complex_arrays = arrays(np.complex128, st.sampled_from([8, 16, 64]),
                        elements=st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))


@settings(max_examples=50, deadline=None)
@given(complex_arrays)
def test_fft_round_trip_and_parseval(vals):
    f = GridField(vals, 4 * math.pi)
    back = f.to_fourier().to_physical()
    assert np.allclose(back.values, vals, atol=1e-10 * (1 + np.abs(vals).max()))
    assert math.isclose(f.l2_norm(), f.to_fourier().l2_norm(), rel_tol=1e-12, abs_tol=1e-9)


def test_gaussian_transform_is_gaussian():
    f = GridField.from_function(lambda x: np.exp(-x**2 / 2), 1, 256, 8 * math.pi)
    fh = f.to_fourier()
    assert np.abs(fh.values - np.exp(-fh.axis() ** 2 / 2)).max() < 1e-12


def test_axis_convention():
    f = GridField.zeros(1, 8, 2.0)
    assert f.axis()[0] == -2.0 and f.dx == 0.5
    assert f.dxi == pytest.approx(math.pi / 2.0)


@pytest.mark.parametrize("shape, extent", [((6,), 1.0), ((8, 4), 1.0), ((8,), 0.0), ((8,), math.inf)])
def test_rejects_bad_grids(shape, extent):
    with pytest.raises(ConfigurationError):
        GridField(np.zeros(shape), extent)


def test_values_are_read_only():
    f = GridField.zeros(1, 8, 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 1


def test_cube_children_partition_parent():
    cube = DyadicCube(1, (-3, 2))
    kids = cube.children()
    assert len(kids) == 4 and all(k.parent() == cube for k in kids)
    assert sum(k.volume for k in kids) == cube.volume
    pts = np.meshgrid(np.linspace(-2, 2, 65), np.linspace(-2, 2, 65), indexing="ij")
    counts = sum(k.contains(pts).astype(int) for k in kids)
    assert np.array_equal(counts, cube.contains(pts).astype(int))


def test_cube_is_half_open():
    c = DyadicCube(2, (1,))
    assert c.contains([np.array([0.25])])[0] and not c.contains([np.array([0.5])])[0]


def test_restriction_splits_over_children():
    fh = GridField.from_function(lambda k: np.exp(-k**2) + 0j, 1, 256, 16 * math.pi, space=FOURIER)
    cube = DyadicCube(0, (0,))
    whole = restrict_to_cube(fh, cube)
    parts = sum((restrict_to_cube(fh, k) for k in cube.children()), fh * 0)
    assert np.array_equal(whole.values, parts.values)
    with pytest.raises(ConfigurationError):
        restrict_to_cube(fh.to_physical(), cube)


def test_dyadic_exponent():
    assert dyadic_exponent(1 / 64) == 6 and dyadic_exponent(4.0) == -2
    with pytest.raises(ConfigurationError):
        dyadic_exponent(0.3)


def test_resample_refine_then_coarsen_is_identity():
    f = GridField.from_function(lambda x: np.exp(-x**2 / 2), 1, 128, 8 * math.pi)
    fine = resample(f, 16 * math.pi, 512)
    assert fine.space == PHYSICAL and fine.n == 512
    back = resample(fine, 8 * math.pi, 128)
    assert np.abs(back.values - f.values).max() < 1e-12


def test_resample_refuses_to_drop_data():
    f = GridField.from_function(lambda x: np.exp(-x**2 / 50), 1, 256, 16 * math.pi)
    with pytest.raises(BandOverflowError):
        resample(f, 2 * math.pi, 32)
