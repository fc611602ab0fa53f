import re
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from morrey_nls import ConfigurationError
from morrey_nls.config import alpha_bounds, check_exponents, parse_config, parse_real, r_bounds

BASE = "[experiment]\nkind = soliton-orbit\nd = 1\nalpha = 3/2\n"


def test_parses_fractions_and_defaults():
    cfg = parse_config(BASE + "seed = 4\n[grid]\nextent = 16 pi\n")
    assert cfg.alpha == Fraction(3, 2) and cfg.r == Fraction(33, 10) and cfg.seed == 4
    assert cfg.get_real("grid", "extent", 0) == pytest.approx(16 * 3.141592653589793)
    assert cfg.get_int("grid", "n", 1024) == 1024


@pytest.mark.parametrize("text, needle", [
    ("", "empty"),
    ("[grid]\nn = 4\n", "[experiment]"),
    ("[experiment]\nkind = nope\nd = 1\nalpha = 3/2\n", "kind must be"),
    (BASE + "colour = red\n", "unknown keys"),
    ("[experiment]\nkind = norm-suite\nd = 1\nalpha = 2\n", "alpha < 2/d"),
    ("[experiment]\nkind = norm-suite\nd = 1\nalpha = 4/3\n", "alpha >"),
    (BASE + "r = 18/5\n", "r < ((d+2) alpha)^*"),
    (BASE + "r = 3\n", "r > (d alpha)'"),
    (BASE + "seed = x\n", "seed"),
])
def test_rejections_name_the_problem(text, needle):
    with pytest.raises(ConfigurationError, match=re.escape(needle)):
        parse_config(text)


def test_critical_numbers_skip_state_space_checks():
    cfg = parse_config("[experiment]\nkind = critical-numbers\nd = 4\n")
    assert not cfg.hat_diagnostics


def test_hash_ignores_layout():
    a = parse_config(BASE + "[solver]\ndt = 1e-4\n")
    b = parse_config("# comment\n[experiment]\nalpha=3/2\nd=1\nkind=soliton-orbit\n\n[solver]\ndt = 1e-4\n")
    assert a.hash() == b.hash()
    assert a.hash() != parse_config(BASE + "[solver]\ndt = 2e-4\n").hash()


def test_parse_real():
    assert parse_real("pi", "k") == pytest.approx(3.141592653589793)
    assert parse_real("1/4", "k") == 0.25
    with pytest.raises(ConfigurationError):
        parse_real("lots", "k")


@given(st.integers(1, 5), st.fractions(Fraction(1, 10), Fraction(3)))
def test_exact_bounds_agree_with_their_definition(d, alpha):
    lo, hi = alpha_bounds(d)
    if not lo < alpha < hi:
        with pytest.raises(ConfigurationError):
            check_exponents(d, alpha, None)
        return
    r = check_exponents(d, alpha, None)
    rlo, rhi = r_bounds(d, alpha)
    assert rlo < r < rhi
    for bad in (rlo, rhi):
        with pytest.raises(ConfigurationError):
            check_exponents(d, alpha, bad)
