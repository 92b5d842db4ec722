import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from lgmix.special import chi_square_sf, gammainc_lower, gammainc_upper


def chi2_sf_quadrature(x, df):
    norm = 2 ** (df / 2) * math.gamma(df / 2)
    f = lambda t: t ** (df / 2 - 1) * math.exp(-t / 2) / norm  # noqa: E731
    return quad(f, x, math.inf, epsabs=1e-14, epsrel=1e-13)[0]


def test_origin():
    for df in (1, 2, 3, 7):
        assert chi_square_sf(0.0, df) == 1.0


def test_df2_exact_point():
    assert chi_square_sf(2 * math.log(100), 2) == pytest.approx(0.01, abs=1e-12)


@given(st.floats(0, 200))
def test_df2_closed_form(x):
    assert chi_square_sf(x, 2) == pytest.approx(math.exp(-x / 2), abs=1e-12)


def test_df3_at_20():
    # frozen from chi2_sf_quadrature(20, 3)
    assert chi_square_sf(20.0, 3) == pytest.approx(1.6974243555282643e-4, abs=1e-10)


@pytest.mark.parametrize("df", [1, 3, 5])
@pytest.mark.parametrize("x", [0.01, 0.5, 2.0, 3.0, 7.8147, 11.07, 25.0, 60.0])
def test_matches_quadrature(df, x):
    assert chi_square_sf(x, df) == pytest.approx(chi2_sf_quadrature(x, df), abs=1e-10)


@given(st.integers(1, 30), st.floats(0, 100), st.floats(0, 50))
def test_monotone_decreasing(df, x, dx):
    assert chi_square_sf(x + dx, df) <= chi_square_sf(x, df) + 1e-15


@given(st.floats(0.1, 50), st.floats(0, 150))
def test_lower_upper_complement(a, x):
    assert gammainc_lower(a, x) + gammainc_upper(a, x) == pytest.approx(1.0, abs=1e-12)


def test_against_scipy():
    from scipy.special import gammaincc

    grid = np.linspace(0, 80, 161)
    for df in range(1, 11):
        for x in grid:
            assert chi_square_sf(x, df) == pytest.approx(gammaincc(df / 2, x / 2), abs=1e-12)


def test_bad_df():
    with pytest.raises(ValueError):
        chi_square_sf(1.0, 0)
