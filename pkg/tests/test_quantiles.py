import math

import pytest

from lago.quantiles import (chi2_quantile, chi2_sf, normal_cdf, normal_quantile,
                            two_sided_z)

# reference 0.95 quantiles, frozen from two independent sources
# (scipy.stats.chi2.ppf and an mpmath regularized-gamma root solve, 13 digits)
CHI2_95 = {
    1: 3.8414588206941,
    2: 5.9914645471080,
    3: 7.8147279032512,
    4: 9.4877290367812,
    5: 11.0704976935164,
    10: 18.3070380532751,
    30: 43.7729718257422,
}


@pytest.mark.parametrize("df,expected", sorted(CHI2_95.items()))
def test_chi2_quantile_reference_values(df, expected):
    assert chi2_quantile(0.95, df) == pytest.approx(expected, abs=1e-9)


def test_chi2_quantile_other_levels():
    assert chi2_quantile(0.99, 1) == pytest.approx(6.6348966010212, abs=1e-9)
    assert chi2_quantile(0.5, 4) == pytest.approx(3.3566939800333, abs=1e-9)


def test_chi2_cdf_quantile_roundtrip():
    for df in (1, 3, 7):
        for p in (0.05, 0.5, 0.95, 0.999):
            x = chi2_quantile(p, df)
            assert 1.0 - chi2_sf(x, df) == pytest.approx(p, abs=1e-12)


def test_two_sided_z_matches_chi2_df1():
    assert two_sided_z(0.95) == pytest.approx(math.sqrt(chi2_quantile(0.95, 1)), abs=0)
    assert two_sided_z(0.95) == pytest.approx(1.959963984540054, abs=1e-12)


def test_normal_quantile_cdf_roundtrip():
    for p in (1e-6, 0.025, 0.3, 0.5, 0.975, 1 - 1e-6):
        assert normal_cdf(normal_quantile(p)) == pytest.approx(p, abs=1e-13)
