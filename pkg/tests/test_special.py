import math

import numpy as np
import pytest
from scipy.special import erfcx

from fracorder.special import gamma_recip, mlf

# Frozen output of tools/oracle_values/mlf_reference.py (mpmath power series at
# adaptive precision; exact erfc closed forms for alpha = 1/2).  The z values
# straddle every internal switch of the evaluator.
MLF_REFERENCE = {
    (0.25, 1.0, -0.5): 0.63767051920039336,
    (0.25, 1.0, -2.0): 0.2981017936936576,
    (0.25, 1.0, -5.0): 0.1427989464258737,
    (0.25, 0.25, -1.0): 0.063822257579002722,
    (0.25, 1.0, 4.0): 6.0457106600164142e111,
    (0.5, 1.0, -0.5): 0.61569034419292587,
    (0.5, 1.0, -5.0): 0.11070463773306863,
    (0.5, 1.0, -9.9): 0.056702456938832268,
    (0.5, 1.0, -10.1): 0.055590487009239876,
    (0.5, 1.0, -50.0): 0.011281536265323773,
    (0.5, 1.0, -200.0): 0.0028209126572120464,
    (0.5, 0.5, -0.5): 0.25634441145129335,
    (0.5, 0.5, -30.0): 0.00031291770525374203,
    (0.5, 2.0, -7.0): 0.14241743314281104,
    (0.5, 1.0, 2.0): 108.94090438997797,
    (0.75, 1.0, -1.0): 0.39310830281575406,
    (0.75, 1.0, -5.0): 0.067923974332643942,
    (0.75, 1.0, -14.9): 0.019857111582772449,
    (0.75, 1.0, -15.5): 0.019035798167045999,
    (0.75, 1.0, -100.0): 0.0027866210194390934,
    (0.75, 1.75, -3.0): 0.29138162102938616,
    (0.75, 1.0, 12.0): 1138603803235.8776,
    (1.25, 1.0, -0.5): 0.62687869726747622,
    (1.25, 1.0, -3.0): -0.059930488882996741,
    (1.25, 1.0, -20.0): -0.011143230102040975,
    (1.25, 1.0, -90.0): -0.002320399711250982,
    (1.25, 1.0, -100.0): -0.0020834272808351884,
    (1.25, 1.25, -8.0): -0.017488530570090462,
    (1.5, 1.0, -0.5): 0.66323679487242796,
    (1.5, 1.0, -8.0): -0.20287153923872816,
    (1.5, 1.0, -230.0): -0.0012261913867530544,
    (1.5, 1.0, -240.0): -0.001175130302341436,
    (1.5, 0.5, -12.0): 0.17582478145079524,
    (1.5, 1.5, -8.0): -0.072657823578414059,
    (1.5, 1.0, 5.0): 12.457289126443951,
    (1.75, 1.0, -1.0): 0.45900437557152722,
    (1.75, 1.0, -50.0): -0.13970738964219355,
    (1.75, 1.0, -575.0): -0.00019549196954417713,
    (1.75, 1.0, -590.0): -0.00013441314060989529,
    (1.75, 1.75, -130.0): -0.0010023829382110715,
    (1.75, 1.0, 130.0): 5854765.8594918301,
}


@pytest.mark.parametrize("alpha,beta,z", sorted(MLF_REFERENCE))
def test_mlf_reference_values(alpha, beta, z):
    expected = MLF_REFERENCE[(alpha, beta, z)]
    assert mlf(alpha, beta, z) == pytest.approx(expected, rel=1e-12)


def test_mlf_half_matches_erfcx():
    # E_{1/2,1}(-x) = exp(x^2) erfc(x) = erfcx(x); scipy's erfcx is a fully
    # independent implementation.
    for x in np.concatenate([np.linspace(0.01, 12.0, 40), [20.0, 30.0, 100.0]]):
        assert mlf(0.5, 1.0, -x) == pytest.approx(float(erfcx(x)), rel=1e-12)


def test_mlf_one_two_closed_form():
    # E_{1,2}(z) = (exp(z) - 1) / z
    for z in [-20.0, -3.0, -1e-3, 1e-3, 1.0, 15.0]:
        assert mlf(1.0, 2.0, z) == pytest.approx(math.expm1(z) / z, rel=1e-13)


def test_mlf_alpha_one_is_exp():
    for z in np.linspace(-30.0, 30.0, 61):
        assert mlf(1.0, 1.0, z) == pytest.approx(math.exp(z), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 1.25, 1.5, 1.75])
def test_mlf_branch_agreement_at_switches(alpha):
    # Evaluations an ulp on either side of each internal switch must agree far
    # more tightly than the smoothness of the function alone would force.
    switches = [min(10.0, 4.0**alpha), max(10.0, 38.0**alpha)]
    for s in switches:
        lo = mlf(alpha, 1.0, -math.nextafter(s, 0.0))
        hi = mlf(alpha, 1.0, -math.nextafter(s, math.inf))
        assert hi == pytest.approx(lo, rel=1e-9)
    s = max(10.0, 15.0**alpha)
    lo = mlf(alpha, 1.0, math.nextafter(s, 0.0))
    hi = mlf(alpha, 1.0, math.nextafter(s, math.inf))
    assert hi == pytest.approx(lo, rel=1e-9)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 0.95])
def test_mlf_completely_monotone_below_one(alpha):
    x = np.logspace(-2, 3, 120)
    vals = np.array([mlf(alpha, 1.0, -xi) for xi in x])
    assert np.all(vals > 0.0)
    assert np.all(np.diff(vals) < 0.0)
    assert vals[0] < 1.0


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_mlf_algebraic_tail(alpha):
    # E_{alpha,1}(-x) ~ 1 / (x * Gamma(1 - alpha)) as x -> infinity
    x = 1.0e4
    lead = 1.0 / (x * math.gamma(1.0 - alpha))
    assert mlf(alpha, 1.0, -x) == pytest.approx(lead, rel=1e-2)


def test_mlf_exponential_growth_positive_axis():
    # E_{1/2,1}(z) ~ 2 exp(z^2) for large positive z (algebraic tail negligible)
    z = 25.0
    assert mlf(0.5, 1.0, z) == pytest.approx(2.0 * math.exp(z * z), rel=1e-12)


def test_mlf_overflow_policy():
    assert mlf(0.5, 1.0, 40.0) == math.inf
    assert mlf(0.25, 1.0, 9.0) == math.inf
    assert math.isfinite(mlf(0.25, 1.0, 4.0))


def test_mlf_at_zero():
    assert mlf(0.7, 1.0, 0.0) == 1.0
    assert mlf(0.7, 2.0, 0.0) == pytest.approx(1.0, rel=1e-15)
    assert mlf(0.7, 0.0, 0.0) == 0.0


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 2.0, 2.5])
def test_mlf_rejects_alpha_outside_range(alpha):
    with pytest.raises(ValueError):
        mlf(alpha, 1.0, -1.0)


def test_mlf_rejects_nonfinite_arguments():
    with pytest.raises(ValueError):
        mlf(0.5, math.nan, -1.0)
    with pytest.raises(ValueError):
        mlf(0.5, 1.0, math.inf)


def test_gamma_recip_poles_and_values():
    assert gamma_recip(0.0) == 0.0
    assert gamma_recip(-3.0) == 0.0
    assert gamma_recip(5.0) == pytest.approx(1.0 / 24.0, rel=1e-15)
    assert gamma_recip(0.5) == pytest.approx(1.0 / math.sqrt(math.pi), rel=1e-15)
    assert gamma_recip(200.0) == 0.0
    assert gamma_recip(-0.5) == pytest.approx(-0.5 / math.sqrt(math.pi), rel=1e-14)
