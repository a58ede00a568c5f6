"""Two-parameter Mittag-Leffler function E_{alpha,beta} on the real line.

The function is evaluated by three methods stitched together along the
negative axis:

* Taylor series where it is numerically benign (small |z|; the alternating
  series loses roughly x**(1/alpha) / ln(10) digits at z = -x, so the series
  zone shrinks as alpha does),
* a Hankel-contour representation (two legs along the negative axis plus a
  circle around the origin, and for alpha > 1 the residue pair of the poles
  of 1 / (p**alpha + x)) in the middle range,
* the algebraic large-argument expansion -sum_k z**(-k) / Gamma(beta - k*alpha)
  with adaptive truncation, once its optimal-truncation floor is below the
  target accuracy (again plus the residue pair for alpha > 1).

All three agree to ~1e-12 relative on their overlap windows; tests pin that.
"""

import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.special import gamma as _gamma
from scipy.special import hyp1f1

__all__ = ["mlf", "gamma_recip", "Z_SWITCH"]

# Handover from Taylor series to the contour representation on the negative
# axis happens at min(Z_SWITCH, 4**alpha); the contour hands over to the
# algebraic expansion at max(Z_SWITCH, 38**alpha).
Z_SWITCH = 10.0

_SERIES_MAX_TERMS = 500
_SERIES_MAX_TERMS_POS = 20000  # positive axis: no cancellation, just length
# Optimal truncation of the positive-axis algebraic tail is ~exp(-2*z**(1/alpha));
# switching to it at 15**alpha keeps that floor below ~1e-13 relative.
_POS_SWITCH_BASE = 15.0
_CIRCLE_NODES = leggauss(64)


def gamma_recip(x: float) -> float:
    """Reciprocal gamma 1/Gamma(x) with 1/Gamma(m) = 0 for m = 0, -1, -2, ...

    The zero convention is what makes the large-argument expansion of the
    Mittag-Leffler function drop its pole terms; it must hold exactly.
    """
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        return 0.0
    if x > 178.0:
        # Gamma overflows float64 past ~171.6
        return 0.0
    g = _gamma(x)
    if g == 0.0 or not math.isfinite(g):
        return 0.0
    return 1.0 / g


def mlf(alpha: float, beta: float, z: float) -> float:
    """Evaluate E_{alpha,beta}(z) = sum_n z**n / Gamma(alpha*n + beta).

    Parameters
    ----------
    alpha : float
        Order parameter, required to lie in (0, 2).
    beta : float
        Second parameter, any finite real.
    z : float
        Real argument. The negative axis is the accurate, tested range
        (relative error ~1e-12); large positive arguments overflow to inf.
    """
    alpha = float(alpha)
    beta = float(beta)
    z = float(z)
    if not 0.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (0, 2), got {alpha}")
    if not (math.isfinite(beta) and math.isfinite(z)):
        raise ValueError("beta and z must be finite")
    if z == 0.0:
        return gamma_recip(beta)
    if alpha == 1.0:
        return _mlf_alpha_one(beta, z)
    if z > 0.0:
        r = z ** (1.0 / alpha)
        if r > 700.0:
            return math.inf
        if z <= max(Z_SWITCH, _POS_SWITCH_BASE**alpha):
            return _series_pos(alpha, beta, z, r)
        return _asymptotic_pos(alpha, beta, z)
    x = -z
    if x <= min(Z_SWITCH, 4.0**alpha):
        return _series(alpha, beta, z, _SERIES_MAX_TERMS)
    if x < _algebraic_threshold(alpha):
        return _contour_neg(alpha, beta, x)
    return _algebraic_neg(alpha, beta, x, with_residue=True)


def _algebraic_threshold(alpha: float) -> float:
    # Optimal truncation of the algebraic expansion has error ~exp(-x**(1/alpha));
    # 38**alpha puts that floor near 1e-13 relative.
    return max(Z_SWITCH, 38.0**alpha)


def _mlf_alpha_one(beta: float, z: float) -> float:
    # E_{1,beta}(z) = M(1, beta, z) / Gamma(beta); exact exp for beta = 1,
    # closed form z**(m+1) * exp(z) at the non-positive-integer betas where
    # the leading series terms vanish.
    if beta == 1.0:
        return math.exp(z)
    if beta <= 0.0 and beta == math.floor(beta):
        return z ** (1.0 - beta) * math.exp(z)
    return float(hyp1f1(1.0, beta, z)) * gamma_recip(beta)


def _series(alpha: float, beta: float, z: float, max_terms: int) -> float:
    total = 0.0
    term = gamma_recip(beta)  # n = 0
    zn = 1.0
    scale = abs(term)
    for n in range(max_terms):
        total += term
        zn *= z
        if not math.isfinite(zn):
            return math.inf if z > 0 else math.nan
        term = zn * gamma_recip(alpha * (n + 1) + beta)
        mag = abs(term)
        scale = max(scale, mag)
        if mag <= 1e-17 * max(abs(total), 1e-300) and alpha * (n + 1) + beta > 2.0:
            return total
    raise ValueError(
        f"Mittag-Leffler series did not converge within {max_terms} terms "
        f"(alpha={alpha}, beta={beta}, z={z})"
    )


def _series_pos(alpha: float, beta: float, z: float, r: float) -> float:
    # All large terms share one sign, so the sum is well conditioned; the
    # terms themselves are formed in log space because z**n overflows long
    # before the gamma factor brings them back down.
    lz = math.log(z)
    total = 0.0
    scale = 0.0
    for n in range(_SERIES_MAX_TERMS_POS):
        arg = alpha * n + beta
        if arg <= 0.0 and arg == math.floor(arg):
            continue
        lt = n * lz - math.lgamma(arg)
        if lt > 708.0:
            return math.inf
        term = math.exp(lt)
        if arg < 0.0 and int(math.floor(arg)) % 2 != 0:
            term = -term
        total += term
        mag = abs(term)
        scale = max(scale, mag)
        # the term peak sits near arg == r; only trust smallness past it
        if arg > r + 2.0 and scale > 0.0 and mag <= 1e-17 * scale:
            return total
    raise ValueError(
        f"Mittag-Leffler series did not converge within "
        f"{_SERIES_MAX_TERMS_POS} terms (alpha={alpha}, beta={beta}, z={z})"
    )


def _residue_pair(alpha: float, beta: float, x: float) -> float:
    # Poles of 1 / (p**alpha + x) at p = x**(1/alpha) * exp(+-i*pi/alpha) lie on
    # the principal sheet only for alpha > 1; their residue sum is real.
    r = x ** (1.0 / alpha)
    ang = math.pi / alpha
    amp = (2.0 / alpha) * x ** ((1.0 - beta) / alpha) * math.exp(r * math.cos(ang))
    return amp * math.cos(r * math.sin(ang) + (1.0 - beta) * ang)


def _contour_neg(alpha: float, beta: float, x: float) -> float:
    """Hankel-contour value of E_{alpha,beta}(-x) for x in the middle range."""
    spb = math.sin(math.pi * beta)
    spba = math.sin(math.pi * (beta - alpha))
    cpa = math.cos(math.pi * alpha)

    # Keep the origin circle well inside the region where |p**alpha| <= x/2 so
    # the denominator stays away from zero on it.
    rho = min(1.0, (0.5 * x) ** (1.0 / alpha))

    def legs(r):
        ra = r**alpha
        den = ra * ra + 2.0 * ra * x * cpa + x * x
        return math.exp(-r) * r ** (alpha - beta) * (ra * spb + x * spba) / den

    upper = 60.0 + x ** (1.0 / alpha) if alpha > 1.0 else 60.0
    upper = max(upper, 4.0 * rho)
    pts = []
    if cpa < 0.0:
        peak = (-x * cpa) ** (1.0 / alpha)
        if rho < peak < upper:
            pts.append(peak)
    val_legs, _ = quad(
        legs, rho, upper, points=pts or None, limit=300, epsabs=1e-15, epsrel=1e-13
    )
    val_legs /= math.pi

    # Circle |p| = rho, using conjugate symmetry to fold onto [0, pi].
    nodes, weights = _CIRCLE_NODES
    phi = 0.5 * math.pi * (nodes + 1.0)
    w = 0.5 * math.pi * weights
    ep = rho * np.exp(1j * phi)
    integrand = np.exp(ep) * np.exp(1j * (alpha - beta + 1.0) * phi) / (
        rho**alpha * np.exp(1j * alpha * phi) + x
    )
    val_circle = rho ** (alpha - beta + 1.0) / math.pi * float(w @ integrand.real)

    total = val_legs + val_circle
    if alpha > 1.0:
        total += _residue_pair(alpha, beta, x)
    return total


def _algebraic_neg(alpha: float, beta: float, x: float, with_residue: bool) -> float:
    # E(-x) ~ -sum_k (-x)**(-k) / Gamma(beta - k*alpha); adaptive truncation,
    # stopping at the smallest term when the divergent tail turns around.
    total = 0.0
    xk = 1.0
    sign = -1.0
    last_mag = math.inf
    for k in range(1, 200):
        xk /= x
        sign = -sign
        g = gamma_recip(beta - k * alpha)
        term = sign * xk * g
        mag = abs(term)
        if mag > last_mag and k > 2:
            break
        total += term
        if mag > 0.0:
            last_mag = mag
            if mag <= 1e-17 * abs(total):
                break
    if with_residue and alpha > 1.0:
        total += _residue_pair(alpha, beta, x)
    return total


def _asymptotic_pos(alpha: float, beta: float, z: float) -> float:
    # Exponential growth e**(z**(1/alpha)) dominates on the positive axis.
    arg = z ** (1.0 / alpha)
    if arg > 700.0:
        return math.inf
    lead = math.exp(arg) * z ** ((1.0 - beta) / alpha) / alpha
    total = lead
    zk = 1.0
    last_mag = math.inf
    for k in range(1, 200):
        zk /= z
        term = -zk * gamma_recip(beta - k * alpha)
        mag = abs(term)
        if mag > last_mag and k > 2:
            break
        total += term
        if mag > 0.0:
            last_mag = mag
            if mag <= 1e-17 * abs(total):
                break
    return total
