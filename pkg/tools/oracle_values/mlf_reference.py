"""High-precision Mittag-Leffler reference values.

Evaluates E_{alpha,beta}(z) with mpmath using the defining power series at a
working precision chosen from the cancellation estimate |z|**(1/alpha)/ln(10)
digits plus a fixed margin.  For alpha = 1/2 the closed forms

    E_{1/2,1}(-x)   = exp(x^2) erfc(x)
    E_{1/2,1/2}(-x) = 1/sqrt(pi) - x exp(x^2) erfc(x)

are used as an independent cross-check.  Run this script to regenerate the
frozen table pasted into tests/test_special.py.
"""

import mpmath as mp

MARGIN_DPS = 60
MAX_TERMS = 200000

# (alpha, beta, z) triples covering every evaluation branch: power series,
# integral-contour and algebraic zones on the negative axis (the zone edges
# sit at min(10, 4**alpha) and max(10, 38**alpha)), the residue range
# alpha > 1, the positive axis on both sides of max(10, 15**alpha), and
# assorted beta values.
CASES = [
    (0.25, 1.0, -0.5),
    (0.25, 1.0, -2.0),
    (0.25, 1.0, -5.0),
    (0.25, 0.25, -1.0),
    (0.25, 1.0, 4.0),
    (0.5, 1.0, -0.5),
    (0.5, 1.0, -5.0),
    (0.5, 1.0, -9.9),
    (0.5, 1.0, -10.1),
    (0.5, 1.0, -50.0),
    (0.5, 1.0, -200.0),
    (0.5, 0.5, -0.5),
    (0.5, 0.5, -30.0),
    (0.5, 2.0, -7.0),
    (0.5, 1.0, 2.0),
    (0.75, 1.0, -1.0),
    (0.75, 1.0, -5.0),
    (0.75, 1.0, -14.9),
    (0.75, 1.0, -15.5),
    (0.75, 1.0, -100.0),
    (0.75, 1.75, -3.0),
    (0.75, 1.0, 12.0),
    (1.25, 1.0, -0.5),
    (1.25, 1.0, -3.0),
    (1.25, 1.0, -20.0),
    (1.25, 1.0, -90.0),
    (1.25, 1.0, -100.0),
    (1.25, 1.25, -8.0),
    (1.5, 1.0, -0.5),
    (1.5, 1.0, -8.0),
    (1.5, 1.0, -230.0),
    (1.5, 1.0, -240.0),
    (1.5, 0.5, -12.0),
    (1.5, 1.5, -8.0),
    (1.5, 1.0, 5.0),
    (1.75, 1.0, -1.0),
    (1.75, 1.0, -50.0),
    (1.75, 1.0, -575.0),
    (1.75, 1.0, -590.0),
    (1.75, 1.75, -130.0),
    (1.75, 1.0, 130.0),
]


def mlf_series_mp(alpha, beta, z):
    dps = int(abs(z) ** (1.0 / alpha) / mp.log(10)) + MARGIN_DPS
    with mp.workdps(dps):
        a, b, zz = mp.mpf(alpha), mp.mpf(beta), mp.mpf(z)
        total = mp.mpf(0)
        for k in range(MAX_TERMS):
            term = zz**k / mp.gamma(a * k + b)
            total += term
            if k > 4 and abs(term) < mp.mpf(10) ** (-dps + 10) * max(abs(total), mp.mpf(1)):
                return total
        raise RuntimeError(f"series did not converge for {(alpha, beta, z)}")


def mlf_half_closed(beta, z):
    # Exact closed forms for alpha = 1/2 on the negative axis; no cancellation,
    # so modest precision suffices at any x.
    x = mp.mpf(-z)
    with mp.workdps(50):
        if beta == 1.0:
            return mp.exp(x**2) * mp.erfc(x)
        if beta == 0.5:
            return 1 / mp.sqrt(mp.pi) - x * mp.exp(x**2) * mp.erfc(x)
    raise ValueError(beta)


def mlf_mp(alpha, beta, z):
    if alpha == 0.5 and z < 0 and beta in (1.0, 0.5):
        closed = mlf_half_closed(beta, z)
        note = ""
        if -z <= 12.0:
            series = mlf_series_mp(alpha, beta, z)
            rel = float(abs(series - closed) / abs(closed))
            note = f"  # series cross-check agrees to {rel:.1e}"
        return closed, note
    return mlf_series_mp(alpha, beta, z), ""


def main():
    print("MLF_REFERENCE = {")
    for alpha, beta, z in CASES:
        value, note = mlf_mp(alpha, beta, z)
        print(f"    ({alpha}, {beta}, {z}): {mp.nstr(value, 17)},{note}")
    print("}")


if __name__ == "__main__":
    main()
