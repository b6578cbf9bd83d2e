"""Reference values for the acceptance tests, computed with mpmath by
direct numerical integration or series summation (no closed forms of the
library are reused)."""
from mpmath import mp, mpf, quad, exp, sqrt, pi, sin, cos, cosh, sinh, coth, inf, nsum, mpc

mp.dps = 25


def norm_unit_gaussian(L, d):
    # 1-D double integral of k_L(x-y) f(x) f(y), raised to d (product structure)
    f = lambda x: pi ** (-mpf(1) / 4) * exp(-x * x / 2)
    k = lambda u: L / sqrt(2 * pi) * exp(-L * L * u * u / 2)
    w = 8 / mpf(L)
    inner = lambda x: quad(lambda y: k(x - y) * f(y), [x - w, x, x + w])
    one = quad(lambda x: f(x) * inner(x), [-12, 0, 12])
    return one ** d


def time_toy(poly):
    # ∫∫ e^{+(t-s)^2/2} p(t) p(s) e^{-2t^2} e^{-2s^2}
    g = lambda t, s: exp((t - s) ** 2 / 2) * poly(t) * poly(s) * exp(-2 * t * t - 2 * s * s)
    return quad(g, [-inf, inf], [-inf, inf])


def free_packet(x, t, a0, q0, p0):
    # free propagator (m = hbar = 1) applied to
    # psi0 = (2 pi a0^2)^{-1/4} exp(-(y-q0)^2/(4a0^2) + i p0 y)
    psi0 = lambda y: (2 * pi * a0 ** 2) ** (-mpf(1) / 4) * exp(-(y - q0) ** 2 / (4 * a0 ** 2) + 1j * p0 * y)
    kernel = lambda y: exp(1j * (x - y) ** 2 / (2 * t)) / sqrt(2 * pi * 1j * t)
    return quad(lambda y: kernel(y) * psi0(y), [-inf, q0, inf])


def coherent_density(x, t, q0, p0, m, w):
    # |psi|^2 follows the classical trajectory with the ground-state width
    a = m * w
    q = q0 * cos(w * t) + p0 / (m * w) * sin(w * t)
    return sqrt(a / pi) * exp(-a * (x - q) ** 2)


def periodic_profile(theta, n):
    return (1 + 2 * nsum(lambda k: cos(k * theta) / (1 + k * k), [1, n])) / (2 * pi)


def gauss_pair():
    # f = (1 + 0.3 x) e^{-1.5 x^2}, g = e^{-1.5 (y-0.5)^2 + 0.4 i y}, kernel e^{+(x-y)^2/2}
    f = lambda x: (1 + mpf('0.3') * x) * exp(-mpf('1.5') * x * x)
    g = lambda y: exp(-mpf('1.5') * (y - mpf('0.5')) ** 2 + mpf('0.4') * 1j * y)
    h = lambda x, y: exp((x - y) ** 2 / 2) * f(x) * g(y).conjugate()
    re = quad(lambda x, y: h(x, y).real, [-inf, inf], [-inf, inf])
    im = quad(lambda x, y: h(x, y).imag, [-inf, inf], [-inf, inf])
    return mpc(re, im)


if __name__ == "__main__":
    for L in (1, 2, 5, 10, 20):
        one = norm_unit_gaussian(mpf(L), 1)
        print(f"norm L={L}: d=1 {mp.nstr(one, 18)}  d=3 {mp.nstr(one ** 3, 18)}")
    print("even toy", mp.nstr(time_toy(lambda t: 1), 20))
    print("odd toy", mp.nstr(time_toy(lambda t: t), 20))
    print("free packet", mp.nstr(free_packet(mpf('0.7'), mpf('1.3'), mpf(1), mpf('0.5'), mpf(1)), 20))
    print("coherent density", mp.nstr(coherent_density(mpf('0.4'), mpf('2.1'), mpf(1), mpf('0.5'), mpf('1.3'), mpf('1.7')), 20))
    print("k_2000(0)", mp.nstr(periodic_profile(0, 2000), 20))
    print("k_2000(pi)", mp.nstr(periodic_profile(pi, 2000), 20))
    print("k(0) series limit", mp.nstr(periodic_profile(0, inf), 20), mp.nstr(coth(pi) / 2, 20))
    print("gauss pair", mp.nstr(gauss_pair(), 20))
    print("sin^2(1)", mp.nstr(sin(1) ** 2, 20), "cosh^2(0.5)", mp.nstr(cosh(mpf('0.5')) ** 2, 20))
    print("sinh1 cosh1", mp.nstr(sinh(1), 20), mp.nstr(cosh(1), 20), "e^-0.375", mp.nstr(exp(-mpf('0.375')), 20))
