"""Oracles for the Hölder-drift flow branch and the relativistic kernel.

1. ODE x' = |x|^(1/2), x(0) = 0: the closed-form positive branch is (s/2)^2.
   Confirms that mollified-drift RK4 started at the zero selects that branch
   and reaches 0.25 at s=1 within 1e-3 (the mollified drift is strictly
   positive at 0, which breaks the tie upward).
2. Relativistic density p(t,x) = e^{mt} int g(u,x) e^{-m^{2/a}u} th_a(t,u) du,
   th the one-sided (alpha/2)-stable density -- computed two independent ways:
   (a) u-quadrature with scipy's stable pdf, (b) direct Fourier inversion of
   exp(t*Psi_rel).  Values frozen for the build's tabulated-theta engine.

Run:  python3 oracles/oracle_flow_and_relativistic.py
"""
import numpy as np
from scipy import integrate, stats


def mollified_abs_sqrt(delta, nquad=128):
    """F_delta = bump_delta * |.|^(1/2) with a unit-mass C^inf bump."""
    t, w = np.polynomial.legendre.leggauss(nquad)  # nodes on (-1, 1)
    bump = np.exp(-1.0 / (1.0 - t**2))
    w_eff = w * bump
    w_eff /= w_eff.sum()
    y = delta * t

    def F(x):
        return np.sum(w_eff * np.sqrt(np.abs(x - y)))

    return F


def rk4_flow(F, x0, s_end, h):
    x = x0
    s = 0.0
    n = int(round(s_end / h))
    for _ in range(n):
        k1 = F(x)
        k2 = F(x + 0.5 * h * k1)
        k3 = F(x + 0.5 * h * k2)
        k4 = F(x + h * k3)
        x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        s += h
    return x


def relativistic_density_subordination(alpha, m, t, x):
    a = alpha / 2.0
    scale = np.cos(np.pi * a / 2.0) ** (1.0 / a)
    dist = stats.levy_stable(a, 1.0, loc=0.0, scale=scale)
    tfac = t ** (-2.0 / alpha)

    def integrand(u):
        theta = tfac * dist.pdf(tfac * u)
        g = np.exp(-(x**2) / (4.0 * u)) / np.sqrt(4.0 * np.pi * u)
        return g * np.exp(-(m ** (2.0 / alpha)) * u) * theta

    val, _ = integrate.quad(integrand, 0, np.inf, limit=400)
    return np.exp(m * t) * val


def relativistic_density_fourier(alpha, m, t, x):
    def psi(lam):
        return -((lam**2 + m ** (2.0 / alpha)) ** (alpha / 2.0)) + m

    val, _ = integrate.quad(
        lambda lam: np.exp(t * psi(lam)) * np.cos(lam * x), 0, np.inf, limit=400
    )
    return val / np.pi


def main():
    print("== Hölder flow: positive branch (s/2)^2 ==")
    for h in (1e-2, 1e-3):
        delta = h ** (1.0 / (1.0 - 0.5))  # delta = h^(1/(1-beta)), beta = 1/2
        F = mollified_abs_sqrt(delta)
        x1 = rk4_flow(F, 0.0, 1.0, h)
        print(f"h={h}: theta(1) = {x1!r}  (target 0.25, err {abs(x1-0.25):.2e})")
    # linear drift sanity: x' = x, x(0)=1 -> e
    xe = rk4_flow(lambda x: x, 1.0, 1.0, 1e-3)
    print(f"linear drift: theta(1) = {xe!r} err {abs(xe - np.e):.2e}")

    print("== relativistic kernel, two independent paths ==")
    for (alpha, m, t, x) in [
        (0.7, 1.0, 0.5, 0.0),
        (0.7, 1.0, 0.5, 1.0),
        (0.7, 1.0, 1.0, 0.5),
        (0.7, 0.0, 0.5, 0.5),
        (0.6, 2.0, 0.5, 0.5),
    ]:
        v_sub = relativistic_density_subordination(alpha, m, t, x)
        v_fou = relativistic_density_fourier(alpha, m, t, x)
        rel = abs(v_sub - v_fou) / v_fou
        print(
            f"alpha={alpha} m={m} t={t} x={x}: sub={v_sub!r} fourier={v_fou!r} "
            f"rel={rel:.2e}"
        )
        assert rel < 1e-6


if __name__ == "__main__":
    main()
