"""Oracle for the exact-sampling transformations used by the sampler.

Pins down, before the build:
  1. the one-parameter transformation for symmetric alpha-stable samples
     (char. function exp(-|lam|^alpha)) -- Monte Carlo characteristic function
     against the closed form;
  2. Kanter's transformation for the one-sided a-stable subordinator
     (Laplace transform exp(-s^a)) -- Monte Carlo Laplace transform;
  3. the scipy.stats.levy_stable parametrization that reproduces the same
     subordinator density (scale = cos(pi a/2)^(1/a), beta = 1);
  4. the d=2 isotropic density at the origin and one radial value via the
     radial (Bessel) inversion integral.

Run:  python3 oracles/oracle_samplers.py
"""
import numpy as np
from scipy import integrate, special, stats


def sample_symmetric_stable(alpha, n, rng):
    """Symmetric alpha-stable, char fn exp(-|lam|^alpha), via the classical
    uniform-angle/exponential transformation."""
    u = rng.uniform(-np.pi / 2, np.pi / 2, size=n)
    w = rng.exponential(1.0, size=n)
    return (
        np.sin(alpha * u)
        / np.cos(u) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
    )


def sample_one_sided_stable(a, n, rng):
    """One-sided a-stable (0<a<1), Laplace transform exp(-s^a), via Kanter's
    transformation."""
    v = rng.uniform(0.0, np.pi, size=n)
    w = rng.exponential(1.0, size=n)
    A = (
        np.sin(a * v) ** (a / (1.0 - a))
        * np.sin((1.0 - a) * v)
        / np.sin(v) ** (1.0 / (1.0 - a))
    )
    return (A / w) ** ((1.0 - a) / a)


def main():
    rng = np.random.default_rng(12345)
    n = 2_000_000

    print("== symmetric stable: MC char fn vs exp(-|lam|^alpha) ==")
    for alpha in (0.5, 0.7):
        x = sample_symmetric_stable(alpha, n, rng)
        for lam in (0.5, 1.0, 2.0):
            emp = np.cos(lam * x).mean()
            ref = np.exp(-abs(lam) ** alpha)
            err = abs(emp - ref)
            print(f"alpha={alpha} lam={lam}: emp={emp:.6f} ref={ref:.6f} err={err:.2e}")
            assert err < 4.0 / np.sqrt(n) * 1.5, (alpha, lam, emp, ref)

    print("== one-sided stable: MC Laplace vs exp(-s^a) ==")
    for a in (0.25, 0.35, 0.45):
        s_samp = sample_one_sided_stable(a, n, rng)
        for s in (0.5, 1.0, 2.0):
            emp = np.exp(-s * s_samp).mean()
            ref = np.exp(-(s**a))
            err = abs(emp - ref)
            print(f"a={a} s={s}: emp={emp:.6f} ref={ref:.6f} err={err:.2e}")
            assert err < 4.0 / np.sqrt(n) * 1.5, (a, s, emp, ref)

    print("== scipy levy_stable parametrization for the subordinator density ==")
    for a in (0.25, 0.35):
        scale = np.cos(np.pi * a / 2.0) ** (1.0 / a)
        dist = stats.levy_stable(a, 1.0, loc=0.0, scale=scale)
        mass = integrate.quad(dist.pdf, 0, np.inf, limit=200)[0]
        print(f"a={a}: total mass = {mass:.8f}")
        assert abs(mass - 1.0) < 1e-6
        for s in (0.5, 1.0, 2.0):
            lap = integrate.quad(
                lambda u: np.exp(-s * u) * dist.pdf(u), 0, np.inf, limit=200
            )[0]
            ref = np.exp(-(s**a))
            print(f"a={a} s={s}: laplace={lap:.8f} ref={ref:.8f}")
            assert abs(lap - ref) < 1e-6, (a, s, lap, ref)

    print("== d=2 isotropic density, radial inversion ==")
    for alpha in (0.6, 0.7):
        closed0 = special.gamma(2.0 / alpha) / (2.0 * np.pi * alpha)
        quad0 = (
            integrate.quad(lambda lam: np.exp(-(lam**alpha)) * lam, 0, np.inf)[0]
            / (2 * np.pi)
        )
        assert abs(quad0 - closed0) < 1e-9
        print(f"alpha={alpha}: p2(1,0) = {closed0!r}")
        for r in (1.0, 3.0):
            val = (
                integrate.quad(
                    lambda lam: np.exp(-(lam**alpha)) * special.j0(lam * r) * lam,
                    0,
                    60.0,
                    limit=800,
                )[0]
                / (2 * np.pi)
            )
            print(f"alpha={alpha}: p2(1,{r}) = {val!r}")


if __name__ == "__main__":
    main()
