"""Non-local operator models: symbols, spectral measures, and grid application.

A :class:`StableModel` describes one generator from the supported family

* ``IsotropicFractional`` — symbol exactly ``-|lam|^alpha``;
* ``SmoothSpectralDensity`` — symbol ``-∫_{S^{d-1}} |<lam, s>|^alpha mu(ds)``
  for a strictly positive angular density;
* ``Cylindrical`` — sum of one-dimensional fractional derivatives along the
  coordinate axes (spectral measure a sum of Dirac atoms);
* ``Truncated`` — isotropic jump measure truncated at a finite radius
  (numerical symbol, no scaling invariance);
* ``Relativistic`` — symbol ``-(|lam|^2 + m^(2/alpha))^(alpha/2) + m``.

Operations: :func:`symbol` evaluates the symbol, :func:`levy_apply` applies the
operator to a grid function either by singular quadrature in polar coordinates
(real-space path) or by a Fourier multiplier (spectral path), and
:func:`carre_du_champ` evaluates the bilinear increment form
``∫ (u(x+y)-u(x)) (v(x+y)-v(x)) nu(dy)`` with the same quadrature.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from ._numerics import gauss_jacobi_01, gauss_legendre_01, grid_eval

__all__ = [
    "ModelKind",
    "StableModel",
    "SymbolValue",
    "symbol",
    "symbol_array",
    "levy_apply",
    "carre_du_champ",
    "stable_intensity_constant",
]


class ModelKind(enum.Enum):
    """Supported operator families."""

    ISOTROPIC_FRACTIONAL = "IsotropicFractional"
    SMOOTH_SPECTRAL_DENSITY = "SmoothSpectralDensity"
    CYLINDRICAL = "Cylindrical"
    TRUNCATED = "Truncated"
    RELATIVISTIC = "Relativistic"


#: kinds whose jump measure is the polar power law rho^{-1-alpha} drho mu(ds)
STABLE_QUADRATURE_KINDS = frozenset(
    {
        ModelKind.ISOTROPIC_FRACTIONAL,
        ModelKind.SMOOTH_SPECTRAL_DENSITY,
        ModelKind.CYLINDRICAL,
        ModelKind.TRUNCATED,
    }
)

#: kinds with exact parabolic scaling p(t, y) = t^{-d/a} p(1, t^{-1/a} y)
SELF_SIMILAR_KINDS = frozenset(
    {
        ModelKind.ISOTROPIC_FRACTIONAL,
        ModelKind.SMOOTH_SPECTRAL_DENSITY,
        ModelKind.CYLINDRICAL,
    }
)


def stable_intensity_constant(alpha: float) -> float:
    """c_alpha = int_0^inf (1 - cos r) r^{-1-alpha} dr for alpha in (0, 2).

    Relates the polar jump measure to the angular measure in the symbol:
    a jump measure rho^{-1-alpha} drho mu~(ds) with mu~ = mu / c_alpha has
    symbol -∫ |<lam, s>|^alpha mu(ds).
    """
    return float(
        special.gamma(2.0 - alpha)
        * math.cos(math.pi * alpha / 2.0)
        / (alpha * (1.0 - alpha))
    )


@dataclass(frozen=True)
class SymbolValue:
    """Value of the symbol at one frequency; real and <= 0 for every kind."""

    re: float


def _uniform_circle_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * np.pi * np.arange(n) / n
    directions = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return theta, directions


@dataclass(frozen=True)
class StableModel:
    """Immutable specification of one non-local operator.

    Construct through the factory classmethods (:meth:`isotropic`,
    :meth:`smooth_density`, :meth:`cylindrical`, :meth:`truncated`,
    :meth:`relativistic`) which fill in the spherical quadrature.
    """

    kind: ModelKind
    alpha: float
    dim: int
    mass: float = 0.0
    trunc_radius: Optional[float] = None
    spectral_density: Optional[Callable[[np.ndarray], np.ndarray]] = None
    atom_weights: Optional[tuple[float, ...]] = None
    sphere_nodes: int = 256
    eta: Optional[float] = None
    # filled in __post_init__
    _directions: np.ndarray = field(default=None, repr=False, compare=False)
    _mu_weights: np.ndarray = field(default=None, repr=False, compare=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # -- construction ------------------------------------------------------
    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie strictly in (0, 1), got {self.alpha}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.kind is ModelKind.RELATIVISTIC:
            if self.mass < 0:
                raise ValueError(f"mass must be >= 0, got {self.mass}")
        if self.kind is ModelKind.TRUNCATED:
            if self.trunc_radius is None or self.trunc_radius <= 0:
                raise ValueError("Truncated kind requires trunc_radius > 0")
        directions, weights = self._build_sphere_measure()
        object.__setattr__(self, "_directions", directions)
        object.__setattr__(self, "_mu_weights", weights)
        half = len(directions) // 2
        paired = len(directions) % 2 == 0 and bool(
            np.allclose(directions[half:], -directions[:half], atol=1e-12)
            and np.allclose(weights[half:], weights[:half], rtol=1e-8, atol=1e-15)
        )
        object.__setattr__(self, "_antipodal_half", half if paired else 0)
        if self.eta is None:
            object.__setattr__(self, "eta", self._estimate_eta())
        if self.eta < 1.0:
            raise ValueError(f"eta must be >= 1, got {self.eta}")

    def _build_sphere_measure(self) -> tuple[np.ndarray, np.ndarray]:
        """Angular measure mu as quadrature nodes and weights, normalized so
        the isotropic kinds have A(e) := ∫|<e,s>|^alpha mu(ds) = 1."""
        kind, d, a = self.kind, self.dim, self.alpha
        if kind is ModelKind.CYLINDRICAL:
            w = self.atom_weights or tuple(1.0 for _ in range(d))
            if len(w) != d or any(x <= 0 for x in w):
                raise ValueError("atom_weights must be d positive numbers")
            eye = np.eye(d)
            dirs = np.concatenate([eye, -eye])
            wts = np.concatenate([np.asarray(w) / 2.0] * 2)
            return dirs, wts
        if d == 1:
            dirs = np.array([[1.0], [-1.0]])
            if kind is ModelKind.SMOOTH_SPECTRAL_DENSITY and self.spectral_density:
                vals = np.asarray(self.spectral_density(dirs[:, 0]), dtype=float)
                if abs(vals[0] - vals[1]) > 1e-9 * max(abs(vals[0]), 1.0):
                    raise ValueError("spectral density must be symmetric")
                return dirs, np.full(2, vals[0])
            return dirs, np.full(2, 0.5)
        # d == 2: uniform angular grid
        n = int(self.sphere_nodes)
        if n < 256:
            raise ValueError("sphere_nodes must be >= 256 for d=2")
        theta, dirs = _uniform_circle_nodes(n)
        if kind is ModelKind.SMOOTH_SPECTRAL_DENSITY:
            if self.spectral_density is None:
                raise ValueError("SmoothSpectralDensity requires spectral_density")
            dens = np.asarray(self.spectral_density(theta), dtype=float)
            if dens.shape != theta.shape or np.any(dens <= 0):
                raise ValueError("spectral density must be strictly positive")
            odd = np.abs(dens - np.roll(dens, n // 2))
            if odd.max() > 1e-9 * dens.max():
                raise ValueError("spectral density must be symmetric (f(th+pi)=f(th))")
            return dirs, dens * (2.0 * np.pi / n)
        # isotropic / truncated base: normalize so A(e) == 1
        w = np.full(n, 2.0 * np.pi / n)
        norm = float(np.sum(w * np.abs(dirs[:, 0]) ** a))
        return dirs, w / norm

    def _estimate_eta(self, n_dirs: int = 64) -> float:
        if self.kind is ModelKind.RELATIVISTIC:
            return 1.0
        if self.dim == 1:
            a_vals = np.array([float(self._mu_weights.sum())])
        else:
            phi = np.pi * np.arange(n_dirs) / n_dirs
            e = np.stack([np.cos(phi), np.sin(phi)], axis=1)
            a_vals = np.abs(e @ self._directions.T) ** self.alpha @ self._mu_weights
        return float(max(a_vals.max(), 1.0 / a_vals.min()) * (1.0 + 1e-12))

    # -- factories ---------------------------------------------------------
    @classmethod
    def isotropic(cls, alpha: float, dim: int, sphere_nodes: int = 256):
        return cls(ModelKind.ISOTROPIC_FRACTIONAL, alpha, dim, sphere_nodes=sphere_nodes)

    @classmethod
    def smooth_density(
        cls,
        alpha: float,
        dim: int,
        density: Callable[[np.ndarray], np.ndarray],
        sphere_nodes: int = 256,
    ):
        return cls(
            ModelKind.SMOOTH_SPECTRAL_DENSITY,
            alpha,
            dim,
            spectral_density=density,
            sphere_nodes=sphere_nodes,
        )

    @classmethod
    def cylindrical(
        cls, alpha: float, dim: int, atom_weights: Optional[Sequence[float]] = None
    ):
        aw = tuple(atom_weights) if atom_weights is not None else None
        return cls(ModelKind.CYLINDRICAL, alpha, dim, atom_weights=aw)

    @classmethod
    def truncated(cls, alpha: float, dim: int, trunc_radius: float, sphere_nodes: int = 256):
        return cls(
            ModelKind.TRUNCATED, alpha, dim, trunc_radius=trunc_radius,
            sphere_nodes=sphere_nodes,
        )

    @classmethod
    def relativistic(cls, alpha: float, dim: int, mass: float):
        return cls(ModelKind.RELATIVISTIC, alpha, dim, mass=mass)

    # -- measure accessors ---------------------------------------------------
    @property
    def directions(self) -> np.ndarray:
        """Angular quadrature nodes on the unit sphere, shape (n, d)."""
        return self._directions

    @property
    def mu_weights(self) -> np.ndarray:
        """Angular quadrature weights of the symbol measure mu."""
        return self._mu_weights

    @property
    def levy_weights(self) -> np.ndarray:
        """Weights of the polar jump measure mu~ = mu / c_alpha."""
        return self._mu_weights / stable_intensity_constant(self.alpha)

    @property
    def symmetric(self) -> bool:
        """True when the density p(t, .) is even in y (all supported kinds)."""
        return True

    def angular_symbol_table(self, n_table: int = 8192) -> tuple[np.ndarray, np.ndarray]:
        """Tabulated A(phi) = ∫ |cos(phi - th)|^alpha mu(dth) for d=2 kinds."""
        key = ("angular_table", n_table)
        if key not in self._cache:
            phi = 2.0 * np.pi * np.arange(n_table + 1) / n_table
            theta = np.arctan2(self._directions[:, 1], self._directions[:, 0])
            a = (
                np.abs(np.cos(phi[:, None] - theta[None, :])) ** self.alpha
            ) @ self._mu_weights
            self._cache[key] = (phi, a)
        return self._cache[key]


def _truncated_profile(model: StableModel, n_grid: int = 20000, z_max: float = 4000.0):
    """Tabulates G(z) = int_0^z (cos w - 1) w^{-1-alpha} dw for the truncated
    symbol  Psi_K(lam) = sum_j w~_j |<lam, s_j>|^alpha G(K |<lam, s_j>|)."""
    key = ("trunc_profile", n_grid, z_max)
    if key in model._cache:
        return model._cache[key]
    a = model.alpha
    # dense where the integrand is largest, logarithmic farther out
    z_lin = np.linspace(0.0, 20.0, n_grid // 2)
    z_log = np.geomspace(20.0, z_max, n_grid // 2 + 1)[1:]
    z = np.concatenate([z_lin, z_log])
    w = np.where(z > 0, z, 1.0)
    f = np.where(z > 0, (np.cos(w) - 1.0) / w ** (1.0 + a), 0.0)
    g = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(z))])
    c_a = stable_intensity_constant(a)
    model._cache[key] = (z, g, c_a)
    return model._cache[key]


def _truncated_symbol(model: StableModel, u_abs: np.ndarray) -> np.ndarray:
    """Psi contribution per angular node argument u = <lam, s> for Truncated."""
    z_tab, g_tab, c_a = _truncated_profile(model)
    z = model.trunc_radius * u_abs
    out = np.interp(z, z_tab, g_tab)
    big = z > z_tab[-1]
    if np.any(big):
        zb = z[big]
        # two-term oscillatory asymptotics of the remainder of G beyond the table
        rem = (
            -(zb ** (-model.alpha)) / model.alpha
            + np.sin(zb) * zb ** (-1.0 - model.alpha)
            - (1.0 + model.alpha) * np.cos(zb) * zb ** (-2.0 - model.alpha)
        )
        out[big] = -c_a - rem
    return u_abs**model.alpha * out


def symbol_array(model: StableModel, lam: np.ndarray) -> np.ndarray:
    """Vectorized symbol: ``lam`` has shape (..., d); returns shape (...)."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape[-1] != model.dim:
        raise ValueError(f"lambda must have last axis {model.dim}")
    if not np.all(np.isfinite(lam)):
        raise ValueError("non-finite frequency")
    kind, a = model.kind, model.alpha
    if kind is ModelKind.ISOTROPIC_FRACTIONAL:
        r = np.linalg.norm(lam, axis=-1)
        return -(r**a)
    if kind is ModelKind.CYLINDRICAL:
        w = np.asarray(model.atom_weights or (1.0,) * model.dim)
        return -np.sum(w * np.abs(lam) ** a, axis=-1)
    if kind is ModelKind.RELATIVISTIC:
        r2 = np.sum(lam**2, axis=-1)
        m = model.mass
        if m == 0.0:
            return -(r2 ** (a / 2.0))
        return -((r2 + m ** (2.0 / a)) ** (a / 2.0)) + m
    if kind is ModelKind.SMOOTH_SPECTRAL_DENSITY:
        if model.dim == 1:
            return -model.mu_weights.sum() * np.abs(lam[..., 0]) ** a
        r = np.linalg.norm(lam, axis=-1)
        phi = np.mod(np.arctan2(lam[..., 1], lam[..., 0]), 2.0 * np.pi)
        phi_tab, a_tab = model.angular_symbol_table()
        return -(r**a) * np.interp(phi, phi_tab, a_tab)
    if kind is ModelKind.TRUNCATED:
        u = lam @ model.directions.T  # (..., n_sphere)
        contrib = _truncated_symbol(model, np.abs(u))
        return contrib @ model.levy_weights
    raise ValueError(f"unknown kind {kind}")


def symbol(model: StableModel, lam) -> SymbolValue:
    """Symbol at a single frequency vector (or scalar for d=1)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (model.dim,):
        raise ValueError(f"lambda must be a vector of length {model.dim}")
    return SymbolValue(re=float(symbol_array(model, lam[None, :])[0]))


# ---------------------------------------------------------------------------
# grid application
# ---------------------------------------------------------------------------

def _inner_rule(model: StableModel, r0: float, n_inner: int):
    """Gauss-Jacobi rule for the singular head (0, min(r0, K)].

    The weight rho^{1-alpha} is absorbed into the rule; the symmetric second
    difference supplies the remaining rho^2 smoothness, so the transformed
    integrand is regular.  Weights include the full rho^{-1-alpha} factor and
    multiply the raw second difference.
    """
    a = model.alpha
    cap = model.trunc_radius if model.kind is ModelKind.TRUNCATED else None
    r1 = min(r0, cap) if cap is not None else r0
    u_in, w_in = gauss_jacobi_01(n_inner, 1.0 - a)
    rho_in = r1 * u_in
    w_inner = r1 ** (2.0 - a) * w_in / rho_in**2
    return rho_in, w_inner


def _panel_rule(a: float, lo: float, hi: float, panel_len: float, n_gl: int):
    """Composite Gauss-Legendre on (lo, hi] against the explicit weight
    rho^{-1-alpha}; the panel length bounds how fast an oscillation the rule
    can resolve."""
    if hi <= lo:
        return np.empty(0), np.empty(0)
    n_panels = max(1, int(math.ceil((hi - lo) / panel_len)))
    edges = np.linspace(lo, hi, n_panels + 1)
    u, w = gauss_legendre_01(n_gl)
    rho = (edges[:-1, None] + np.diff(edges)[:, None] * u[None, :]).ravel()
    wts = (np.diff(edges)[:, None] * w[None, :]).ravel() * rho ** (-1.0 - a)
    return rho, wts


def _outer_rule(model: StableModel, grid, extension: str, r0: float, n_gl: int):
    """Radial rule for (r0, infinity) [or (r0, K] when truncated].

    Shape of the rule depends on how the grid function is extended:

    * periodic, axis-aligned directions (d=1 and every Cylindrical model):
      phi(x + rho s) is exactly 2L-periodic in rho, so the infinite tail
      folds onto a single period with the lattice weight
      sum_m (rho + 2Lm)^{-1-alpha} = (2L)^{-1-alpha} zeta(1+alpha, rho/2L)
      (Hurwitz zeta); composite Gauss-Legendre then sees a smooth weight.
    * periodic, generic directions (isotropic / smooth-density in d=2):
      composite panels out to R_cap, then the substitution rho = R_cap/u
      turns the far tail into a Gauss-Jacobi rule with weight u^{alpha-1};
      unresolved oscillation beyond R_cap is O(R_cap^{-1-alpha}).
    * constant extension: composite panels out to 3L, beyond which the
      extended function is exactly constant along every ray, so the tail
      integral is exact (handled by the caller via `tail_weight`).

    Returns (rho, weights, tail_weight, tail_rho): `tail_weight` is nonzero
    only for the constant extension and multiplies the saturated far value
    sampled at radius `tail_rho`.
    """
    a = model.alpha
    two_l = 2.0 * grid.half_extent
    cap = model.trunc_radius if model.kind is ModelKind.TRUNCATED else None
    key = ("outer_rule", grid.half_extent, grid.spacing, extension, r0, n_gl, grid.dim)
    if key in model._cache:
        return model._cache[key]
    panel_len = 2.0
    if cap is not None:
        rho, wts = _panel_rule(a, r0, cap, panel_len, n_gl)
        out = (rho, wts, 0.0, 0.0)
    elif extension == "periodic" and (
        model.dim == 1 or model.kind is ModelKind.CYLINDRICAL
    ):
        n_panels = max(8, int(math.ceil(two_l / panel_len)))
        edges = np.linspace(r0, r0 + two_l, n_panels + 1)
        u, w = gauss_legendre_01(n_gl)
        rho = (edges[:-1, None] + np.diff(edges)[:, None] * u[None, :]).ravel()
        wts = (np.diff(edges)[:, None] * w[None, :]).ravel()
        wts = wts * two_l ** (-1.0 - a) * special.zeta(1.0 + a, rho / two_l)
        out = (rho, wts, 0.0, 0.0)
    elif extension == "periodic":
        r_cap = max(32.0, two_l)
        rho, wts = _panel_rule(a, r0, r_cap, panel_len, n_gl)
        u_t, w_t = gauss_jacobi_01(max(n_gl, 12), a - 1.0)
        rho = np.concatenate([rho, r_cap / u_t])
        wts = np.concatenate([wts, r_cap ** (-a) * w_t])
        out = (rho, wts, 0.0, 0.0)
    else:  # constant extension: rays saturate beyond 3L
        r_sat = 3.0 * grid.half_extent
        rho, wts = _panel_rule(a, r0, r_sat, panel_len, n_gl)
        out = (rho, wts, r_sat ** (-a) / a, 4.0 * grid.half_extent * math.sqrt(model.dim) + r_sat)
    model._cache[key] = out
    return out


def _check_grid_for_quadrature(grid, r0: float) -> None:
    if grid.spacing > r0 / 4.0:
        raise ValueError(
            f"grid too coarse for singular quadrature: spacing {grid.spacing:.4g} "
            f"exceeds r0/4 = {r0 / 4.0:.4g}"
        )


_SHIFT_CHUNK = 4_000_000  # max interpolation points per map_coordinates call


def _spline_coeffs(phi: np.ndarray, extension: str) -> tuple[np.ndarray, str]:
    from scipy.ndimage import spline_filter

    mode = "grid-wrap" if extension == "periodic" else "nearest"
    return spline_filter(phi, order=3, mode=mode, output=np.float64), mode


def _shifted_values(
    coeffs: np.ndarray,
    mode: str,
    base_idx: np.ndarray,
    shifts_idx: np.ndarray,
) -> np.ndarray:
    """Evaluate the spline at base grid points displaced by each shift.

    base_idx: (n_pts, d) fractional indices of the grid points;
    shifts_idx: (n_shift, d) displacements in index units.
    Returns (n_shift, n_pts).
    """
    from scipy.ndimage import map_coordinates

    n_shift, n_pts = shifts_idx.shape[0], base_idx.shape[0]
    out = np.empty((n_shift, n_pts))
    rows_per_chunk = max(1, _SHIFT_CHUNK // max(n_pts, 1))
    for lo in range(0, n_shift, rows_per_chunk):
        hi = min(lo + rows_per_chunk, n_shift)
        coords = base_idx[None, :, :] + shifts_idx[lo:hi, None, :]
        flat = [coords[..., k].ravel() for k in range(coords.shape[-1])]
        vals = map_coordinates(coeffs, flat, order=3, mode=mode, prefilter=False)
        out[lo:hi] = vals.reshape(hi - lo, n_pts)
    return out


def levy_apply(
    model: StableModel,
    phi: np.ndarray,
    grid,
    extension: str = "periodic",
    method: str = "quadrature",
    r0: float = 1.0,
    n_inner: int = 24,
    n_outer: int = 12,
) -> np.ndarray:
    """Apply the generator to a grid function.

    method="quadrature": singular polar quadrature over the jump measure.
    Each angular node is paired with its antipode through the symmetric
    second difference phi(x+rho s)+phi(x-rho s)-2 phi(x) at half weight,
    which removes the odd first-order part exactly and leaves an O(rho^2)
    integrand at the origin.  Available for the four stable kinds.

    method="spectral": Fourier multiplier by the symbol; periodic extension
    only, available for every kind (including Relativistic, whose jump
    measure is not a polar power law).

    ``n_inner`` is the Gauss-Jacobi order of the singular head and
    ``n_outer`` the Gauss-Legendre order per unit-length panel of the tail
    rules (see :func:`_outer_rule`).
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != model.dim:
        raise ValueError(f"phi must be a {model.dim}-d grid function")
    if method == "spectral":
        if extension != "periodic":
            raise ValueError("spectral path requires periodic extension")
        lam = _dual_grid(grid)
        mult = symbol_array(model, lam)
        axes = tuple(range(phi.ndim))
        return np.fft.irfftn(np.fft.rfftn(phi) * mult, s=phi.shape, axes=axes)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    if model.kind not in STABLE_QUADRATURE_KINDS:
        raise ValueError(
            "quadrature path supports the stable kinds only; "
            "use method='spectral' for Relativistic"
        )
    _check_grid_for_quadrature(grid, r0)
    rho_in, w_in = _inner_rule(model, r0, n_inner)
    rho_out, w_out, w_tail, rho_tail = _outer_rule(model, grid, extension, r0, n_outer)
    rho = np.concatenate([rho_in, rho_out])
    w_rho = np.concatenate([w_in, w_out])
    if w_tail:
        rho = np.concatenate([rho, [rho_tail]])
        w_rho = np.concatenate([w_rho, [w_tail]])
    coeffs, mode = _spline_coeffs(phi, extension)
    pts = _grid_points(grid).reshape(-1, model.dim)
    base_idx = (pts + grid.half_extent) / grid.spacing
    out = np.zeros(pts.shape[0])
    w_total = float(w_rho.sum())
    # antipodal node pairs are visited jointly through the second difference,
    # so only half the sphere needs explicit shifts when the set is paired
    half = model._antipodal_half
    if half:
        dir_w = zip(
            model.directions[:half],
            0.5 * (model.levy_weights[:half] + model.levy_weights[half:]),
        )
    else:
        dir_w = zip(model.directions, 0.5 * model.levy_weights)
    for s_vec, w_s in dir_w:
        shifts = (rho[:, None] * s_vec[None, :]) / grid.spacing
        v_plus = _shifted_values(coeffs, mode, base_idx, shifts)
        v_minus = _shifted_values(coeffs, mode, base_idx, -shifts)
        acc = w_rho @ (v_plus + v_minus)
        out += w_s * (acc - 2.0 * w_total * phi.ravel())
    return out.reshape(phi.shape)


def carre_du_champ(
    model: StableModel,
    u: np.ndarray,
    v: np.ndarray,
    grid,
    extension: str = "periodic",
    r0: float = 1.0,
    n_inner: int = 24,
    n_outer: int = 12,
) -> np.ndarray:
    """Bilinear increment form Gamma(u, v)(x) = ∫ du(y) dv(y) nu(dy) with
    du(y) = u(x+y) - u(x); the product of increments is O(|y|^2) near 0, so
    the singular head uses the same Gauss-Jacobi rule (full angular weights,
    no antipodal pairing: every jump direction is visited once)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != model.dim:
        raise ValueError("u, v must be grid functions of matching shape")
    if model.kind not in STABLE_QUADRATURE_KINDS:
        raise ValueError("carre_du_champ requires a stable-kind jump measure")
    _check_grid_for_quadrature(grid, r0)
    rho_in, w_in = _inner_rule(model, r0, n_inner)
    rho_out, w_out, w_tail, rho_tail = _outer_rule(model, grid, extension, r0, n_outer)
    rho = np.concatenate([rho_in, rho_out])
    w_rho = np.concatenate([w_in, w_out])
    if w_tail:
        rho = np.concatenate([rho, [rho_tail]])
        w_rho = np.concatenate([w_rho, [w_tail]])
    cu, mode = _spline_coeffs(u, extension)
    cv, _ = _spline_coeffs(v, extension)
    pts = _grid_points(grid).reshape(-1, model.dim)
    base_idx = (pts + grid.half_extent) / grid.spacing
    u_flat, v_flat = u.ravel(), v.ravel()
    out = np.zeros(pts.shape[0])
    for s_vec, w_s in zip(model.directions, model.levy_weights):
        shifts = (rho[:, None] * s_vec[None, :]) / grid.spacing
        du = _shifted_values(cu, mode, base_idx, shifts) - u_flat[None, :]
        dv = _shifted_values(cv, mode, base_idx, shifts) - v_flat[None, :]
        out += w_s * (w_rho @ (du * dv))
    return out.reshape(u.shape)


# -- grid helpers (duck-typed against kernel_engine.GridSpec) ---------------

def _grid_points(grid) -> np.ndarray:
    ax = grid.axis
    if grid.dim == 1:
        return ax[:, None]
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    return np.stack([xx, yy], axis=-1)


def _dual_grid(grid) -> np.ndarray:
    n, h = grid.points_per_axis, grid.spacing
    k_full = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
    k_half = 2.0 * np.pi * np.fft.rfftfreq(n, d=h)
    if grid.dim == 1:
        return k_half[:, None]
    kx, ky = np.meshgrid(k_full, k_half, indexing="ij")
    return np.stack([kx, ky], axis=-1)
