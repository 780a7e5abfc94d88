"""Enhanced data for the three equations: resonant areas, renormalization
constants, the symmetric/antisymmetric split, and the translation group
acting on drivers.

The lattice sums defining the constants are truncated at the grid Nyquist,
the same truncation under which the noise is sampled, so Monte Carlo
averages match the constants exactly in expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson

from .grid import FieldPath, SpectralField, TorusGrid, TWO_PI
from .noise import Mollifier, mollify, pam_theta
from .partition import DyadicPartition
from .spectral import antiderivative, default_partition, derivative
from .paraproducts import para_lt, para_gt, resonant


@dataclass(frozen=True)
class EnhancedNoise:
    """Driver, lifted path, and area: the full input of a solver."""

    kind: str  # rde | burgers | pam
    xi: object
    theta: object
    eta: object
    renorm_constant: float | None = None

    def __post_init__(self):
        if self.kind not in ("rde", "burgers", "pam"):
            raise ValueError(f"unknown enhanced-noise kind {self.kind!r}")

    def with_eta(self, eta, constant=None) -> "EnhancedNoise":
        return replace(self, eta=eta, renorm_constant=constant)


# -- matrix-channel helpers -------------------------------------------

def pair_resonant(a: SpectralField, b: SpectralField,
                  part: DyadicPartition | None = None) -> SpectralField:
    """All channel-pair resonant products, row-major (k, l) layout."""
    out = []
    for k in range(a.channels):
        for l in range(b.channels):
            out.append(resonant(a.channel(k), b.channel(l), part).coeffs[0])
    return SpectralField(a.grid, np.stack(out))


def sym_antisym_split(eta: SpectralField):
    """Split a matrix-channel field into symmetric and antisymmetric parts."""
    n = math.isqrt(eta.channels)
    if n * n != eta.channels:
        raise ValueError("channel count is not a square matrix layout")
    m = eta.coeffs.reshape((n, n) + eta.grid.shape)
    sym = 0.5 * (m + np.swapaxes(m, 0, 1))
    anti = 0.5 * (m - np.swapaxes(m, 0, 1))
    reshape = lambda x: SpectralField(eta.grid, x.reshape((n * n,) + eta.grid.shape))
    return reshape(sym), reshape(anti)


# -- Burgers area -----------------------------------------------------

def burgers_area(theta_path: FieldPath,
                 part: DyadicPartition | None = None) -> FieldPath:
    """Matrix-valued area of the stochastic convolution: per node,
    resonant products of each component with each spatial derivative."""
    part = part or default_partition(theta_path.grid)
    def one(th):
        dth = derivative(th, 0)
        return pair_resonant(th, dth, part)
    return theta_path.map(one)


# -- renormalization constants ----------------------------------------

def pam_gt(t: float, grid: TorusGrid) -> float:
    """Expected resonant pairing of heat-smoothed noise with itself:
    (2 pi)^-2 sum over nonzero lattice k of exp(-t|k|^2)."""
    if t <= 0:
        raise ValueError("the heat constant needs t > 0")
    r2 = grid.k_abs() ** 2
    return float(np.sum(np.exp(-t * r2[r2 > 0])) / TWO_PI**2)


def pam_c_eps(eps: float, psi: Mollifier, grid: TorusGrid) -> float:
    """Diverging constant of the mollified area:
    (2 pi)^-2 sum over nonzero k of |profile(eps |k|)|^2 / |k|^2."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    r = grid.k_abs()
    nz = r > 0
    w = np.asarray(psi(eps * r[nz]), dtype=np.float64)
    return float(np.sum(w * w / r[nz] ** 2) / TWO_PI**2)


@dataclass(frozen=True)
class RenormConstants:
    """Tabulated renormalization data for one grid and mollifier."""

    grid: TorusGrid
    psi: Mollifier
    eps: float
    c_eps: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "c_eps", pam_c_eps(self.eps, self.psi, self.grid))

    def g(self, t: float) -> float:
        return pam_gt(t, self.grid)


def pam_renormalized_area(xi: SpectralField, eps: float, psi: Mollifier,
                          part: DyadicPartition | None = None) -> SpectralField:
    """Mollified resonant area with its diverging mean removed:
    theta_eps @ xi_eps - c_eps."""
    part = part or default_partition(xi.grid)
    theta_eps = mollify(pam_theta(xi), eps, psi)
    xi_eps = mollify(xi, eps, psi)
    area = resonant(theta_eps, xi_eps, part)
    return area - SpectralField.constant(xi.grid, pam_c_eps(eps, psi, xi.grid),
                                         area.channels)


def pam_area_by_time_integral(xi: SpectralField, t_min: float = 1e-4,
                              t_max: float = 50.0, nodes: int = 129,
                              part: DyadicPartition | None = None) -> SpectralField:
    """Cross-check constructor of the renormalized area as the time integral
    of (P_t xi @ xi - g_t), by Simpson quadrature on a log-spaced t grid.

    The grid truncation makes both the integrand and its subtracted mean
    finite, so the integral converges as t_min -> 0 like the resolved
    ultraviolet tail; used for diagnostics, not as the primary object.
    """
    part = part or default_partition(xi.grid)
    grid = xi.grid
    ts = np.exp(np.linspace(math.log(t_min), math.log(t_max), nodes))
    r2 = grid.k_abs() ** 2
    samples = []
    for t in ts:
        pt = SpectralField(grid, xi.coeffs * np.exp(-t * r2))
        f = resonant(pt, xi, part) - SpectralField.constant(grid, pam_gt(t, grid))
        samples.append(f.coeffs)
    vals = np.stack(samples)  # integrate each coefficient over t
    out = simpson(vals, x=ts, axis=0)
    return SpectralField(grid, out)


def pam_mean_adjusted_area(theta: SpectralField, xi: SpectralField,
                           area: SpectralField, mean: float, t: float,
                           part: DyadicPartition | None = None) -> SpectralField:
    """Affine correction of the renormalized area when the driving noise
    carries a nonzero mean m (continuous-convention zero mode):

        area + (2 pi)^-2 (theta @ m) + t (2 pi)^-2 (m @ xi) + t (2 pi)^-4 m^2.

    Resonant products with a constant reduce to the low-block shadow; the
    formula is provided at this level only (no new sampling is involved).
    """
    part = part or default_partition(theta.grid)
    grid = theta.grid
    m_field = SpectralField.constant(grid, mean / TWO_PI**2)
    out = area + resonant(theta, m_field, part)
    out = out + resonant(m_field, xi, part) * t
    return out + SpectralField.constant(grid, t * (mean / TWO_PI**2) ** 2)


# -- RDE enhancement and the translation group ------------------------

def rde_area(theta: SpectralField, xi: SpectralField,
             part: DyadicPartition | None = None) -> SpectralField:
    """Channel-pairwise resonant area of the localized line driver."""
    return pair_resonant(theta, xi, part)


def enhanced_translate(E: EnhancedNoise, f: SpectralField, g: SpectralField,
                       part: DyadicPartition | None = None) -> EnhancedNoise:
    """Translation action on enhanced drivers: shift the noise by f (with
    antiderivative Phi) and the area by theta@f + Phi@xi + Phi@f + g."""
    if E.kind != "rde":
        raise ValueError("translation is defined for the line-driver enhancement")
    part = part or default_partition(E.xi.grid)
    Phi = antiderivative(f)
    eta = E.eta + pair_resonant(E.theta, f, part) + pair_resonant(Phi, E.xi, part) \
        + pair_resonant(Phi, f, part) + g
    return EnhancedNoise("rde", E.xi + f, E.theta + Phi, eta)


# -- rough area equivalence -------------------------------------------

def _integrate_between(f: SpectralField, s: float, t: float) -> np.ndarray:
    """Exact integral of a 1-d trigonometric polynomial over [s, t]."""
    k = f.grid.axis_freqs()
    c = f.coeffs
    nz = k != 0
    phase = (np.exp(1j * k[nz] * t) - np.exp(1j * k[nz] * s)) / (1j * k[nz])
    out = np.real(c[:, nz] @ phase + c[:, ~nz].sum(axis=1) * (t - s))
    return out


def rough_area_check(u: SpectralField, v: SpectralField, eta: SpectralField,
                     s: float, t: float, part: DyadicPartition | None = None,
                     oversample: int = 64):
    """Two routes to the area of a pair of 1-d paths over [s, t].

    Formula route: integrate eta + u-below-dv + u-above-dv over [s, t]
    (exact mode integration) and subtract u(s)(v(t) - v(s)).  Quadrature
    route: Simpson on a fine sampling of int (u(r) - u(s)) v'(r) dr.
    For smooth pairs with eta the resonant part of (u, dv) the two agree.
    """
    part = part or default_partition(u.grid)
    dv = derivative(v, 0)
    integrand = eta + para_lt(u, dv, part) + para_gt(u, dv, part)
    us = u.eval_at(np.array([s]))[:, 0]
    vs = v.eval_at(np.array([s, t]))
    a_formula = _integrate_between(integrand, s, t) - us * (vs[:, 1] - vs[:, 0])

    npts = oversample * u.grid.n + 1
    rs = np.linspace(s, t, npts)
    uvals = u.eval_at(rs)
    dvvals = dv.eval_at(rs)
    a_quad = simpson((uvals - us[:, None]) * dvvals, x=rs, axis=1)
    return a_formula, a_quad
