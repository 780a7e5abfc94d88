"""Bony paraproducts, resonant products, commutators, and the
time-mollified paraproduct used by the parabolic solver.

All pointwise multiplications go through the 2x-oversampled grid so the
decomposition identity f*g = f<g + f>g + f@g is exact (to rounding) for
band-limited fields.  Notation in identifiers: `lt` is the paraproduct
"low acts on high" (f before g), `gt` its mirror, `resonant` the diagonal
part.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .grid import (FieldPath, SpectralField, apply_pointwise, dealiased_product,
                   field_from_oversampled, oversampled_values)
from .partition import DyadicPartition, smoothstep
from .spectral import default_partition, derivative

log = logging.getLogger(__name__)


# -- nonlinearities ---------------------------------------------------

class NonlinearFunction:
    """Scalar composition nonlinearity with derivatives up to third order.

    Derivative callables are validated against central finite differences
    of `f` at registration, so a mistyped derivative fails fast.
    """

    def __init__(self, f, d1=None, d2=None, d3=None, name="F", validate=True):
        self.f = f
        self.d1 = d1
        self.d2 = d2
        self.d3 = d3
        self.name = name
        if validate and d1 is not None:
            self._validate()

    def _validate(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(-2.0, 2.0, size=64)
        h = 1e-5
        pairs = [(self.f, self.d1)]
        if self.d2 is not None:
            pairs.append((self.d1, self.d2))
        if self.d3 is not None:
            pairs.append((self.d2, self.d3))
        for base, deriv in pairs:
            fd = (base(x + h) - base(x - h)) / (2 * h)
            scale = np.max(np.abs(fd)) + 1.0
            if np.max(np.abs(fd - deriv(x))) > 1e-4 * scale:
                raise ValueError(f"derivative of {self.name} inconsistent with finite differences")

    def __call__(self, u: SpectralField) -> SpectralField:
        return apply_pointwise(self.f, u)

    def deriv(self, u: SpectralField, order: int = 1) -> SpectralField:
        fn = (self.d1, self.d2, self.d3)[order - 1]
        if fn is None:
            raise ValueError(f"{self.name}: derivative of order {order} not registered")
        return apply_pointwise(fn, u)

    def shifted(self, base: SpectralField) -> "NonlinearFunction":
        """The map w -> F(base + w), with derivatives, base a fixed field.

        Returned object only supports evaluation through fields sharing
        base's grid (it closes over base's oversampled values).
        """
        bv = oversampled_values(base)
        mk = lambda g: (None if g is None else (lambda x, g=g: g(bv + x)))
        return NonlinearFunction(mk(self.f), mk(self.d1), mk(self.d2), mk(self.d3),
                                 name=f"{self.name}(base+.)", validate=False)


def poly_function(coeffs, name="poly") -> NonlinearFunction:
    """Polynomial nonlinearity from coefficients [c0, c1, c2, ...]."""
    p = np.polynomial.Polynomial(coeffs)
    return NonlinearFunction(p, p.deriv(1), p.deriv(2), p.deriv(3), name=name)


# -- the Bony trio ----------------------------------------------------

def _block_values(f: SpectralField, part: DyadicPartition):
    """Oversampled real-space samples of every dyadic block of f."""
    return [oversampled_values(SpectralField(f.grid, f.coeffs * m)) for m in part.masks]


def para_lt(f: SpectralField, g: SpectralField,
            part: DyadicPartition | None = None) -> SpectralField:
    """Paraproduct of f below g: sum over j of S_{j-1} f * Delta_j g."""
    part = part or default_partition(f.grid)
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    gb = _block_values(g, part)
    acc = np.zeros_like(gb[0])
    # S_{j-1} vanishes for j <= 0, so the sum starts at block index 1
    for j in range(1, part.j_max + 1):
        low = oversampled_values(SpectralField(f.grid, f.coeffs * part.low_mask(j - 1)))
        acc += low * gb[j + 1]
    return field_from_oversampled(f.grid, acc)


def para_gt(f: SpectralField, g: SpectralField,
            part: DyadicPartition | None = None) -> SpectralField:
    """Mirror paraproduct, f above g."""
    return para_lt(g, f, part)


def resonant(f: SpectralField, g: SpectralField,
             part: DyadicPartition | None = None) -> SpectralField:
    """Resonant product: sum of Delta_i f * Delta_j g over |i - j| <= 1."""
    part = part or default_partition(f.grid)
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    fb = _block_values(f, part)
    gb = _block_values(g, part)
    acc = np.zeros_like(fb[0])
    for i in range(len(fb)):
        for j in (i - 1, i, i + 1):
            if 0 <= j < len(gb):
                acc += fb[i] * gb[j]
    return field_from_oversampled(f.grid, acc)


def bony_remainder(f: SpectralField, g: SpectralField,
                   part: DyadicPartition | None = None) -> SpectralField:
    """Defect f*g - f<g - f>g - f@g (diagnostic; ~1e-13 when dealiased)."""
    return dealiased_product(f, g) - para_lt(f, g, part) - para_gt(f, g, part) \
        - resonant(f, g, part)


# -- commutators and paralinearization --------------------------------

def commutator_C(f: SpectralField, g: SpectralField, h: SpectralField,
                 part: DyadicPartition | None = None) -> SpectralField:
    """Resonant commutator (f<g)@h - f*(g@h)."""
    part = part or default_partition(f.grid)
    return resonant(para_lt(f, g, part), h, part) \
        - dealiased_product(f, resonant(g, h, part))


def paralin_remainder(F: NonlinearFunction, f: SpectralField) -> SpectralField:
    """Paralinearization remainder F(f) - F'(f) < f."""
    return F(f) - para_lt(F.deriv(f), f)


def pi_F(F: NonlinearFunction, f: SpectralField, g: SpectralField,
         part: DyadicPartition | None = None) -> SpectralField:
    """Nonlinear resonant remainder F(f)@g - F'(f)*(f@g)."""
    part = part or default_partition(f.grid)
    return resonant(F(f), g, part) - dealiased_product(F.deriv(f), resonant(f, g, part))


def pi_times(f: SpectralField, u: SpectralField, g: SpectralField,
             part: DyadicPartition | None = None) -> SpectralField:
    """Trilinear remainder of (f*u)@g after peeling f*(u@g) and u*(f@g).

    Evaluated through its commutator expansion
    C(f,u,g) + C(u,f,g) + (f@u)@g, which is also how it is estimated.
    """
    part = part or default_partition(f.grid)
    return commutator_C(f, u, g, part) + commutator_C(u, f, g, part) \
        + resonant(resonant(f, u, part), g, part)


# -- paracontrolled fields and the controlled product -----------------

@dataclass(frozen=True)
class ParacontrolledField:
    """A field u = uprime < reference + usharp with its decomposition data."""

    u: SpectralField
    uprime: SpectralField
    usharp: SpectralField
    reference: SpectralField

    def __post_init__(self):
        recon = para_lt(self.uprime, self.reference) + self.usharp
        err = np.max(np.abs(recon.coeffs - self.u.coeffs))
        scale = max(np.max(np.abs(self.u.coeffs)), 1e-300)
        if err > 1e-10 * scale:
            raise ValueError("u does not equal uprime < reference + usharp")

    @classmethod
    def build(cls, uprime: SpectralField, reference: SpectralField,
              usharp: SpectralField) -> "ParacontrolledField":
        u = para_lt(uprime, reference) + usharp
        return cls(u, uprime, usharp, reference)


def controlled_product(P: ParacontrolledField, w: SpectralField,
                       eta: SpectralField, F: NonlinearFunction,
                       part: DyadicPartition | None = None) -> SpectralField:
    """Product F(u)*w for paracontrolled u, with the resonant part of the
    reference pair supplied externally as eta (possibly renormalized).

    For smooth w and eta = reference@w this reproduces the dealiased
    pointwise product; for rough w it is the definition of the product.
    """
    part = part or default_partition(P.u.grid)
    u, up = P.u, P.uprime
    Fu = F(u)
    dFu = F.deriv(u)
    out = para_lt(Fu, w, part) + para_gt(Fu, w, part) + pi_F(F, u, w, part)
    out = out + dealiased_product(dFu, resonant(P.usharp, w, part))
    out = out + dealiased_product(dFu, commutator_C(up, P.reference, w, part))
    out = out + dealiased_product(dealiased_product(dFu, up), eta)
    return out


# -- time-mollified paraproduct ---------------------------------------

def causal_bump(x) -> np.ndarray:
    """Smooth probability density supported in [0, 1].

    Built from the C-infinity smoothstep so all derivatives vanish at the
    endpoints; normalised to unit mass.
    """
    x = np.asarray(x, dtype=np.float64)
    y = smoothstep(2 * x) * smoothstep(2 * (1 - x))
    return y / _CAUSAL_BUMP_MASS


def _bump_mass() -> float:
    t = np.linspace(0.0, 1.0, 4097)
    y = smoothstep(2 * t) * smoothstep(2 * (1 - t))
    return float(np.trapezoid(y, t))


_CAUSAL_BUMP_MASS = _bump_mass()


def _qi_weights(times: np.ndarray, i: int, phi) -> np.ndarray:
    """Quadrature weights W with (Q_i f)(t_n) = sum_m W[n, m] f(t_m).

    The kernel at scale 2^-2i is laid on the uniform path grid by
    trapezoid quadrature; each row is renormalised to unit mass, which
    absorbs the quadrature error in the kernel's own mass.  Evaluations at
    times outside [0, T] clamp to the endpoint, hence weight accumulates
    on column 0.  Kernels narrower than the step degrade to the identity.
    """
    nt = len(times)
    dt = times[1] - times[0]
    width = 4.0 ** (-i)
    if width < dt:
        return np.eye(nt)
    w = np.zeros((nt, nt))
    # kernel nodes relative to t, clamped into [0, T]
    nodes = int(math.ceil(width / dt)) + 1
    for n in range(nt):
        t = times[n]
        s = t - np.arange(nodes + 1) * dt
        vals = phi((t - s) / width) / width
        trap = np.full(len(s), dt)
        trap[0] = trap[-1] = 0.5 * dt
        contrib = vals * trap
        idx = np.clip(np.rint((s - times[0]) / dt).astype(int), 0, nt - 1)
        np.add.at(w[n], idx, contrib)
        mass = w[n].sum()
        if mass <= 0.0:
            # kernel too narrow for the grid to see: degrade to identity
            w[n] = 0.0
            w[n, n] = 1.0
        else:
            w[n] /= mass
    return w


def para_lt_time(fpath: FieldPath, gpath: FieldPath,
                 part: DyadicPartition | None = None,
                 phi=causal_bump) -> FieldPath:
    """Time-mollified paraproduct of paths: at each node,
    sum over i of S_{i-1}(Q_i f)(t) * Delta_i g(t), where Q_i averages f
    over a causal window of width 4^-i.
    """
    grid = fpath.grid
    if not np.allclose(fpath.times, gpath.times):
        raise ValueError("paths live on different time grids")
    part = part or default_partition(grid)
    times = fpath.times
    dt = fpath.dt
    if 4.0 ** (-part.j_max) < dt:
        i_star = int(math.floor(-math.log(dt) / math.log(4.0)))
        log.warning("time step %.3g cannot resolve mollification below block %d; "
                    "using unmollified values there", dt, i_star + 1)
    fcoef = fpath.coeff_array()
    out = [np.zeros_like(fcoef[0]) for _ in times]
    for i in range(1, part.j_max + 1):
        w = _qi_weights(times, i, phi)
        qif = np.tensordot(w, fcoef, axes=(1, 0))
        lowmask = part.low_mask(i - 1)
        ring = part.mask(i)
        for n in range(len(times)):
            a = SpectralField(grid, qif[n] * lowmask)
            b = SpectralField(grid, gpath[n].coeffs * ring)
            out[n] += dealiased_product(a, b).coeffs
    return FieldPath(times, [SpectralField(grid, c) for c in out])


def paraproduct_switch(fpath: FieldPath, gpath: FieldPath,
                       part: DyadicPartition | None = None,
                       phi=causal_bump) -> FieldPath:
    """Difference between the plain and time-mollified paraproducts."""
    part = part or default_partition(fpath.grid)
    plain = FieldPath(fpath.times, [para_lt(a, b, part)
                                    for a, b in zip(fpath.fields, gpath.fields)])
    return plain - para_lt_time(fpath, gpath, part, phi)


def path_time_derivative(path: FieldPath) -> FieldPath:
    """Second-order finite-difference time derivative along a path."""
    arr = path.coeff_array()
    dt = path.dt
    out = np.empty_like(arr)
    out[1:-1] = (arr[2:] - arr[:-2]) / (2 * dt)
    out[0] = (-3 * arr[0] + 4 * arr[1] - arr[2]) / (2 * dt)
    out[-1] = (3 * arr[-1] - 4 * arr[-2] + arr[-3]) / (2 * dt)
    return FieldPath.from_coeff_array(path.times, path.grid, out)


def heat_para_commutator(upath: FieldPath, vpath: FieldPath, sigma: float = 1.0,
                         part: DyadicPartition | None = None) -> FieldPath:
    """Commutator of the heat operator with the time-mollified paraproduct,
    L(u << v) - u << (Lv), with L = d/dt - Laplacian.

    Evaluated through the product-rule identity
    (Lu) << v - 2 sum_axes (du << dv), which requires sigma = 1 (the
    identity is specific to the Laplacian).  Time derivatives use
    second-order finite differences on the path grid.
    """
    if sigma != 1.0:
        raise ValueError("heat_para_commutator requires sigma = 1")
    grid = upath.grid
    part = part or default_partition(grid)

    def L(path: FieldPath) -> FieldPath:
        ddt = path_time_derivative(path)
        lap = path.map(lambda f: SpectralField(grid, f.coeffs * _lap_symbol(grid)))
        return ddt + lap

    acc = para_lt_time(L(upath), vpath, part)
    for ax in range(grid.dim):
        du = upath.map(lambda f, ax=ax: derivative(f, ax))
        dv = vpath.map(lambda f, ax=ax: derivative(f, ax))
        acc = acc - _scale_path(para_lt_time(du, dv, part), 2.0)
    return acc


def _scale_path(path: FieldPath, s: float) -> FieldPath:
    return path.map(lambda f: f * s)


def _lap_symbol(grid) -> np.ndarray:
    r = grid.k_abs()
    return r * r
