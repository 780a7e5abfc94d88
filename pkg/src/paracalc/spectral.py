"""Littlewood-Paley blocks, Besov norms and elementary spectral calculus."""

from __future__ import annotations

import numpy as np

from .grid import SpectralField, TorusGrid
from .partition import DyadicPartition, make_dyadic_partition

_partition_cache: dict[tuple, DyadicPartition] = {}


def default_partition(grid: TorusGrid) -> DyadicPartition:
    key = (grid.dim, grid.n, grid.period)
    part = _partition_cache.get(key)
    if part is None:
        part = make_dyadic_partition(grid)
        _partition_cache[key] = part
    return part


def lp_block(f: SpectralField, j: int, part: DyadicPartition | None = None) -> SpectralField:
    """Dyadic block Delta_j f (Fourier multiplier by the j-th ring mask)."""
    part = part or default_partition(f.grid)
    return SpectralField(f.grid, f.coeffs * part.mask(j))


def low_sum(f: SpectralField, j: int, part: DyadicPartition | None = None) -> SpectralField:
    """Low-frequency cut S_j f = sum of blocks below j."""
    part = part or default_partition(f.grid)
    return SpectralField(f.grid, f.coeffs * part.low_mask(j))


def block_sups(f: SpectralField, part: DyadicPartition | None = None) -> np.ndarray:
    """sup-norm of every dyadic block, indexed by j = -1 .. j_max."""
    part = part or default_partition(f.grid)
    axes = tuple(range(-f.grid.dim, 0))
    blocks = f.coeffs[:, None] * part.masks[None]
    vals = np.fft.ifftn(blocks, axes=axes) * f.grid.n**f.grid.dim
    return np.max(np.abs(np.real(vals)), axis=tuple(range(-f.grid.dim, 0))).max(axis=0)


def besov_norm(f: SpectralField, alpha: float,
               part: DyadicPartition | None = None) -> float:
    """Hoelder-Besov norm sup_j 2^(j*alpha) ||Delta_j f||_inf."""
    part = part or default_partition(f.grid)
    sups = block_sups(f, part)
    j = np.arange(-1, part.j_max + 1, dtype=np.float64)
    return float(np.max(2.0 ** (j * alpha) * sups))


def fourier_multiplier(f: SpectralField, symbol) -> SpectralField:
    """Apply a Fourier multiplier given its symbol on the frequency mesh.

    `symbol` receives the broadcastable frequency arrays (one per axis) and
    must return an array over the lattice.  Even real symbols preserve
    realness; odd symbols should be provided as i*odd by the caller.
    """
    m = np.asarray(symbol(*f.grid.freq_mesh()))
    return SpectralField(f.grid, f.coeffs * np.broadcast_to(m, f.grid.shape))


def derivative(f: SpectralField, axis: int = 0, order: int = 1) -> SpectralField:
    mesh = f.grid.freq_mesh()
    sym = np.broadcast_to((1j * mesh[axis]) ** order, f.grid.shape)
    return SpectralField(f.grid, f.coeffs * sym)


def fractional_laplacian(f: SpectralField, sigma: float) -> SpectralField:
    """(-Laplacian)^sigma; the zero mode is annihilated."""
    r = f.grid.k_abs()
    sym = np.zeros(f.grid.shape)
    nz = r > 0
    sym[nz] = r[nz] ** (2.0 * sigma)
    return SpectralField(f.grid, f.coeffs * sym)


def antiderivative(f: SpectralField, axis: int = 0) -> SpectralField:
    """Periodic antiderivative along one axis, normalised to vanish at x=0.

    The input must have zero mean along that axis; otherwise no periodic
    antiderivative exists and a ValueError is raised.  Use
    `remove_mean` first when the mean is an expected byproduct.
    """
    mesh = f.grid.freq_mesh()
    k = np.broadcast_to(mesh[axis], f.grid.shape)
    zero = k == 0
    mean_mass = np.max(np.abs(f.coeffs[:, zero]))
    scale = max(np.max(np.abs(f.coeffs)), 1e-300)
    if mean_mass > 1e-10 * scale:
        raise ValueError("antiderivative of a field with nonzero axis mean")
    c = np.zeros_like(f.coeffs)
    nz = ~zero
    c[:, nz] = f.coeffs[:, nz] / (1j * k[nz])
    # pin the value at the origin to zero via the constant mode
    offset = SpectralField(f.grid, c).values()[(slice(None),) + (0,) * f.grid.dim]
    return SpectralField(f.grid, _shift_zero_mode(c, -offset, f.grid.dim))


def _shift_zero_mode(c: np.ndarray, delta: np.ndarray, dim: int) -> np.ndarray:
    c = c.copy()
    idx = (slice(None),) + (0,) * dim
    c[idx] = c[idx] + delta
    return c


def remove_mean(f: SpectralField):
    """Return (mean-free field, removed per-channel means)."""
    m = f.mean()
    return SpectralField(f.grid, _shift_zero_mode(f.coeffs, -m, f.grid.dim)), m


def scale_field(f: SpectralField, k: int) -> SpectralField:
    """Dyadic dilation x -> f(2^-k x) by exact spectral reindexing.

    A mode at integer frequency m moves to m / 2^k, so the input spectrum
    must be supported on multiples of 2^k (ValueError otherwise).  k = 0 is
    the identity.  Only dyadic ratios keep the field on the lattice, which
    is all the scaling limits here need.
    """
    if k < 0:
        raise ValueError("only contractive dyadic scalings (k >= 0) are supported")
    if k == 0:
        return f
    n, d = f.grid.n, f.grid.dim
    step = 2**k
    ints = np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(int)
    src_of = {m: i for i, m in enumerate(ints)}

    divisible = ints % step == 0
    # mass on non-multiples cannot be represented after scaling
    for ax in range(d):
        sel = [slice(None)] * (d + 1)
        sel[ax + 1] = ~divisible
        if np.max(np.abs(f.coeffs[tuple(sel)])) > 1e-12 * max(np.max(np.abs(f.coeffs)), 1e-300):
            raise ValueError(f"spectrum not supported on multiples of {step}; scaling is inexact")

    take = np.array([src_of.get(m * step, -1) for m in ints])
    has_src = take >= 0
    out = np.zeros_like(f.coeffs)
    idx = np.where(has_src)[0]
    c = f.coeffs
    if d == 1:
        out[:, idx] = c[:, take[idx]]
    else:
        out[np.ix_(range(c.shape[0]), idx, idx)] = c[np.ix_(range(c.shape[0]), take[idx], take[idx])]
    return SpectralField(f.grid, out)
