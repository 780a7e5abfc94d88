"""Paracontrolled solvers for the three singular equations, plus the
classical exponential-integrator references used as oracles.

All three solvers are scalar (one channel).  Each consumes an
EnhancedNoise, so the renormalization lives entirely in the area input:
substituting eta -> eta - c is what turns the naive equation into the
renormalized one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .enhanced import EnhancedNoise
from .evolution import SemigroupSpec, _duhamel_weights
from .grid import FieldPath, SpectralField, TorusGrid, dealiased_product
from .noise import default_time_cutoff
from .paraproducts import (NonlinearFunction, commutator_C, para_gt, para_lt,
                           pi_F, pi_times, resonant, _qi_weights, causal_bump)
from .partition import DyadicPartition, radial_cutoff
from .spectral import (antiderivative, besov_norm, default_partition,
                       derivative, remove_mean)


@dataclass
class SolverConfig:
    alpha: float
    sigma: float = 1.0
    T: float = 1.0
    M: int = 64
    lam: float = 1.0
    fp_tol: float = 1e-9
    fp_max: int = 80
    damping: float = 0.5
    beta: float | None = None  # second parabolic exponent; defaults to alpha

    def __post_init__(self):
        if self.fp_tol <= 0 or not 0 < self.damping <= 1:
            raise ValueError("bad fixed-point configuration")
        if self.beta is None:
            self.beta = self.alpha


@dataclass
class SolverReport:
    converged: bool
    iterations: int
    residual: float
    norms: dict = field(default_factory=dict)
    advice: str = ""

    def to_json(self) -> str:
        return json.dumps({"converged": bool(self.converged),
                           "iterations": int(self.iterations),
                           "residual": float(self.residual),
                           "norms": {k: float(v) for k, v in self.norms.items()},
                           "advice": self.advice}, indent=2, sort_keys=True)


def scaled_function(F: NonlinearFunction, s: float) -> NonlinearFunction:
    mk = lambda g: (None if g is None else (lambda x, g=g: s * g(x)))
    return NonlinearFunction(mk(F.f), mk(F.d1), mk(F.d2), mk(F.d3),
                             name=f"{s}*{F.name}", validate=False)


# -- rough ODE --------------------------------------------------------

def _centered_time(grid: TorusGrid) -> np.ndarray:
    x = grid.points()[0]
    return np.where(x < grid.period / 2, x, x - grid.period)


def _seam_bump(grid: TorusGrid) -> tuple[SpectralField, float]:
    """A smooth bump at the far side of the time-line torus, used to close
    periodic antiderivatives: subtracting (mass/bump mass) * bump removes
    the mean of an integrand without touching the cutoff's support."""
    x = grid.points()[0]
    vals = radial_cutoff(x - grid.period / 2, grid.period / 8, grid.period / 4)
    f = SpectralField.from_values(grid, vals)
    return f, float(f.mean()[0])


def _closed_antiderivative(f: SpectralField, bump: SpectralField,
                           bump_mean: float) -> SpectralField:
    """Antiderivative after closing the loop at the seam bump, exact on the
    complement of the bump's support."""
    m = float(f.mean()[0])
    return antiderivative(f - bump * (m / bump_mean))


def solve_rde(u0: float, E: EnhancedNoise, F: NonlinearFunction,
              cfg: SolverConfig, cutoff=default_time_cutoff,
              part: DyadicPartition | None = None):
    """Damped Picard iteration for the localized rough ODE
    du/dt = cutoff * F(u) * xi on the time-line torus.

    The iteration updates the whole trajectory at once: assemble the
    remainder's driving term from the current iterate, integrate it, and
    rebuild u from the paracontrolled ansatz
    u = cutoff * (F(u) below theta) + usharp.
    """
    if E.kind != "rde":
        raise ValueError("solve_rde expects line-driver enhanced data")
    grid = E.xi.grid
    part = part or default_partition(grid)
    xi, theta = E.xi, E.theta
    eta = E.eta.channel(0) if E.eta.channels > 1 else E.eta
    t = _centered_time(grid)
    phi = SpectralField.from_values(grid, cutoff(t))
    dphi = derivative(phi, 0)
    bump, bump_mean = _seam_bump(grid)
    phi_res_xi = resonant(phi, xi, part)
    C_theta_xi = None  # filled lazily; depends on F(u)

    sh = lambda g: (None if g is None else (lambda x, g=g: g(u0 + x)))
    F_shift = NonlinearFunction(sh(F.f), sh(F.d1), sh(F.d2), sh(F.d3),
                                name=f"{F.name}(u0+.)", validate=False)

    u = SpectralField.constant(grid, u0)
    u0f = SpectralField.constant(grid, u0)
    residual = math.inf
    it = 0
    for it in range(1, cfg.fp_max + 1):
        Fu = F(u)
        dFu = F.deriv(u)
        para = para_lt(Fu, theta, part)
        phi_para = dealiased_product(phi, para)
        usharp = u - phi_para

        # chain-rule expansion of the resonant part; the derivative factor
        # multiplies every piece coming from (u - u0) @ xi
        terms = para_gt(Fu, xi, part)
        terms = terms + pi_F(F_shift, u - u0f, xi, part)
        inner = resonant(usharp - u0f, xi, part)
        inner = inner + dealiased_product(para, phi_res_xi)
        inner = inner + pi_times(phi, para, xi, part)
        inner = inner + dealiased_product(phi, commutator_C(Fu, theta, xi, part))
        inner = inner + dealiased_product(phi, dealiased_product(Fu, eta))
        terms = terms + dealiased_product(dFu, inner)
        terms = terms - para_lt(derivative(Fu, 0), theta, part)

        rhs = dealiased_product(phi, terms) - dealiased_product(dphi, para)
        U = _closed_antiderivative(rhs, bump, bump_mean)
        sharp0 = u0 - float(phi_para.eval_at(np.zeros(1))[0, 0])
        candidate = phi_para + U + SpectralField.constant(grid, sharp0)

        residual = float(np.max(np.abs(candidate.values() - u.values())))
        u = u + (candidate - u) * cfg.damping
        if residual <= cfg.fp_tol * (1.0 + u.sup_norm()):
            break

    Fu = F(u)
    phi_para = dealiased_product(phi, para_lt(Fu, theta, part))
    usharp = u - phi_para
    converged = residual <= cfg.fp_tol * (1.0 + u.sup_norm())
    norms = {
        "u_alpha": besov_norm(u, cfg.alpha, part),
        "usharp_2alpha": besov_norm(usharp, 2 * cfg.alpha, part),
        "xi_alpha_minus_1": besov_norm(xi, cfg.alpha - 1, part),
        "theta_alpha": besov_norm(theta, cfg.alpha, part),
        "eta_2alpha_minus_1": besov_norm(eta, 2 * cfg.alpha - 1, part),
    }
    advice = "" if converged else \
        "no contraction; retry with dilated data (halve lambda) or smaller F"
    return u, usharp, SolverReport(converged, it, residual, norms, advice)


def solve_rde_resonant_fp(u: SpectralField, E: EnhancedNoise,
                          F: NonlinearFunction, cfg: SolverConfig,
                          part: DyadicPartition | None = None) -> SpectralField:
    """Resolve the resonant product u @ xi directly from the implicit
    relation it satisfies along solutions, by damped fixed point:

        y = Phi - (F'(u) y) @ theta,
        Phi = d/dt(u @ theta) - F(u)(xi @ theta) - C(F(u), xi, theta)
              - Pi_F(u, xi) @ theta - (F(u) above xi) @ theta.
    """
    grid = u.grid
    part = part or default_partition(grid)
    xi, theta = E.xi, E.theta
    Fu = F(u)
    dFu = F.deriv(u)
    Phi = derivative(resonant(u, theta, part), 0)
    Phi = Phi - dealiased_product(Fu, resonant(xi, theta, part))
    Phi = Phi - commutator_C(Fu, xi, theta, part)
    Phi = Phi - resonant(pi_F(F, u, xi, part), theta, part)
    Phi = Phi - resonant(para_gt(Fu, xi, part), theta, part)

    y = Phi
    prev = math.inf
    for _ in range(cfg.fp_max):
        cand = Phi - resonant(dealiased_product(dFu, y), theta, part)
        res = float(np.max(np.abs(cand.values() - y.values())))
        y = y + (cand - y) * cfg.damping
        if res <= cfg.fp_tol * (1.0 + y.sup_norm()):
            return y
        if res > 4.0 * prev and res > 1.0:
            break
        prev = res
    raise RuntimeError("resonant fixed point did not contract; "
                       f"theta norm at alpha: {besov_norm(theta, cfg.alpha, part):.3g}")


# -- generic exponential-integrator stepping --------------------------

def etd2_solve(grid: TorusGrid, sigma: float, u0: SpectralField, nonlinearity,
               T: float, M: int, blowup: float = 1e8) -> FieldPath:
    """Second-order exponential time differencing (predictor-corrector)
    for L u = N(u) with L = d/dt + (-Laplacian)^sigma.

    `nonlinearity` maps a SpectralField to a SpectralField.  Used as the
    classical reference solver and for the regularized equations.
    """
    spec = SemigroupSpec(sigma, grid)
    dt = T / M
    z = spec.symbol() * dt
    decay = np.exp(-z)
    A, B = _duhamel_weights(z, dt)
    times = np.arange(M + 1) * dt
    fields = [u0]
    c = u0.coeffs
    for _ in range(M):
        n0 = nonlinearity(SpectralField(grid, c)).coeffs
        pred = c * decay + n0 * A
        n1 = nonlinearity(SpectralField(grid, pred)).coeffs
        c = c * decay + n0 * (A - B) + n1 * B
        f = SpectralField(grid, c)
        if not np.isfinite(c).all() or np.max(np.abs(c)) > blowup:
            raise RuntimeError("reference solve blew up")
        fields.append(f)
    return FieldPath(times, fields)


def trapezoid_exponential_path(grid: TorusGrid, sigma: float, u0: SpectralField,
                               nonlinearity, T: float, M: int,
                               fp_tol: float = 1e-12, fp_max: int = 50,
                               damping: float = 1.0, blowup: float = 1e8) -> FieldPath:
    """Like etd2_solve but with the implicit trapezoid-exponential rule,
    iterating each step to convergence.  Slightly more work per step, used
    where the implicit endpoint matters."""
    spec = SemigroupSpec(sigma, grid)
    dt = T / M
    z = spec.symbol() * dt
    decay = np.exp(-z)
    A, B = _duhamel_weights(z, dt)
    times = np.arange(M + 1) * dt
    fields = [u0]
    c = u0.coeffs
    for _ in range(M):
        n0 = nonlinearity(SpectralField(grid, c)).coeffs
        base = c * decay + n0 * (A - B)
        nxt = c * decay + n0 * A
        for _ in range(fp_max):
            n1 = nonlinearity(SpectralField(grid, nxt)).coeffs
            cand = base + n1 * B
            res = np.max(np.abs(cand - nxt))
            nxt = nxt + (cand - nxt) * damping
            if res <= fp_tol * (1.0 + np.max(np.abs(nxt))):
                break
        c = nxt
        if not np.isfinite(c).all() or np.max(np.abs(c)) > blowup:
            raise RuntimeError("solution exceeded the blow-up bound")
        fields.append(SpectralField(grid, c))
    return FieldPath(times, fields)


# -- fractional Burgers -----------------------------------------------

def burgers_drift(w: SpectralField, theta: SpectralField, eta: SpectralField,
                  G: NonlinearFunction, part: DyadicPartition) -> SpectralField:
    """Paracontrolled drift G(theta + w) d_x(theta + w), with the singular
    resonant part routed through the supplied area eta = theta @ d_x theta."""
    v = theta + w
    Gv = G(v)
    dGv = G.deriv(v)
    dtheta = derivative(theta, 0)
    drift = para_lt(Gv, dtheta, part) + para_gt(Gv, dtheta, part)
    drift = drift + resonant(Gv - para_lt(dGv, theta, part), dtheta, part)
    drift = drift + commutator_C(dGv, theta, dtheta, part)
    drift = drift + dealiased_product(dGv, eta)
    return drift + dealiased_product(Gv, derivative(w, 0))


def solve_burgers(u0: SpectralField, E: EnhancedNoise, G: NonlinearFunction,
                  cfg: SolverConfig, part: DyadicPartition | None = None):
    """Mild-form stepping of the fractional conservation-type equation:
    u = theta + w where w absorbs the initial condition and the drift.

    Each step applies the trapezoid-exponential rule with a damped inner
    fixed point for the implicit endpoint of the drift.
    """
    if E.kind != "burgers":
        raise ValueError("solve_burgers expects path enhanced data")
    theta_path: FieldPath = E.theta
    eta_path: FieldPath = E.eta
    grid = theta_path.grid
    part = part or default_partition(grid)
    if not (cfg.sigma > 5.0 / 6.0):
        raise ValueError("need sigma > 5/6")
    spec = SemigroupSpec(cfg.sigma, grid)
    M = len(theta_path) - 1
    dt = theta_path.dt
    z = spec.symbol() * dt
    decay = np.exp(-z)
    A, B = _duhamel_weights(z, dt)

    theta = [f.channel(0) for f in theta_path.fields]
    eta = [f.channel(0) for f in eta_path.fields]
    drift = lambda w, n: burgers_drift(w, theta[n], eta[n], G, part)

    w = u0
    fields = [w]
    worst_res = 0.0
    worst_it = 0
    for n in range(M):
        d0 = drift(w, n).coeffs
        base = w.coeffs * decay + d0 * (A - B)
        nxt = w.coeffs * decay + d0 * A
        res = math.inf
        for k in range(1, cfg.fp_max + 1):
            d1 = drift(SpectralField(grid, nxt), n + 1).coeffs
            cand = base + d1 * B
            res = float(np.max(np.abs(cand - nxt)))
            nxt = nxt + (cand - nxt) * cfg.damping
            if res <= cfg.fp_tol * (1.0 + np.max(np.abs(nxt))):
                break
        if res > cfg.fp_tol * (1.0 + np.max(np.abs(nxt))):
            raise RuntimeError(
                f"step {n}: inner fixed point stalled at residual {res:.3g}; "
                "halve lambda (dilate the data) or refine the time grid")
        worst_res = max(worst_res, res)
        worst_it = max(worst_it, k)
        w = SpectralField(grid, nxt)
        fields.append(w)

    w_path = FieldPath(theta_path.times, fields)
    u_path = FieldPath(theta_path.times, [a + b for a, b in zip(theta, fields)])
    norms = {
        "theta_alpha_final": besov_norm(theta[-1], cfg.alpha, part),
        "w_final_sup": fields[-1].sup_norm(),
        "eta_final_2alpha_minus_1": besov_norm(eta[-1], 2 * cfg.alpha - 1, part),
    }
    return w_path, u_path, SolverReport(True, worst_it, worst_res, norms)


# -- 2-d multiplicative heat equation ---------------------------------

class _MollifiedParaMachine:
    """Book-keeping for the time-mollified paraproduct terms of the 2-d
    solver, marching causally in time.

    Maintains the history of f = F(u) coefficients, the quadrature rows of
    the scale-dependent time averages, and the previous node's averaged
    fields (for backward-difference time derivatives).
    """

    def __init__(self, grid: TorusGrid, part: DyadicPartition,
                 theta: SpectralField, xi: SpectralField,
                 times: np.ndarray):
        self.grid = grid
        self.part = part
        self.times = times
        self.blocks = list(range(1, part.j_max + 1))
        self.weights = {i: _qi_weights(times, i, causal_bump) for i in self.blocks}
        self.theta_blocks = {i: SpectralField(grid, theta.coeffs * part.mask(i))
                             for i in self.blocks}
        self.xi_blocks = {i: SpectralField(grid, xi.coeffs * part.mask(i))
                          for i in self.blocks}
        self.grad_theta_blocks = {
            i: [derivative(self.theta_blocks[i], ax) for ax in range(grid.dim)]
            for i in self.blocks}
        self.hist = np.zeros((len(times),) + (1,) + grid.shape, dtype=np.complex128)
        self.low_q = {}     # (node, i) -> low-passed averaged coefficients
        self.lap = grid.k_abs() ** 2

    def set_f(self, n: int, f: SpectralField):
        self.hist[n] = f.coeffs

    def _low_avg(self, n: int, i: int) -> np.ndarray:
        """S_(i-1)-filtered causal time average of f at node n."""
        row = self.weights[i][n]
        nz = np.nonzero(row)[0]
        q = np.tensordot(row[nz], self.hist[nz], axes=(0, 0))
        return q * self.part.low_mask(i - 1)

    def freeze(self, n: int):
        """Cache the node's averages once its value is final."""
        for i in self.blocks:
            self.low_q[(n, i)] = self._low_avg(n, i)

    def _lq(self, n: int, i: int) -> np.ndarray:
        if (n, i) in self.low_q:
            return self.low_q[(n, i)]
        return self._low_avg(n, i)

    def para_tt_theta(self, n: int) -> SpectralField:
        """f << theta at node n."""
        acc = None
        for i in self.blocks:
            term = dealiased_product(SpectralField(self.grid, self._lq(n, i)),
                                     self.theta_blocks[i])
            acc = term if acc is None else acc + term
        return acc

    def para_tt_xi(self, n: int) -> SpectralField:
        """f << xi at node n."""
        acc = None
        for i in self.blocks:
            term = dealiased_product(SpectralField(self.grid, self._lq(n, i)),
                                     self.xi_blocks[i])
            acc = term if acc is None else acc + term
        return acc

    def heat_defect(self, n: int) -> SpectralField:
        """-[L(f << theta) - f << xi] at node n, via the product rule:
        each scale contributes -(L S Q f) Delta theta + 2 grad(S Q f) . grad(Delta theta),
        using that L theta = xi kills the remaining term.  The time part of
        L S Q f is a backward difference of the cached averages (zero at the
        initial node, where the clamped history is constant)."""
        dt = self.times[1] - self.times[0]
        acc = None
        for i in self.blocks:
            lq = self._lq(n, i)
            dt_lq = (lq - self._lq(n - 1, i)) / dt if n > 0 else np.zeros_like(lq)
            l_of_lq = SpectralField(self.grid, dt_lq + lq * self.lap)
            term = dealiased_product(l_of_lq, self.theta_blocks[i]) * (-1.0)
            for ax in range(self.grid.dim):
                g = SpectralField(self.grid, lq * (1j * np.broadcast_to(
                    self.grid.freq_mesh()[ax], self.grid.shape)))
                term = term + dealiased_product(g, self.grad_theta_blocks[i][ax]) * 2.0
            acc = term if acc is None else acc + term
        return acc


def pam_drift_sharp(machine: _MollifiedParaMachine, n: int, u: SpectralField,
                    theta: SpectralField, xi: SpectralField, eta: SpectralField,
                    F: NonlinearFunction, part: DyadicPartition):
    """Driving term of the remainder at node n, given u at that node.

    The resonant product of F(u) with the rough xi is expanded so that the
    only genuinely singular piece is carried by the supplied area eta.
    Returns (drift, para_tt_theta) so the caller can rebuild u."""
    Fu = F(u)
    dFu = F.deriv(u)
    machine.set_f(n, Fu)
    ptt = machine.para_tt_theta(n)

    drift = machine.heat_defect(n)
    drift = drift + para_lt(Fu, xi, part) - machine.para_tt_xi(n)
    drift = drift + para_gt(Fu, xi, part)
    # the resonant product, term by term
    drift = drift + resonant(Fu - para_lt(dFu, ptt, part), xi, part)
    drift = drift + commutator_C(dFu, ptt, xi, part)
    drift = drift + dealiased_product(
        dFu, resonant(ptt - para_lt(Fu, theta, part), xi, part))
    drift = drift + dealiased_product(dFu, commutator_C(Fu, theta, xi, part))
    drift = drift + dealiased_product(dealiased_product(dFu, Fu), eta)
    return drift, ptt


def solve_pam(u0: SpectralField, E: EnhancedNoise, F: NonlinearFunction,
              cfg: SolverConfig, part: DyadicPartition | None = None):
    """Paracontrolled solver for the 2-d multiplicative-noise heat equation
    with stationary lifted noise.

    Marches the remainder with the exact per-mode exponential rule and
    rebuilds u = (F(u) << theta) + usharp through a damped inner fixed
    point at each node.
    """
    if E.kind != "pam":
        raise ValueError("solve_pam expects 2-d static enhanced data")
    if cfg.sigma != 1.0:
        raise ValueError("the 2-d solver is specific to sigma = 1")
    xi, theta, eta = E.xi, E.theta, E.eta
    grid = xi.grid
    part = part or default_partition(grid)
    spec = SemigroupSpec(1.0, grid)
    dt = cfg.T / cfg.M
    times = np.arange(cfg.M + 1) * dt
    z = spec.symbol() * dt
    decay = np.exp(-z)
    A, B = _duhamel_weights(z, dt)

    machine = _MollifiedParaMachine(grid, part, theta, xi, times)

    u = u0
    drift0, ptt0 = pam_drift_sharp(machine, 0, u, theta, xi, eta, F, part)
    machine.freeze(0)
    usharp = u0 - ptt0
    u_fields = [u]
    sharp_fields = [usharp]
    worst_res = 0.0
    worst_it = 0
    for n in range(cfg.M):
        u_next = u
        res = math.inf
        for k in range(1, cfg.fp_max + 1):
            drift1, ptt1 = pam_drift_sharp(machine, n + 1, u_next, theta, xi,
                                           eta, F, part)
            sharp_next = SpectralField(
                grid, usharp.coeffs * decay + drift0.coeffs * (A - B)
                + drift1.coeffs * B)
            cand = ptt1 + sharp_next
            res = float(np.max(np.abs(cand.coeffs - u_next.coeffs)))
            u_next = u_next + (cand - u_next) * cfg.damping
            if res <= cfg.fp_tol * (1.0 + u_next.sup_norm()):
                break
        if not np.isfinite(res) or res > cfg.fp_tol * (1.0 + u_next.sup_norm()) * 10:
            raise RuntimeError(
                f"node {n + 1}: fixed point stalled at residual {res:.3g}; "
                "dilate the data (halve lambda) or refine the time grid")
        drift1, ptt1 = pam_drift_sharp(machine, n + 1, u_next, theta, xi, eta,
                                       F, part)
        machine.freeze(n + 1)
        usharp = SpectralField(grid, usharp.coeffs * decay
                               + drift0.coeffs * (A - B) + drift1.coeffs * B)
        u = ptt1 + usharp
        drift0 = drift1
        u_fields.append(u)
        sharp_fields.append(usharp)
        worst_res = max(worst_res, res)
        worst_it = max(worst_it, k)

    u_path = FieldPath(times, u_fields)
    sharp_path = FieldPath(times, sharp_fields)
    norms = {
        "u_final_alpha": besov_norm(u, cfg.alpha, part),
        "usharp_final_alpha_plus_beta": besov_norm(usharp, cfg.alpha + cfg.beta, part),
        "xi_alpha_minus_2": besov_norm(xi, cfg.alpha - 2, part),
        "theta_alpha": besov_norm(theta, cfg.alpha, part),
    }
    return u_path, sharp_path, SolverReport(True, worst_it, worst_res, norms)


def solve_pam_regularized(u0: SpectralField, xi_eps: SpectralField, c_eps: float,
                          F: NonlinearFunction, cfg: SolverConfig,
                          blowup: float = 1e6) -> FieldPath:
    """Classical reference solve of the renormalized regularized equation
    L u = F(u) xi_eps - c_eps F'(u) F(u), by the implicit
    trapezoid-exponential rule (each step iterated to convergence)."""
    grid = xi_eps.grid

    def drift(u: SpectralField) -> SpectralField:
        out = dealiased_product(F(u), xi_eps)
        if c_eps != 0.0:
            out = out - dealiased_product(F.deriv(u), F(u)) * c_eps
        return out

    return trapezoid_exponential_path(grid, cfg.sigma, u0, drift, cfg.T, cfg.M,
                                      fp_tol=cfg.fp_tol, fp_max=cfg.fp_max,
                                      damping=cfg.damping, blowup=blowup)
