"""Energy J_{lambda,beta}, its gradient, Nehari projection, Pohozaev residual,
Brezis-Lieb separation defect and barycenters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grid import grad_sq_integral, integrate, neg_laplacian, values_of
from .params import ProblemParams, derive_exponents
from .riesz import RadialRiesz, make_operator


class NehariError(ArithmeticError):
    pass


@dataclass
class Problem:
    """Everything needed to evaluate J on one grid.

    V holds the potential samples (None means V = 0); mask, if given, is the
    hard Dirichlet constraint: admissible fields vanish outside it.
    """
    params: ProblemParams
    grid: object
    op: object
    V: np.ndarray | None = None
    mask: np.ndarray | None = None

    @classmethod
    def build(cls, params, grid, potential=None, mask=None, op=None, **op_kw):
        if op is None:
            op = make_operator(grid, params.mu, **op_kw)
        V = None
        if potential is not None:
            V = potential if isinstance(potential, np.ndarray) else potential.on(grid)
        return cls(params, grid, op, V, mask)

    def with_params(self, **kw):
        return Problem(self.params.with_(**kw), self.grid, self.op, self.V, self.mask)

    @property
    def q(self):
        return self.params.q

    def apply_mask(self, u):
        return u if self.mask is None else np.where(self.mask, u, 0.0)

    def quad_weight(self):
        """Pointwise coefficient lambda V - beta."""
        p = self.params
        w = -p.beta
        if self.V is not None and p.lam:
            w = p.lam * self.V - p.beta
        return w

    def inner(self, a, b):
        return integrate(values_of(a) * values_of(b), self.grid)


@dataclass
class EnergyBreakdown:
    dirichlet: float
    potential: float
    mass: float
    nonlocal_: float
    A: float
    J: float

    def to_dict(self):
        return {"dirichlet": self.dirichlet, "potential": self.potential, "mass": self.mass,
                "nonlocal": self.nonlocal_, "A": self.A, "J": self.J}


def _parts(u, prob, conv=None):
    """(dirichlet, potential, mass, D, |u|^q, conv(|u|^q))."""
    g = prob.grid
    q = prob.q
    dir_ = grad_sq_integral(u, g)
    mass = integrate(u * u, g)
    pot = 0.0
    if prob.V is not None and prob.params.lam:
        pot = prob.params.lam * integrate(prob.V * u * u, g)
    f = np.abs(u) ** q
    if conv is None:
        conv = prob.op.convolve(f)
    D = max(integrate(f * conv, g), 0.0)
    return dir_, pot, mass, D, f, conv


def _breakdown(dir_, pot, mass, D, prob):
    A = dir_ + pot - prob.params.beta * mass
    return EnergyBreakdown(dir_, pot, mass, D, A, 0.5 * A - D / (2 * prob.q))


def energy(u, prob: Problem) -> EnergyBreakdown:
    u = values_of(u)
    if u.shape != tuple(prob.grid.shape):
        raise ValueError("field and problem grids differ")
    dir_, pot, mass, D, _, _ = _parts(u, prob)
    return _breakdown(dir_, pot, mass, D, prob)


def linear_part(u, prob):
    """(-Delta + lambda V - beta) u on the tensor grid."""
    return neg_laplacian(u, prob.grid) + prob.quad_weight() * u


def gradient(u, prob: Problem, conv=None):
    """L^2 representative of J'(u); masked if the problem has a mask."""
    if isinstance(prob.op, RadialRiesz):
        raise NotImplementedError("gradient needs a tensor grid")
    u = values_of(u)
    q = prob.q
    if conv is None:
        conv = prob.op.convolve(np.abs(u) ** q)
    g = linear_part(u, prob) - conv * np.abs(u) ** (q - 2) * u
    return prob.apply_mask(g)


def nehari_scale(A, D, q):
    if D <= 0:
        raise NehariError("D(u) = 0: zero field has no Nehari projection")
    if A <= 0:
        raise NehariError("A(u) <= 0: outside the definite regime, use the indefinite path")
    return (A / D) ** (1.0 / (2 * q - 2))


def nehari_project(u, prob: Problem):
    """Returns (t, t*u, EnergyBreakdown of t*u)."""
    u = values_of(u)
    dir_, pot, mass, D, _, _ = _parts(u, prob)
    A = dir_ + pot - prob.params.beta * mass
    t = nehari_scale(A, D, prob.q)
    q = prob.q
    e = _breakdown(dir_ * t * t, pot * t * t, mass * t * t, D * t ** (2 * q), prob)
    return t, t * u, e


def nehari_residual(e: EnergyBreakdown):
    """<J'(u), u> / A = (A - D)/A."""
    return (e.A - e.nonlocal_) / e.A


def level_from_A(A, params):
    """J on the Nehari set: level_coeff * A."""
    return derive_exponents(params.N, params.mu).level_coeff * A


def fiber_max(A, D, q, bracket=(1e-6, 1e3), iters=200):
    """max_{t >= 0} J(t u) by golden-section search over t, for given A(u), D(u)."""
    f = lambda t: -(0.5 * t * t * A - t ** (2 * q) * D / (2 * q))
    a, b = bracket
    gr = (np.sqrt(5) - 1) / 2
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    t = 0.5 * (a + b)
    return t, -f(t)


def pohozaev_residual(u, grid, op, c0=0.0, q=None):
    """(N-2)/2 int|grad u|^2 + c0 N/2 int u^2 - (N-2)/2 D(u)."""
    from .riesz import double_integral_D
    N = grid.N
    u = values_of(u)
    gr = grad_sq_integral(u, grid)
    return (N - 2) / 2 * gr + c0 * N / 2 * integrate(u * u, grid) - (N - 2) / 2 * double_integral_D(u, op, q)


def brezis_lieb_defect(u, v, shift, op, q=None, margin=1e-8):
    """|D(u + tau_a v) - D(u) - D(v)| with tau_a an integer grid shift."""
    from .riesz import double_integral_D
    u, v = values_of(u), values_of(v)
    w = np.roll(v, tuple(shift), axis=tuple(range(len(shift))))
    shell = np.zeros(u.shape, bool)
    for ax in range(u.ndim):
        idx = [slice(None)] * u.ndim
        idx[ax] = slice(0, 2)
        shell[tuple(idx)] = True
        idx[ax] = slice(-2, None)
        shell[tuple(idx)] = True
    scale = max(np.abs(w).max(), np.abs(u).max(), 1e-300)
    if np.abs(w[shell]).max(initial=0) > margin * scale or np.abs(u[shell]).max(initial=0) > margin * scale:
        raise ValueError("shifted bump reaches the box boundary")
    return abs(double_integral_D(u + w, op, q) - double_integral_D(u, op, q) - double_integral_D(w, op, q))


# --- barycenters ------------------------------------------------------------------

def grad_density(u, grid):
    """|grad u|^2 pointwise via spectral derivatives."""
    u = values_of(u)
    uh = sfft.rfftn(u)
    out = np.zeros_like(u)
    for k in grid.wavenumbers(real=True):
        d = sfft.irfftn(1j * k * uh, s=u.shape)
        out += d * d
    return out


def eta(t, R):
    t = np.asarray(t, float)
    return np.where(t <= R, 1.0, R / np.maximum(t, 1e-300))


def barycenter(u, grid, R=None):
    """int x |grad u|^2 / int |grad u|^2; with R, x is replaced by eta(|x|) x."""
    w = grad_density(u, grid)
    tot = w.sum()
    if tot <= 0:
        raise ValueError("zero field has no barycenter")
    xs = grid.coords()
    fac = 1.0
    if R is not None:
        fac = eta(np.sqrt(grid.r2()), R)
    return np.array([float(np.sum(w * fac * x) / tot) for x in xs])


def truncated_barycenter(u, grid, R):
    return barycenter(u, grid, R)


# --- coercivity proxy ------------------------------------------------------------

def random_smooth_fields(grid, count, rng, corr=0.3, mask=None):
    """Gaussian random fields with a Gaussian spectrum of correlation length corr."""
    k2 = grid.k2(real=True)
    filt = np.exp(-0.5 * corr * corr * k2)
    for _ in range(count):
        w = rng.standard_normal(grid.shape)
        f = sfft.irfftn(filt * sfft.rfftn(w), s=grid.shape)
        if mask is not None:
            f = np.where(mask, f, 0.0)
        yield f / np.sqrt(integrate(f * f, grid))


def coercivity_ratio(prob: Problem, samples=200, seed=0, corr=0.3):
    """min over random normalized fields of A(u)/int u^2 (an upper bound for the infimum)."""
    rng = np.random.default_rng(seed)
    best = np.inf
    for f in random_smooth_fields(prob.grid, samples, rng, corr):
        dir_ = grad_sq_integral(f, prob.grid)
        A = dir_ + integrate(prob.quad_weight() * f * f, prob.grid)
        best = min(best, A)
    return float(best)
