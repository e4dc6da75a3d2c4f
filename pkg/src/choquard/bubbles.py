"""Sharp constants and the explicit bubble family U, U~, U_eps, u_eps."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special as sp

from .grid import RadialGrid, grad_sq_integral, integrate, radial_derivative, sphere_area
from .params import derive_exponents
from .riesz import RadialRiesz, double_integral_D, hls_ratio


def _check(N, mu):
    if N < 3:
        raise ValueError("N must be >= 3")
    if not (0 < mu < N):
        raise ValueError(f"mu must lie in (0, N), got {mu}")


def hls_constant(N, mu):
    """Sharp HLS constant C(N, mu) at the conjugate exponents 2N/(2N-mu)."""
    _check(N, mu)
    g = sp.gammaln
    return float(np.exp(mu / 2 * np.log(np.pi) + g(N / 2 - mu / 2) - g(N - mu / 2)
                        + (-1 + mu / N) * (g(N / 2) - g(N))))


def sobolev_closed_form(N):
    """Classical value pi N (N-2) (Gamma(N/2)/Gamma(N))^{2/N}; used only as a cross-check."""
    return float(np.pi * N * (N - 2) * np.exp(2 / N * (sp.gammaln(N / 2) - sp.gammaln(N))))


# --- profiles ---------------------------------------------------------------

def U(r, N):
    return (N * (N - 2)) ** ((N - 2) / 4) * (1 + np.asarray(r, float) ** 2) ** (-(N - 2) / 2)


def U_eps(r, N, eps):
    return eps ** ((2 - N) / 2) * U(np.asarray(r, float) / eps, N)


def psi(r, delta=1.0):
    """C^2 cutoff: 1 on [0, delta], 0 on [2 delta, inf), quintic smootherstep between."""
    s = np.clip((np.asarray(r, float) - delta) / delta, 0.0, 1.0)
    return 1.0 - s**3 * (10 - 15 * s + 6 * s * s)


def cutoff_bubble(r, N, eps, delta=1.0):
    return psi(r, delta) * U_eps(r, N, eps)


def tilde_scale(N, mu, S=None):
    """Factor with U~ = factor * U."""
    if S is None:
        S = sobolev_constant(N)
    C = hls_constant(N, mu)
    return S ** ((N - mu) * (2 - N) / (4 * (N - mu + 2))) * C ** ((2 - N) / (2 * (N - mu + 2)))


def U_tilde(r, N, mu, S=None):
    return tilde_scale(N, mu, S) * U(r, N)


# --- constants ----------------------------------------------------------------

@lru_cache(maxsize=8)
def default_radial(N, m=20000, r_min=1e-7, r_max=1e7):
    return RadialGrid(N, r_min, r_max, m)


@lru_cache(maxsize=16)
def _radial_op(N, mu, m=20000):
    return RadialRiesz(default_radial(N, m), mu)


def sobolev_quotient(u, grid):
    N = grid.N
    p = 2 * N / (N - 2)
    return grad_sq_integral(u, grid) / integrate(np.abs(u) ** p, grid) ** (2 / p)


@lru_cache(maxsize=16)
def sobolev_constant(N, m=20000):
    """S as the Rayleigh quotient of U on a fine radial grid."""
    g = default_radial(N, m)
    return float(sobolev_quotient(U(g.r, N), g))


def nonlocal_quotient(u, grid, op):
    q = (2 * grid.N - op.mu) / (grid.N - 2)
    return grad_sq_integral(u, grid) / double_integral_D(u, op, q) ** (1 / q)


def shl_constant(N, mu, m=20000):
    """Both routes to S_HL: the closed relation S / C^{(N-2)/(2N-mu)} and the
    nonlocal Rayleigh quotient of U evaluated on a radial grid."""
    _check(N, mu)
    S = sobolev_constant(N, m)
    rel = S / hls_constant(N, mu) ** ((N - 2) / (2 * N - mu))
    g = default_radial(N, m)
    quo = nonlocal_quotient(U(g.r, N), g, _radial_op(N, mu, m))
    return {"via_relation": float(rel), "via_quotient": float(quo),
            "rel_diff": float(abs(rel - quo) / rel)}


def shl_relation(N, mu, m=20000):
    return sobolev_constant(N, m) / hls_constant(N, mu) ** ((N - 2) / (2 * N - mu))


def critical_level(N, mu, m=20000):
    """c_* = level_coeff * S_HL^{(2N-mu)/(N+2-mu)}."""
    ex = derive_exponents(N, mu)
    return ex.level_coeff * shl_relation(N, mu, m) ** ((2 * N - mu) / (N + 2 - mu))


@dataclass
class ConstantSet:
    N: int
    mu: float
    C_hls: float
    S: float
    S_HL: float
    c_star: float
    S_HL_quotient: float
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def constant_set(N, mu, m=20000):
    g = default_radial(N, m)
    sh = shl_constant(N, mu, m)
    return ConstantSet(
        N, float(mu), hls_constant(N, mu), sobolev_constant(N, m), sh["via_relation"],
        critical_level(N, mu, m), sh["via_quotient"],
        provenance={
            "C_hls": "closed form (log-Gamma)",
            "S": f"Rayleigh quotient of U, radial grid m={g.m}, r in [{g.r_min:g}, {g.r_max:g}]",
            "S_HL": "S / C_hls^((N-2)/(2N-mu))",
            "S_HL_quotient": "nonlocal Rayleigh quotient of U on the same radial grid",
            "c_star": "level_coeff * S_HL^((2N-mu)/(N+2-mu))",
            "S_closed_form_check": sobolev_closed_form(N),
        })


def hls_extremal_ratio(N, mu, m=20000, gamma=1.0):
    """HLS ratio of h(x) = (gamma^2 + |x|^2)^{-(2N-mu)/2}; equals C(N, mu)."""
    g = default_radial(N, m)
    h = (gamma**2 + g.r**2) ** (-(2 * N - mu) / 2)
    return hls_ratio(h, _radial_op(N, mu, m))


# --- residuals of the limit equation -------------------------------------------

def radial_neg_laplacian(v, grid):
    """-Delta of a radial profile: -r^{-2}(u_xx + (N-2) u_x)."""
    dx = grid.dx
    ux = radial_derivative(v, dx)
    uxx = radial_derivative(ux, dx)
    uxx[2:-2] = (-v[:-4] + 16 * v[1:-3] - 30 * v[2:-2] + 16 * v[3:-1] - v[4:]) / (12 * dx * dx)
    return -np.exp(-2 * grid.x) * (uxx + (grid.N - 2) * ux)


def limit_residual(N, mu, m=20000):
    """Relative weighted L^2 norm of -Delta U~ - (|x|^{-mu} * U~^q) U~^{q-1}."""
    g = default_radial(N, m)
    op = _radial_op(N, mu, m)
    q = (2 * N - mu) / (N - 2)
    u = U_tilde(g.r, N, mu)
    lap = radial_neg_laplacian(u, g)
    rhs = op.convolve(u**q) * u ** (q - 1)
    res = lap - rhs
    # drop the outermost stencil nodes, where one-sided differences are used
    w = g.weights.copy()
    w[:3] = 0
    w[-3:] = 0
    return float(np.sqrt(np.dot(w, res**2) / np.dot(w, lap**2)))


def tilde_identities(N, mu, m=20000):
    """Returns (int |grad U~|^2, D(U~), S_HL^{(2N-mu)/(N-mu+2)})."""
    g = default_radial(N, m)
    u = U_tilde(g.r, N, mu)
    q = (2 * N - mu) / (N - 2)
    return (grad_sq_integral(u, g), double_integral_D(u, _radial_op(N, mu, m), q),
            shl_relation(N, mu, m) ** ((2 * N - mu) / (N - mu + 2)))


def limit_energy_of_tilde(N, mu, m=20000):
    a, d, _ = tilde_identities(N, mu, m)
    q = (2 * N - mu) / (N - 2)
    return 0.5 * a - d / (2 * q)


# --- cutoff-bubble asymptotics -----------------------------------------------

def _loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def bubble_asymptotics(N, mu, eps_list=(0.1, 0.05, 0.025, 0.0125), delta=1.0, m=20000):
    """Table of int|grad u_eps|^2, D(u_eps), int u_eps^2 plus fitted exponents."""
    _check(N, mu)
    q = (2 * N - mu) / (N - 2)
    S = sobolev_constant(N)
    C = hls_constant(N, mu)
    SHL = shl_relation(N, mu)
    grad0 = C ** ((N - 2) / (2 * N - mu) * N / 2) * SHL ** (N / 2)
    e57 = C ** ((N - 2) / (2 * N - mu) * N / 2) * SHL ** ((N - 2) / 2)
    rows = []
    for eps in sorted(eps_list, reverse=True):
        g = RadialGrid(N, eps * 1e-6, 2 * delta, m)
        op = RadialRiesz(g, mu)
        u = cutoff_bubble(g.r, N, eps, delta)
        gr = grad_sq_integral(u, g)
        D = double_integral_D(u, op, q)
        mass = integrate(u * u, g)
        row = {"eps": eps, "grad_sq": gr, "D": D, "mass": mass,
               "grad_remainder": gr - grad0,
               "E57_lhs": D ** ((N - 2) / (2 * N - mu)), "E57_main": e57,
               "mass_ratio": (mass / (eps**2 * abs(np.log(eps))) if eps != 1 else float("nan"))
               if N == 4 else mass / eps**2,
               "reliable": bool(eps <= delta / 4 and g.dx < 0.05)}
        rows.append(row)
    good = [r for r in rows if r["reliable"]]
    fit = good[-3:]
    out = {"N": N, "mu": mu, "delta": delta, "S": S, "grad_limit": grad0, "rows": rows,
           "mass_ratio_kind": "int u^2/(eps^2|ln eps|)" if N == 4 else "int u^2/eps^2"}
    if len(fit) >= 2 and all(r["grad_remainder"] > 0 for r in fit):
        out["grad_exponent"] = _loglog_slope([r["eps"] for r in fit], [r["grad_remainder"] for r in fit])
    else:
        out["grad_exponent"] = float("nan")
    if len(good) >= 2:
        a, b = good[-2]["mass_ratio"], good[-1]["mass_ratio"]
        out["mass_ratio_variation"] = abs(a - b) / max(abs(a), abs(b))
    out["target_exponent"] = N - 2
    return out
