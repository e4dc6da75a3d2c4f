"""Riesz convolution |x|^{-mu} * f, the double integral D(u) and the X_NL norm.

Two backends:

* ``RieszOperator`` on a tensor grid: real-space kernel samples on the 2x
  zero-padded box, FFT convolution with pruned transforms (only the first n
  rows of every axis carry data).
* ``RadialRiesz`` on a geometric radial grid: after the angular integration
  the kernel is  |S^{N-1}| max(r,s)^{-mu} 2F1(mu/2, mu/2-N/2+1; N/2; (min/max)^2),
  which in x = ln r becomes a Toeplitz kernel, again applied by FFT.
"""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np
import scipy.fft as sfft
from scipy import integrate as sint
from scipy import special as sp
from scipy.signal import fftconvolve

from .grid import RadialGrid, TensorGrid, gregory_weights, sphere_area, values_of

CACHE_ENV = "CHOQUARD_CACHE"


def _check_mu(N, mu):
    if not (0 < mu < N):
        raise ValueError(f"mu must lie in (0, N), got mu={mu}, N={N}")


# --- singular cell ----------------------------------------------------------

def ball_cell_average(N, mu):
    """Average of |x|^{-mu} over the ball with the volume of the unit cube."""
    rho = (sp.gamma(N / 2 + 1) / np.pi ** (N / 2)) ** (1 / N)
    return sphere_area(N) * rho ** (N - mu) / (N - mu)


def cube_pair_average(N, mu, npts=24):
    """E|X - Y|^{-mu} for X, Y independent and uniform in the unit cube.

    The difference Z = X - Y has density prod(1 - |z_i|) on [-1,1]^N.  Split
    the positive orthant into N pyramids z = s(1, t), t in [0,1]^{N-1}; the
    radial factor s^{N-1-mu} is integrated by Gauss-Jacobi, t by Gauss-Legendre.
    """
    _check_mu(N, mu)
    a = N - 1 - mu
    xs, ws = sp.roots_jacobi(npts, 0.0, a)
    s = (xs + 1) / 2
    ws = ws / 2 ** (a + 1)
    xt, wt = np.polynomial.legendre.leggauss(npts)
    t = (xt + 1) / 2
    wt = wt / 2
    T = np.stack([g.ravel() for g in np.meshgrid(*([t] * (N - 1)), indexing="ij")], 1)
    W = np.ones(len(T))
    for g in np.meshgrid(*([wt] * (N - 1)), indexing="ij"):
        W = W * g.ravel()
    base = W * (1 + np.sum(T * T, 1)) ** (-mu / 2)
    tot = 0.0
    for si, wi in zip(s, ws):
        tot += wi * (1 - si) * np.dot(base, np.prod(1 - si * T, 1))
    return 2**N * N * tot


SELF_TERMS = {"galerkin": cube_pair_average, "ball": ball_cell_average}


# --- tensor backend ---------------------------------------------------------

class RieszOperator:
    """Free-space convolution with |x|^{-mu} on a TensorGrid.

    The origin sample of the kernel is replaced by an average of |x|^{-mu}
    over the cell: ``self_term="galerkin"`` (default) uses the exact
    average over pairs of points in one cell, ``"ball"`` the average over the
    equal-volume ball around the origin.
    """

    def __init__(self, grid: TensorGrid, mu: float, self_term: str = "galerkin"):
        _check_mu(grid.N, mu)
        self.grid, self.mu, self.self_term = grid, float(mu), self_term
        N, n, h = grid.N, grid.n, grid.h
        M = 2 * n
        off = sfft.fftfreq(M, 1.0 / M) * h
        r2 = sum(g * g for g in np.meshgrid(*([off] * N), indexing="ij", sparse=True))
        with np.errstate(divide="ignore"):
            K = r2 ** (-mu / 2)
        self.cell_value = SELF_TERMS[self_term](N, mu) * h ** (-mu)
        K[(0,) * N] = self.cell_value
        # even kernel -> real spectrum
        self.kernel_hat = sfft.rfftn(K).real
        self.kernel_hat.setflags(write=False)

    def convolve(self, f):
        v = values_of(f)
        g = self.grid
        if v.shape != g.shape:
            raise ValueError(f"field shape {v.shape} does not match operator grid {g.shape}")
        N, n = g.N, g.n
        M = 2 * n
        X = sfft.rfft(v, n=M, axis=N - 1)
        for ax in range(N - 2, -1, -1):
            X = sfft.fft(X, n=M, axis=ax)
        X *= self.kernel_hat
        for ax in range(N - 1):
            X = sfft.ifft(X, axis=ax)[(slice(None),) * ax + (slice(0, n),)]
        return sfft.irfft(X, n=M, axis=N - 1)[..., :n] * g.dv

    __call__ = convolve


# --- radial backend ---------------------------------------------------------

def angular_weight(r, s, N, mu):
    """w(r,s) = int_{S^{N-1}} |r e - s w|^{-mu} dw, closed form."""
    r, s = np.asarray(r, float), np.asarray(s, float)
    hi, lo = np.maximum(r, s), np.minimum(r, s)
    return sphere_area(N) * hi ** (-mu) * sp.hyp2f1(mu / 2, mu / 2 - N / 2 + 1, N / 2, (lo / hi) ** 2)


def angular_weight_quadrature(r, s, N, mu):
    """Same weight by direct adaptive quadrature over the polar angle."""
    c = sphere_area(N - 1)
    f = lambda th: (r * r + s * s - 2 * r * s * np.cos(th)) ** (-mu / 2) * np.sin(th) ** (N - 2)
    val, _ = sint.quad(f, 0, np.pi, points=[0.0], limit=400, epsabs=0, epsrel=1e-12)
    return c * val


def toeplitz_generator(N, mu, m, dx):
    """G(k dx), k = 0..m-1, G(z) = e^{-mu|z|/2} 2F1(.., e^{-2|z|}).

    G has the expansion A + B|z|^p + ... with p = N-1-mu at z = 0; the
    diagonal entry carries the zeta-function correction that makes the
    trapezoid sum exact for the |z|^p part (integer p: plain regular value).
    """
    a, b, c = mu / 2, mu / 2 - N / 2 + 1, N / 2
    z = np.arange(m) * dx
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.exp(-mu * z / 2) * sp.hyp2f1(a, b, c, np.exp(-2 * z))
    p = N - 1 - mu
    A = sp.gamma(c) * sp.gamma(c - a - b) / (sp.gamma(c - a) * sp.gamma(c - b))
    if abs(p - round(p)) > 1e-12:
        B = sp.gamma(c) * sp.gamma(a + b - c) * sp.rgamma(a) * sp.rgamma(b) * 2**p
        G[0] = A - 2 * sp.zeta(-p) * B * dx**p
    else:
        G[0] = A
    return G


def _cache_dir(cache_dir=None):
    d = cache_dir or os.environ.get(CACHE_ENV)
    return Path(d) if d else None


def cached_generator(N, mu, m, dx, cache_dir=None):
    d = _cache_dir(cache_dir)
    if d is None:
        return toeplitz_generator(N, mu, m, dx)
    key = hashlib.sha1(json.dumps([N, float(mu), m, float(dx)]).encode()).hexdigest()[:16]
    raw = d / f"radial_kernel_{key}.f64"
    meta = raw.with_suffix(".f64.json")
    if raw.exists() and meta.exists():
        info = json.loads(meta.read_text())
        if info.get("dims") == [m]:
            return np.frombuffer(raw.read_bytes(), dtype="<f8").copy()
    G = toeplitz_generator(N, mu, m, dx)
    d.mkdir(parents=True, exist_ok=True)
    raw.write_bytes(np.ascontiguousarray(G, dtype="<f8").tobytes())
    meta.write_text(json.dumps({"dims": [m], "n": m, "L": float(dx), "kind": "radial_kernel",
                                "label": f"N={N} mu={mu}"}, sort_keys=True))
    return G


class RadialRiesz:
    """Riesz convolution of radial functions on a RadialGrid."""

    def __init__(self, grid: RadialGrid, mu: float, cache_dir=None):
        _check_mu(grid.N, mu)
        self.grid, self.mu = grid, float(mu)
        G = cached_generator(grid.N, mu, grid.m, grid.dx, cache_dir)
        self._Gfull = np.concatenate([G[::-1], G[1:]])
        self._w = gregory_weights(grid.m, grid.dx)
        self._x = grid.x

    def _toeplitz(self, a):
        m = self.grid.m
        return fftconvolve(a, self._Gfull)[m - 1: 2 * m - 1]

    def convolve(self, f):
        """(|x|^{-mu} * f)(r_i) for the radial profile f."""
        N, mu, x = self.grid.N, self.mu, self._x
        a = values_of(f) * np.exp((N - mu / 2) * x) * self._w
        return sphere_area(N) * np.exp(-mu * x / 2) * self._toeplitz(a)

    __call__ = convolve

    def pair_integral(self, f, g=None):
        """int int f(x) g(y) |x-y|^{-mu} dx dy."""
        N, mu, x = self.grid.N, self.mu, self._x
        e = np.exp((N - mu / 2) * x) * self._w
        a = values_of(f) * e
        b = a if g is None else values_of(g) * e
        return float(sphere_area(N) ** 2 * np.dot(b, self._toeplitz(a)))


# --- D(u) and the nonlocal norm --------------------------------------------

def make_operator(grid, mu, **kw):
    if isinstance(grid, RadialGrid):
        return RadialRiesz(grid, mu, **kw)
    return RieszOperator(grid, mu, **kw)


def double_integral_D(u, op, q=None):
    """D(u) = int int |u(x)|^q |u(y)|^q |x-y|^{-mu}, q = 2mu* by default."""
    N, mu = op.grid.N, op.mu
    _check_mu(N, mu)
    if q is None:
        q = (2 * N - mu) / (N - 2)
    f = np.abs(values_of(u)) ** q
    if isinstance(op, RadialRiesz):
        return max(op.pair_integral(f), 0.0)
    return float(op.grid.dv * np.sum(f * op.convolve(f)))


def nl_norm(u, op, q=None):
    """X_NL norm D(u)^{1/(2q)}."""
    N, mu = op.grid.N, op.mu
    if q is None:
        q = (2 * N - mu) / (N - 2)
    return double_integral_D(u, op, q) ** (1 / (2 * q))


def hls_ratio(f, op):
    """int int f f |x-y|^{-mu} / |f|_{2N/(2N-mu)}^2 on a radial grid."""
    g = op.grid
    t = 2 * g.N / (2 * g.N - op.mu)
    v = values_of(f)
    norm = np.dot(g.weights, np.abs(v) ** t) ** (1 / t)
    return op.pair_integral(v) / norm**2
