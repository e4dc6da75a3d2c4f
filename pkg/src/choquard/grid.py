"""Tensor and radial grids, quadrature, spectral derivatives, snapshots."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft
from scipy import special as sp

MEMORY_BUDGET = 2 * 1024**3  # bytes for one real field


class GridError(ValueError):
    pass


def sphere_area(N) -> float:
    """|S^{N-1}|."""
    return 2 * np.pi ** (N / 2) / sp.gamma(N / 2)


def ball_volume(N, r=1.0) -> float:
    return np.pi ** (N / 2) / sp.gamma(N / 2 + 1) * r**N


@dataclass(frozen=True)
class TensorGrid:
    """Uniform periodic grid on [-L, L)^N, origin at index n//2 on every axis."""
    N: int
    n: int
    L: float

    def __post_init__(self):
        if self.n < 16 and self.N > 2 or self.n < 4:
            raise GridError(f"n = {self.n} too small")
        if self.n & (self.n - 1):
            raise GridError("n must be a power of two")
        if self.N > 5:
            raise GridError("tensor grids are limited to N <= 5")
        if 8 * self.n**self.N > MEMORY_BUDGET:
            raise GridError("grid exceeds memory budget")

    kind = "tensor"

    @property
    def h(self):
        return 2 * self.L / self.n

    @property
    def dv(self):
        return self.h**self.N

    @property
    def shape(self):
        return (self.n,) * self.N

    @property
    def size(self):
        return self.n**self.N

    @property
    def origin_index(self):
        return (self.n // 2,) * self.N

    @property
    def axis(self):
        return -self.L + self.h * np.arange(self.n)

    def coords(self):
        """Sparse coordinate arrays (broadcastable)."""
        return np.meshgrid(*([self.axis] * self.N), indexing="ij", sparse=True)

    def r2(self):
        return sum(c * c for c in self.coords())

    def wavenumbers(self, real=False):
        k = 2 * np.pi * sfft.fftfreq(self.n, self.h)
        ks = [k] * self.N
        if real:
            ks[-1] = 2 * np.pi * sfft.rfftfreq(self.n, self.h)
        return np.meshgrid(*ks, indexing="ij", sparse=True)

    def k2(self, real=True):
        return sum(c * c for c in self.wavenumbers(real))

    def meta(self):
        return {"kind": "tensor", "N": self.N, "n": self.n, "L": self.L}


@dataclass(frozen=True)
class RadialGrid:
    """Geometric radial grid: x = ln r uniform on [ln r_min, ln r_max].

    Uniform spacing in ln r is a constant grading ratio exp(dx) and turns the
    radial Riesz kernel into a convolution kernel in x.
    """
    N: int
    r_min: float = 1e-7
    r_max: float = 1e7
    m: int = 20000

    def __post_init__(self):
        if self.m < 8:
            raise GridError("radial grid needs at least 8 nodes")
        if not (0 < self.r_min < self.r_max):
            raise GridError("need 0 < r_min < r_max")

    kind = "radial"

    @property
    def x(self):
        return np.linspace(np.log(self.r_min), np.log(self.r_max), self.m)

    @property
    def dx(self):
        return (np.log(self.r_max) - np.log(self.r_min)) / (self.m - 1)

    @property
    def r(self):
        return np.exp(self.x)

    @property
    def ratio(self):
        return np.exp(self.dx)

    @property
    def line_weights(self):
        return gregory_weights(self.m, self.dx)

    @property
    def weights(self):
        """Volume weights |S^{N-1}| r^N dx (dr = r dx)."""
        return sphere_area(self.N) * self.line_weights * np.exp(self.N * self.x)

    @property
    def shape(self):
        return (self.m,)

    def meta(self):
        return {"kind": "radial", "N": self.N, "r_min": self.r_min, "r_max": self.r_max, "m": self.m}


def gregory_weights(m, h):
    """Trapezoid with third-order Gregory end corrections (all positive)."""
    w = np.full(m, h)
    c = np.array([3 / 8, 7 / 6, 23 / 24])
    w[:3] *= c
    w[-3:] *= c[::-1]
    return w


class Field:
    """Samples of a real function on a grid."""

    def __init__(self, grid, values, label=""):
        v = np.asarray(values, dtype=float)
        if v.shape != tuple(grid.shape):
            raise GridError(f"shape {v.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(v)):
            raise GridError("field has non-finite values")
        self.grid, self.values, self.label = grid, v, label

    def _wrap(self, v):
        return Field(self.grid, v, self.label)

    def _other(self, o):
        if isinstance(o, Field):
            if o.grid != self.grid:
                raise GridError("grid mismatch")
            return o.values
        return o

    def __add__(self, o):
        return self._wrap(self.values + self._other(o))

    __radd__ = __add__

    def __sub__(self, o):
        return self._wrap(self.values - self._other(o))

    def __mul__(self, o):
        return self._wrap(self.values * self._other(o))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.values)

    def __repr__(self):
        return f"Field({self.grid!r}, label={self.label!r})"


def values_of(f):
    return f.values if isinstance(f, Field) else np.asarray(f, float)


def integrate(f, grid=None) -> float:
    if isinstance(f, Field):
        grid = f.grid
    v = values_of(f)
    if not np.all(np.isfinite(v)):
        raise GridError("non-finite integrand")
    if grid.kind == "radial":
        return float(np.dot(grid.weights, v))
    return float(grid.dv * v.sum())


def neg_laplacian(u, grid):
    """Spectral -Delta on the periodic tensor grid."""
    v = values_of(u)
    return sfft.irfftn(grid.k2() * sfft.rfftn(v), s=v.shape)


def _rfft_multiplicity(grid):
    # bins of the last rfft axis that stand for two conjugate modes
    n = grid.n
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def radial_derivative(v, dx):
    """Fourth-order finite difference d/dx on a uniform grid."""
    v = np.asarray(v, float)
    m = v.size
    if m < 5:
        raise GridError("radial profiles need at least 5 nodes")
    d = np.empty(m)
    d[2:-2] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * dx)
    f = np.array([-25, 48, -36, 16, -3]) / (12 * dx)
    g = np.array([-3, -10, 18, -6, 1]) / (12 * dx)
    d[0] = f @ v[:5]
    d[1] = g @ v[:5]
    d[-1] = -(f @ v[::-1][:5])
    d[-2] = -(g @ v[::-1][:5])
    return d


def grad_sq_integral(u, grid=None) -> float:
    """Dirichlet energy int |grad u|^2."""
    if isinstance(u, Field):
        grid = u.grid
    v = values_of(u)
    if grid.kind == "radial":
        ux = radial_derivative(v, grid.dx)
        # |u_r|^2 r^{N-1} dr = u_x^2 e^{(N-2)x} dx
        return float(sphere_area(grid.N) * np.dot(grid.line_weights, ux * ux * np.exp((grid.N - 2) * grid.x)))
    uh = sfft.rfftn(v)
    mult = _rfft_multiplicity(grid)
    s = np.sum(mult * np.sum((grid.k2() * (uh.real**2 + uh.imag**2)).reshape(-1, uh.shape[-1]), axis=0))
    return float(grid.dv * s / grid.size)


def fourier_forward(f):
    return sfft.fftn(values_of(f), norm="ortho")


def fourier_backward(spec, grid=None, label=""):
    v = sfft.ifftn(spec, norm="ortho")
    if np.iscomplexobj(v):
        v = v.real
    return Field(grid, v, label) if grid is not None else v


def translate(v, shift):
    """Circular shift by integer grid offsets."""
    return np.roll(values_of(v), tuple(shift), axis=tuple(range(len(shift))))


# --- snapshots ------------------------------------------------------------

def save_snapshot(path, values, grid, label="", extra=None):
    path = Path(path)
    v = np.ascontiguousarray(values_of(values), dtype="<f8")
    path.write_bytes(v.tobytes(order="C"))
    meta = {"dims": list(v.shape), "n": getattr(grid, "n", getattr(grid, "m", v.shape[0])),
            "L": getattr(grid, "L", getattr(grid, "r_max", None)), "kind": grid.kind, "label": label}
    if extra:
        meta.update(extra)
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, sort_keys=True, indent=1))
    return path


def load_snapshot(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    v = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(meta["dims"])
    return v.copy(), meta
