"""Problem parameters, derived exponents and the potential-well library."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


class ParameterError(ValueError):
    pass


def _exact(x) -> Fraction:
    # decimal literal of the float, so 0.1 stays 1/10
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


@dataclass(frozen=True)
class ProblemParams:
    N: int = 4
    mu: float = 2.0
    lam: float = 0.0
    beta: float = 0.0
    indefinite_mode: bool = False

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ParameterError(f"dimension N must be an integer >= 3, got {self.N}")
        if not (0 < self.mu < self.N):
            raise ParameterError(f"mu must lie in (0, N) = (0, {self.N}), got {self.mu}")
        if self.lam < 0 or self.beta < 0:
            raise ParameterError("lambda and beta must be nonnegative")
        if self.indefinite_mode and self.mu >= 4:
            raise ParameterError("indefinite mode needs mu < 4 (convexity of the nonlocal term)")

    @property
    def q(self) -> float:
        """Upper critical exponent (2N - mu)/(N - 2)."""
        return (2 * self.N - self.mu) / (self.N - 2)

    def with_(self, **kw) -> "ProblemParams":
        d = dict(N=self.N, mu=self.mu, lam=self.lam, beta=self.beta,
                 indefinite_mode=self.indefinite_mode)
        d.update(kw)
        return ProblemParams(**d)


@dataclass(frozen=True)
class ExponentSet:
    two_mu_star: float
    nehari_exp: float
    level_coeff: float
    exact: dict = field(default_factory=dict, compare=False)


def derive_exponents(N, mu) -> ExponentSet:
    if isinstance(N, ProblemParams):
        N, mu = N.N, N.mu
    if int(N) != N or N < 3:
        raise ParameterError(f"dimension N must be an integer >= 3, got {N}")
    if not (0 < mu < N):
        raise ParameterError(f"mu must lie in (0, N), got {mu}")
    n, m = Fraction(int(N)), _exact(mu)
    q = (2 * n - m) / (n - 2)
    ne = 2 * q - 2
    lc = (n + 2 - m) / (4 * n - 2 * m)
    return ExponentSet(float(q), float(ne), float(lc),
                       exact={"two_mu_star": q, "nehari_exp": ne, "level_coeff": lc})


# --- potentials -----------------------------------------------------------

KINDS = ("ball_well", "box_well", "annulus_well", "smooth_ramp_well")


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


@dataclass(frozen=True)
class Potential:
    """V = height_cap * sigma(dist(x, Omega)/ramp_width), sigma a C^1 clamp.

    height_cap=None gives unbounded quadratic growth (dist/ramp_width)^2 * M0,
    which is the smooth_ramp_well default.
    """
    kind: str = "ball_well"
    radius: float = 1.0           # ball / smooth ramp radius, annulus outer radius
    inner_radius: float = 0.5     # annulus only
    half_width: float = 1.0       # box only
    ramp_width: float = 0.25
    M0: float = 1.0
    height_cap: float | None = 2.0
    center: tuple = ()
    allow_origin_outside: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        if self.ramp_width <= 0 or self.M0 <= 0:
            raise ParameterError("ramp_width and M0 must be positive")
        if self.height_cap is not None and self.height_cap < 0:
            raise ParameterError("height_cap must be nonnegative")
        if self.kind == "annulus_well" and not (0 <= self.inner_radius < self.radius):
            raise ParameterError("annulus needs 0 <= inner_radius < radius")

    def _shift(self, coords):
        if not self.center:
            return coords
        return [c - a for c, a in zip(coords, self.center)]

    def distance(self, coords):
        """Euclidean distance to the zero set (0 inside)."""
        xs = self._shift(coords)
        if self.kind == "box_well":
            d2 = sum(np.maximum(np.abs(x) - self.half_width, 0.0) ** 2 for x in xs)
            return np.sqrt(d2)
        r = np.sqrt(sum(x * x for x in xs))
        if self.kind == "annulus_well":
            return np.maximum(np.maximum(self.inner_radius - r, r - self.radius), 0.0)
        return np.maximum(r - self.radius, 0.0)

    def evaluate(self, coords):
        s = self.distance(coords) / self.ramp_width
        cap = self.height_cap
        if cap is None:
            return self.M0 * s * s
        return cap * _smoothstep(s)

    def on(self, grid):
        return np.broadcast_to(self.evaluate(grid.coords()), grid.shape).copy()

    def zero_mask(self, grid):
        return np.broadcast_to(self.distance(grid.coords()) <= 0.0, grid.shape).copy()

    def well_scale(self) -> float:
        if self.kind == "box_well":
            return self.half_width
        return self.radius


def smooth_ramp_well(radius=1.0, ramp_width=0.25, M0=1.0):
    return Potential(kind="smooth_ramp_well", radius=radius, ramp_width=ramp_width,
                     M0=M0, height_cap=None)


@dataclass
class ValidationReport:
    min_V: float
    zero_points: int
    origin_in_zero_set: bool
    zero_set_touches_shell: bool
    shell_min_V: float
    fraction_below_M0: float
    below_M0_touches_shell: bool
    v1: bool
    v2: bool
    v3: bool
    notes: list = field(default_factory=list)

    @property
    def ok(self):
        return self.v1 and self.v2 and self.v3

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"ok": self.ok}


def _shell(shape):
    m = np.zeros(shape, bool)
    for ax in range(len(shape)):
        idx = [slice(None)] * len(shape)
        idx[ax] = 0
        m[tuple(idx)] = True
        idx[ax] = -1
        m[tuple(idx)] = True
    return m


def validate_values(V, grid, M0=1.0, require_origin=True):
    """Finite-box checks of the three well assumptions.

    The conditions are about |x| -> infinity; here they are proxied by the
    outermost grid shell, which the notes say explicitly.
    """
    V = np.asarray(V, float)
    if not np.all(np.isfinite(V)):
        raise ParameterError("potential has non-finite samples")
    shell = _shell(V.shape)
    zero = V <= 0.0
    below = V <= M0
    origin = bool(zero[grid.origin_index])
    notes = ["the level-set measure and height bounds are checked on the finite box only"]
    touches = bool(np.any(zero & shell))
    v1 = bool(V.min() >= 0 and zero.any() and not touches)
    if V.min() < 0:
        notes.append("V takes negative values")
    if not zero.any():
        notes.append("zero set is empty on this grid")
    if touches:
        notes.append("zero set reaches the box boundary (not bounded within the box)")
    if require_origin and not origin:
        v1 = False
        notes.append("origin not in zero set")
    below_touch = bool(np.any(below & shell))
    v2 = bool(V.min() >= 0 and not below_touch)
    shell_min = float(V[shell].min())
    v3 = shell_min > 0
    return ValidationReport(float(V.min()), int(zero.sum()), origin, touches, shell_min,
                            float(below.mean()), below_touch, v1, v2, v3, notes)


def validate_potential(V: Potential, grid) -> ValidationReport:
    rep = validate_values(V.on(grid), grid, V.M0, require_origin=not V.allow_origin_outside)
    if rep.min_V < 0 or rep.zero_points == 0:
        raise ParameterError("; ".join(rep.notes))
    return rep
