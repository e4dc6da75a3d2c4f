"""Numerical laboratory for the critical Choquard equation with a potential well

    -Delta u + (lambda V - beta) u = (|x|^{-mu} * |u|^q) |u|^{q-2} u,   q = (2N - mu)/(N - 2).
"""
from .params import ProblemParams, Potential, derive_exponents, validate_potential
from .grid import TensorGrid, RadialGrid, Field, integrate, grad_sq_integral
from .riesz import RieszOperator, RadialRiesz, double_integral_D, nl_norm
from .bubbles import hls_constant, sobolev_constant, shl_constant, critical_level
from .functional import Problem, energy, gradient, nehari_project

__all__ = [
    "ProblemParams", "Potential", "derive_exponents", "validate_potential",
    "TensorGrid", "RadialGrid", "Field", "integrate", "grad_sq_integral",
    "RieszOperator", "RadialRiesz", "double_integral_D", "nl_norm",
    "hls_constant", "sobolev_constant", "shl_constant", "critical_level",
    "Problem", "energy", "gradient", "nehari_project",
]
