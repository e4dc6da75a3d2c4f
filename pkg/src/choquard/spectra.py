"""Eigenvalues of the masked Dirichlet Laplacian and of L = -Delta + lambda V - beta,
the splitting E- + E+, the reduction map h and the reduced functional."""
from __future__ import annotations

from dataclasses import dataclass, field

import warnings

import numpy as np
import pyamg
import scipy.fft as sfft
import scipy.sparse as sps
from scipy.sparse.linalg import LinearOperator, lobpcg

from .functional import Problem, linear_part
from .grid import integrate, neg_laplacian


class EigenError(RuntimeError):
    pass


class DegenerateSplit(EigenError):
    pass


class ReductionError(RuntimeError):
    pass


def _fourier_solve(r, grid, shift):
    return sfft.irfftn(sfft.rfftn(r) / (grid.k2() + shift), s=r.shape)


def _lobpcg(A, M, n, k, rng, tol, maxiter):
    # the block is exactly k wide: split a degenerate cluster and the edge
    # vectors stall, so callers choose k at a cluster boundary
    X = rng.standard_normal((n, k))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        vals, vecs = lobpcg(A, X, M=M, largest=False, tol=tol, maxiter=maxiter)
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def _fd_operator(grid, diag):
    """Second-order periodic finite-difference -Delta + diag as a sparse matrix."""
    n1 = grid.n
    T = sps.diags([-np.ones(n1 - 1), 2 * np.ones(n1), -np.ones(n1 - 1)], [-1, 0, 1], format="lil")
    T[0, -1] = T[-1, 0] = -1
    T = T.tocsr() / grid.h**2
    I = sps.identity(n1, format="csr")
    out = None
    for ax in range(grid.N):
        K = T if ax == 0 else I
        for j in range(1, grid.N):
            K = sps.kron(K, T if j == ax else I, format="csr")
        out = K if out is None else out + K
    return (out + sps.diags(np.broadcast_to(diag, grid.shape).ravel())).tocsr()


def dirichlet_eigs(mask, grid, k=1, tol=1e-8, maxiter=500, seed=0, return_vectors=False):
    """k smallest eigenvalues of -Delta restricted to the mask (discrete Dirichlet problem).

    The operator is P(-Delta)P with P the restriction to the mask and -Delta the
    spectral Laplacian of the periodic grid.
    """
    mask = np.asarray(mask, bool)
    idx = np.flatnonzero(mask)
    n = idx.size
    if n < k + 4:
        raise EigenError("mask too small for the requested number of eigenvalues")
    shape = grid.shape

    def embed(x):
        f = np.zeros(grid.size)
        f[idx] = x
        return f.reshape(shape)

    def mv(X):
        X = X.reshape(n, -1)
        return np.stack([neg_laplacian(embed(c), grid).ravel()[idx] for c in X.T], 1)

    shift = 1.0 / grid.L**2
    def pc(X):
        X = X.reshape(n, -1)
        return np.stack([_fourier_solve(embed(c), grid, shift).ravel()[idx] for c in X.T], 1)

    A = LinearOperator((n, n), matvec=mv, matmat=mv, dtype=float)
    M = LinearOperator((n, n), matvec=pc, matmat=pc, dtype=float)
    vals, vecs = _lobpcg(A, M, n, k, np.random.default_rng(seed), tol, maxiter)
    res = mv(vecs) - vecs * vals
    rel = np.linalg.norm(res, axis=0) / np.linalg.norm(vecs, axis=0) / np.abs(vals)
    if np.any(rel > 1e-6):
        raise EigenError(f"Dirichlet eigensolver did not converge (residual {rel.max():.2e})")
    if return_vectors:
        fields = np.stack([embed(v) for v in vecs.T]) / np.sqrt(grid.dv)
        return vals, fields
    return vals


@dataclass
class SpectralSplit:
    eigenvalues: np.ndarray
    fields: np.ndarray            # (k, *shape), L^2-orthonormal
    residuals: np.ndarray
    lam: float
    beta: float
    margin: float
    notes: list = field(default_factory=list)

    @property
    def morse_index(self):
        return int(np.sum(self.eigenvalues < 0))

    @property
    def negative_basis(self):
        return self.fields[: self.morse_index]


def schrodinger_eigs(prob: Problem, k=5, beta1=None, tol=1e-9, maxiter=500, seed=0,
                     degeneracy=1e-6, pc_shift=10.0):
    """k lowest eigenpairs of L = -Delta + lambda V - beta on the periodic grid.

    Preconditioner: one smoothed-aggregation AMG cycle for the finite-difference
    operator -Delta_h + lambda V + c, spectrally equivalent to L + beta + c.
    """
    g = prob.grid
    n = g.size
    shape = g.shape
    lamV = prob.params.lam * prob.V if prob.V is not None else np.zeros(shape)
    beta = prob.params.beta

    def apply(x):
        x = x.reshape(shape)
        return (neg_laplacian(x, g) + (lamV - beta) * x).ravel()

    def mv(X):
        return np.stack([apply(c) for c in X.reshape(n, -1).T], 1)

    ml = pyamg.smoothed_aggregation_solver(_fd_operator(g, lamV + pc_shift), max_coarse=500)
    P = ml.aspreconditioner(cycle="V")

    def pc(X):
        return np.stack([P @ c for c in X.reshape(n, -1).T], 1)

    A = LinearOperator((n, n), matvec=mv, matmat=mv, dtype=float)
    M = LinearOperator((n, n), matvec=pc, matmat=pc, dtype=float)
    vals, vecs = _lobpcg(A, M, n, k, np.random.default_rng(seed), tol, maxiter)
    # Rayleigh-Ritz polish in the returned block
    vecs, _ = np.linalg.qr(vecs)
    AV = mv(vecs)
    w, Y = np.linalg.eigh(0.5 * (vecs.T @ AV + AV.T @ vecs))
    vecs = vecs @ Y
    vals = w
    res = np.linalg.norm(AV @ Y - vecs * vals, axis=0)
    fields = np.stack([v.reshape(shape) for v in vecs.T]) / np.sqrt(g.dv)
    scale = beta1 if beta1 is not None else max(abs(vals[0] + beta), 1.0)
    split = SpectralSplit(vals, fields, res, prob.params.lam, beta, degeneracy * scale)
    if np.any(np.abs(vals) < split.margin):
        raise DegenerateSplit(f"eigenvalue within {split.margin:.2e} of zero: beta too close to a Dirichlet eigenvalue")
    if vals[-1] < 0:
        split.notes.append("all computed eigenvalues negative: increase k to capture the full negative space")
    return split


# --- reduction map ---------------------------------------------------------------

@dataclass
class ReducedPoint:
    u_plus: np.ndarray
    coeffs: np.ndarray            # h(u_plus) in the E- basis
    h_field: np.ndarray
    value: float                  # Upsilon(u_plus)
    residual: float               # max |<J'(u_plus + h), phi_i>|
    hessian: np.ndarray
    iterations: int

    @property
    def concave(self):
        return bool(np.all(np.linalg.eigvalsh(self.hessian) < 0))


def _J_and_derivs(w, basis, prob, need_hess=True):
    """J(w), (<J'(w), b_i>)_i and the Hessian block <J''(w) b_i, b_j>."""
    g = prob.grid
    q = prob.q
    a = np.abs(w)
    F = a**q
    KF = prob.op.convolve(F)
    Fp = q * a ** (q - 2) * w
    Lw = linear_part(w, prob)
    A = integrate(w * Lw, g)
    D = integrate(F * KF, g)
    J = 0.5 * A - D / (2 * q)
    grad = np.array([integrate((Lw - KF * Fp / q) * b, g) for b in basis])
    if not need_hess:
        return J, grad, None
    m = len(basis)
    H = np.empty((m, m))
    Fpp = q * (q - 1) * a ** (q - 2)
    Kb = [prob.op.convolve(Fp * b) for b in basis]
    Lb = [linear_part(b, prob) for b in basis]
    for i in range(m):
        for j in range(i, m):
            nl = integrate(Kb[i] * Fp * basis[j], g) + integrate(KF * Fpp * basis[i] * basis[j], g)
            H[i, j] = H[j, i] = integrate(Lb[i] * basis[j], g) - nl / q
    return J, grad, H


def project_plus(u, basis, grid):
    """Remove the E- components (basis L^2-orthonormal)."""
    out = np.array(u, float, copy=True)
    for b in basis:
        out -= integrate(out * b, grid) * b
    return out


def reduction_h(split: SpectralSplit, u_plus, prob: Problem, c0=None, tol=1e-11, maxiter=60):
    """Maximizer of v -> J(u_plus + v) over span(E-) by damped Newton."""
    if prob.params.mu >= 4:
        raise ReductionError("reduction needs mu < 4")
    basis = split.negative_basis
    m = len(basis)
    if m == 0:
        raise ReductionError("morse index 0: nothing to reduce (definite regime)")
    u_plus = np.asarray(u_plus, float)
    c = np.zeros(m) if c0 is None else np.array(c0, float)
    comb = lambda c: u_plus + np.tensordot(c, basis, 1)
    J, gr, H = _J_and_derivs(comb(c), basis, prob)
    it = 0
    for it in range(1, maxiter + 1):
        if np.max(np.abs(gr)) < tol:
            break
        ev = np.linalg.eigvalsh(H)
        Hn = H if ev.max() < 0 else H - (ev.max() + abs(ev.min()) + 1e-12) * np.eye(m)
        step = -np.linalg.solve(Hn, gr)
        s = 1.0
        while True:
            c_new = c + s * step
            J_new, gr_new, H_new = _J_and_derivs(comb(c_new), basis, prob)
            if J_new >= J - 1e-14 * max(1.0, abs(J)) or s < 1e-8:
                break
            s *= 0.5
        c, J, gr, H = c_new, J_new, gr_new, H_new
    res = float(np.max(np.abs(gr)))
    hp = ReducedPoint(u_plus, c, np.tensordot(c, basis, 1), float(J), res, H, it)
    if not hp.concave:
        raise ReductionError("Hessian of the reduced problem is not negative definite")
    return hp


def reduced_energy(split, u_plus, prob, c0=None):
    """Upsilon(u_plus) = J(u_plus + h(u_plus))."""
    return reduction_h(split, u_plus, prob, c0).value
