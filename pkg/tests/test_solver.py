import numpy as np
import pytest

from choquard.bubbles import critical_level
from choquard.functional import Problem, energy, nehari_project
from choquard.grid import TensorGrid
from choquard.params import Potential, ProblemParams
from choquard.solver import (DivergenceError, SolverConfig, SolverError, beta_sweep, bubble_init,
                             ground_state_definite, ground_state_indefinite,
                             ground_state_limit_problem, lambda_sweep, multistart_multiplicity)
from choquard.spectra import dirichlet_eigs, schrodinger_eigs

CSTAR = critical_level(4, 2.0)


@pytest.fixture(scope="module")
def g16():
    return TensorGrid(4, 16, 1.5)


@pytest.fixture(scope="module")
def ball():
    return Potential("ball_well")


@pytest.fixture(scope="module")
def beta1(g16, ball):
    return dirichlet_eigs(ball.zero_mask(g16), g16)[0]


@pytest.fixture(scope="module")
def definite(g16, ball, beta1):
    prob = Problem.build(ProblemParams(4, 2.0, lam=1e3, beta=0.5 * beta1), g16, ball)
    return prob, ground_state_definite(prob, cfg=SolverConfig(tol=1e-5), beta1=beta1, potential=ball)


def test_zero_init_collapses(g16, ball, beta1):
    prob = Problem.build(ProblemParams(4, 2.0, lam=1e3, beta=0.5 * beta1), g16, ball)
    res = ground_state_definite(prob, np.zeros(g16.shape), beta1=beta1, potential=ball)
    assert not res.converged and res.status.startswith("collapsed")


def test_definite_converges_below_threshold(definite):
    prob, res = definite
    assert res.converged
    assert res.grad_norm < 1e-5 and abs(res.nehari_residual) < 1e-10
    assert 0 < res.level < CSTAR


def test_definite_level_is_certified(definite):
    prob, res = definite
    t, v, e = nehari_project(res.u, prob)
    assert t == pytest.approx(1.0, abs=1e-10)
    assert e.J == pytest.approx(res.level, rel=1e-12)
    assert energy(res.u, prob).J == pytest.approx(res.level, rel=1e-12)


def test_definite_history_monotone(definite):
    h = definite[1].history
    assert all(b <= a * (1 + 1e-12) for a, b in zip(h, h[1:]))


def test_definite_preconditions(g16, ball, beta1):
    prob = Problem.build(ProblemParams(4, 2.0, lam=1e3, beta=1.2 * beta1), g16, ball)
    with pytest.raises(SolverError):
        ground_state_definite(prob, beta1=beta1, potential=ball)
    prob = Problem.build(ProblemParams(4, 2.0, lam=1.0, beta=0.5 * beta1), g16, ball)
    with pytest.raises(SolverError):
        ground_state_definite(prob, beta1=beta1, potential=ball)


def test_ps_bound_violation_aborts(g16, ball, beta1):
    prob = Problem.build(ProblemParams(4, 2.0, lam=1e3, beta=0.5 * beta1), g16, ball)
    with pytest.raises(DivergenceError):
        ground_state_definite(prob, cfg=SolverConfig(ps_factor=0.1), beta1=beta1, potential=ball)


def test_limit_problem_domain_monotone(g16, ball, beta1):
    cfg = SolverConfig(tol=1e-5)
    prob = Problem.build(ProblemParams(4, 2.0, beta=0.5 * beta1), g16)
    big = ground_state_limit_problem(prob, ball.zero_mask(g16), cfg=cfg, beta1=beta1)
    small = ground_state_limit_problem(prob, Potential("ball_well", radius=0.85).zero_mask(g16), cfg=cfg,
                                       beta1=beta1)
    assert big.converged and small.converged
    assert big.level <= small.level
    assert big.level < CSTAR
    assert big.outside_mass_fraction == 0


def test_beta_sweep_rejects_closed_end(g16, ball, beta1):
    prob = Problem.build(ProblemParams(4, 2.0), g16)
    with pytest.raises(SolverError):
        beta_sweep(prob, ball.zero_mask(g16), [0.3 * beta1, 0.0], beta1)


def test_lambda_sweep_rejects_unsorted(g16, ball):
    prob = Problem.build(ProblemParams(4, 2.0), g16, ball)
    with pytest.raises(SolverError):
        lambda_sweep(prob, ball, [1e3, 1e2])


def test_indefinite_rejects_definite_regime(g16, ball, beta1):
    prob = Problem.build(ProblemParams(4, 2.0, lam=1e4, beta=0.5 * beta1), g16, ball)
    sp = schrodinger_eigs(prob, k=1, beta1=beta1)
    with pytest.raises(SolverError):
        ground_state_indefinite(prob, sp, potential=ball)


def test_symmetric_seed_has_centred_barycenter(definite, g16):
    _, res = definite
    assert np.max(np.abs(res.truncated_barycenter)) < 1e-2 * g16.h


@pytest.mark.slow
def test_multistart_annulus():
    g = TensorGrid(4, 16, 2.0)
    pot = Potential("annulus_well", radius=1.6, inner_radius=0.6, allow_origin_outside=True)
    b1 = dirichlet_eigs(pot.zero_mask(g), g)[0]
    prob = Problem.build(ProblemParams(4, 2.0, lam=1e3, beta=0.3 * b1), g, pot)
    r = 0.25
    ang = 2 * np.pi * np.arange(8) / 8
    seeds = [(1.1 * np.cos(a), 1.1 * np.sin(a), 0.0, 0.0) for a in ang]
    rep, sols = multistart_multiplicity(prob, pot, seeds, r, cfg=SolverConfig(tol=1e-4, max_iter=150))
    assert rep["count"] >= 1
    conv = [i for i, s in enumerate(sols) if s.converged]
    assert conv
    assert all(rep["alpha_c_in_omega_2r_plus"][i] for i in conv)


def test_bubble_init_masked(g16, ball):
    m = ball.zero_mask(g16)
    u = bubble_init(g16, 0.25, 0.5, mask=m)
    assert np.all(u[~m] == 0) and u.max() > 0


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="on a uniform grid the critical problem is scale invariant; the "
                   "descent concentrates to a few cells and settles at the lattice level ~0.92 c_*, "
                   "a 7-8% gap that refinement does not close")
def test_translation_invariant_level_near_c_star():
    g = TensorGrid(4, 32, 2.0)
    prob = Problem.build(ProblemParams(4, 2.0), g)
    res = ground_state_definite(prob, bubble_init(g, 0.3, 1.0), SolverConfig(tol=1e-5))
    assert res.converged
    print(f"lambda = beta = 0: level / c_* = {res.level / CSTAR:.4f}")
    assert abs(res.level / CSTAR - 1) < 0.05
