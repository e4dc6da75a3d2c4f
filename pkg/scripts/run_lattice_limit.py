"""lambda = beta = 0 from a cutoff bubble: the discrete level versus c_*.

On a uniform grid the critical problem is scale invariant, so once the
iterate concentrates to a few cells the level settles at a lattice value
below c_* regardless of h.
"""
from choquard.bubbles import critical_level
from choquard.functional import Problem
from choquard.grid import TensorGrid
from choquard.params import ProblemParams
from choquard.solver import SolverConfig, bubble_init, ground_state_definite

cstar = critical_level(4, 2.0)
for n, L in [(16, 2.0), (32, 2.0)]:
    g = TensorGrid(4, n, L)
    for self_term in ("galerkin", "ball"):
        prob = Problem.build(ProblemParams(4, 2.0), g, self_term=self_term)
        res = ground_state_definite(prob, bubble_init(g, 0.3, 1.0), SolverConfig(tol=1e-5))
        print(n, L, self_term, f"level/c_* = {res.level / cstar:.4f}", res.converged,
              f"max|u| = {abs(res.u).max():.2f}")
