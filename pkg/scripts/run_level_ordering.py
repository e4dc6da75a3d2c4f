"""Level ordering c_lambda <= c(beta, Omega) < c_* and concentration along lambda (n = 32).

Usage: python scripts/run_level_ordering.py [n] [L]
"""
import sys
import time

from choquard.bubbles import critical_level
from choquard.functional import Problem
from choquard.grid import TensorGrid
from choquard.params import Potential, ProblemParams
from choquard.solver import SolverConfig, ground_state_limit_problem, lambda_sweep
from choquard.spectra import dirichlet_eigs

n = int(sys.argv[1]) if len(sys.argv) > 1 else 32
L = float(sys.argv[2]) if len(sys.argv) > 2 else 2.0
pot = Potential("ball_well")
g = TensorGrid(4, n, L)
mask = pot.zero_mask(g)
t0 = time.time()
b1 = dirichlet_eigs(mask, g)[0]
print(f"beta_1^h = {b1:.8f}  ({time.time() - t0:.1f}s)")
prob = Problem.build(ProblemParams(4, 2.0, beta=0.5 * b1), g, pot)
cfg = SolverConfig(tol=1e-5, max_iter=600, verbose=True)
limit = ground_state_limit_problem(prob, mask, cfg=cfg, beta1=b1)
print(f"c(beta, Omega) = {limit.level:.8f}  err {limit.level_error:.1e}")
rows, verdict, _ = lambda_sweep(prob, pot, [1e2, 1e3, 1e4], limit, cfg=cfg, warm_start=False)
for r in rows:
    print(r)
print(verdict)
print(f"c_* = {critical_level(4, 2.0):.8f}; total {time.time() - t0:.0f}s")
