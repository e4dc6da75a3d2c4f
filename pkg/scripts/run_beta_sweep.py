"""c(beta, Omega) and t_beta along beta / beta_1 = 0.3, 0.1, 0.03 on the ball (n = 32, L = 2)."""
import time

from choquard.bubbles import critical_level
from choquard.functional import Problem
from choquard.grid import TensorGrid
from choquard.params import Potential, ProblemParams
from choquard.solver import SolverConfig, beta_sweep
from choquard.spectra import dirichlet_eigs

g = TensorGrid(4, 32, 2.0)
mask = Potential("ball_well").zero_mask(g)
t0 = time.time()
b1 = dirichlet_eigs(mask, g)[0]
prob = Problem.build(ProblemParams(4, 2.0), g)
rows, verdict, sols = beta_sweep(prob, mask, [f * b1 for f in (0.3, 0.1, 0.03)], b1,
                                 cfg=SolverConfig(tol=1e-5, max_iter=600, verbose=True))
for r, s in zip(rows, sols):
    print(r, "max|u| =", float(abs(s.u).max()))
print(verdict, f"c_* = {critical_level(4, 2.0):.6f}", f"{time.time() - t0:.0f}s")
