"""Indefinite regime beta = 1.5 beta_1, lambda = 1e4 on the ball (n = 16, L = 1.5)."""
import time

from choquard.bubbles import critical_level
from choquard.functional import Problem
from choquard.grid import TensorGrid
from choquard.params import Potential, ProblemParams
from choquard.solver import SolverConfig, ground_state_indefinite
from choquard.spectra import dirichlet_eigs, schrodinger_eigs

pot = Potential("ball_well")
g = TensorGrid(4, 16, 1.5)
t0 = time.time()
bj = dirichlet_eigs(pot.zero_mask(g), g, k=5)
prob = Problem.build(ProblemParams(4, 2.0, lam=1e4, beta=1.5 * bj[0], indefinite_mode=True), g, pot)
sp = schrodinger_eigs(prob, k=5, beta1=bj[0])
print("Dirichlet", bj, "\nzeta", sp.eigenvalues, "morse", sp.morse_index)
res = ground_state_indefinite(prob, sp, cfg=SolverConfig(tol=1e-6, verbose=True), potential=pot)
print({k: v for k, v in res.summary().items() if k != "energy"})
print(f"c_* = {critical_level(4, 2.0):.6f}; {time.time() - t0:.0f}s")
