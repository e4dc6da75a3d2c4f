"""Sharp constants, S_HL cross-check and bubble asymptotics for the four reference (N, mu) pairs."""
import json
import sys

from choquard.bubbles import (bubble_asymptotics, constant_set, hls_extremal_ratio, limit_residual,
                              tilde_identities)

PAIRS = [(4, 2.0), (4, 1.0), (5, 1.0), (5, 3.0)]

out = []
for N, mu in PAIRS:
    cs = constant_set(N, mu)
    grad, D, target = tilde_identities(N, mu)
    row = {"N": N, "mu": mu, "C_hls": cs.C_hls, "hls_ratio": hls_extremal_ratio(N, mu),
           "S": cs.S, "S_HL": cs.S_HL, "S_HL_quotient": cs.S_HL_quotient, "c_star": cs.c_star,
           "grad_tilde": grad, "D_tilde": D, "target": target, "limit_residual": limit_residual(N, mu)}
    out.append(row)
    print(json.dumps(row))
for N, mu in [(4, 2.0), (5, 1.0)]:
    a = bubble_asymptotics(N, mu)
    print(json.dumps({"N": N, "mu": mu, "grad_exponent": a["grad_exponent"],
                      "mass_ratio_variation": a["mass_ratio_variation"]}))
if len(sys.argv) > 1:
    with open(sys.argv[1], "w") as f:
        json.dump(out, f, indent=1)
