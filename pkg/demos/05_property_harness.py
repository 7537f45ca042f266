"""Empirical verification of the library's provable inequalities.

Every check draws seeded random instances, so a report is reproducible
bit for bit.

Run: python demos/05_property_harness.py
"""

from qvalued import CheckConfig, run_all

cfg = CheckConfig(seed=7, trials=100)
print(f"running {cfg.trials} trials per check, seed {cfg.seed}\n")

for report in run_all(cfg):
    status = "pass" if report.failures == 0 else "FAIL"
    print(f"{report.name:>20}: {status:>4}  trials={report.trials:<5} "
          f"failures={report.failures}  extremal ratio={report.worst_ratio:.6g}")

print("""
Ratios reported:
  metric_equivalence  largest G1 / (Q * Ginf), at most 1
  splitting_lemma     largest relative gap between forced and optimal pairing
  xi                  smallest |xi(v)-xi(w)| / G2(v,w): the empirical lower
                      Lipschitz constant of the embedding
  sqrt_q_bound        largest embedded quotient / (sqrt(Q) * local slope)
  poincare            largest empirical Poincare constant over subwindows
  zeta_bounds         smallest dictionary lower bound / G1 upper bound
""")
