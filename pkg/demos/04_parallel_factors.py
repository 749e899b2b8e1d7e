"""Two parallel bottlenecks on a joint with two independent factors.

A and B are pairs of bits, and factor i couples A_i with B_i. Each one-bit
bottleneck of A can only capture one factor, so each alone keeps about half
of I(A;B), while together they keep almost all of it.

Run: python3 demos/04_parallel_factors.py
"""
from mvib.anneal import AnnealConfig, anneal
from mvib.data import generate_factorized
from mvib.problem import preset_parallel
from mvib.solver import SolverConfig

pab = generate_factorized((0.9, 0.9))
problem = preset_parallel(pab, 1, 1, out_variant="a")
config = AnnealConfig(beta_start=0.5, beta_factor=1.1, beta_end=50, max_values=2, continue_at_cap=True,
                      solver=SolverConfig(mode="l1"))
result = anneal(problem, config)

print(f"{'beta':>7} {'|T1|':>4} {'|T2|':>4} {'T1':>6} {'T2':>6} {'T1,T2':>6}")
for point in result.curve[::4]:
    f = {k: v[1] for k, v in point.prediction.items()}
    print(f"{point.beta:7.2f} {point.cardinalities['T1']:4d} {point.cardinalities['T2']:4d} "
          f"{f['I(T1;B)']:6.2f} {f['I(T2;B)']:6.2f} {f['I(T1,T2;B)']:6.2f}")
