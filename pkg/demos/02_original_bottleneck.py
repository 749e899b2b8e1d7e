"""The two-variable bottleneck as a special case, swept over gamma.

At small gamma every row of P(t|a) collapses onto the marginal; at large
gamma the solution hardens into the best deterministic partition of A.

Run: python3 demos/02_original_bottleneck.py
"""
import numpy as np

from mvib.core_prob import JointTable, Variable, mi_array
from mvib.problem import joint_array, preset_original_ib
from mvib.solver import SolverConfig, solve

rng = np.random.default_rng(3)
pab = JointTable([Variable("A", 6), Variable("B", 4)], rng.dirichlet(np.full(24, 0.5)).reshape(6, 4))
i_ab = mi_array(pab.array, (0,), (1,))
print(f"I(A;B) = {i_ab:.4f} nats")

# variant b keeps the gamma form well posed (see README)
problem = preset_original_ib(pab, 3, out_variant="b")
print(f"{'gamma':>8} {'I(T;A)':>8} {'I(T;B)':>8} {'kept':>6}")
for gamma in (0.1, 1.0, 3.0, 10.0, 100.0, 1000.0):
    res = solve(problem, SolverConfig(mode="l2", tradeoff=gamma, seed=1), restarts=5)
    p = joint_array(problem, res.state.tables)
    ita, itb = mi_array(p, (2,), (0,)), mi_array(p, (2,), (1,))
    print(f"{gamma:8g} {ita:8.4f} {itb:8.4f} {itb / i_ab:6.1%}")

rows = res.state.conditionals[0].rows
print("hard assignment at gamma = 1000:", np.argmax(rows, axis=1).tolist())
