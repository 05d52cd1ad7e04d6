"""How much neighbourhood support separates a real motion from chance?

A correspondence that truly moves with some pattern drags its neighbours
along; a wrong one only collects support by accident. This script prints the
two binomial success rates for the default 20x15 grid, the support threshold
for a few neighbourhood sizes, and a Monte Carlo check of the rates.
"""
from gridmotion import StatModel, monte_carlo_check, separability

model = StatModel.for_grid(20, 15)
print(f"model: t={model.t} beta={model.beta} m/M={model.m_over_M:.5f}")

for n in (8, 20, 50, 100):
    rep = separability(model, n)
    print(f"n={n:4d}  expected support true={rep.mean_true:6.2f}  false={rep.mean_false:5.2f}  "
          f"threshold={rep.threshold:5.2f}  separable={rep.separable}")

coarse = StatModel(t=0.6, beta=1.0, m_over_M=0.04)
emp_true, emp_false = monte_carlo_check(coarse, n=1, trials=100_000, seed=0)
rep = separability(coarse, 1)
print(f"\nt=0.6, m/M=0.04: analytic p_true={rep.p_true:.4f} p_false={rep.p_false:.4f}")
print(f"                 simulated p_true={emp_true:.4f} p_false={emp_false:.4f}")
