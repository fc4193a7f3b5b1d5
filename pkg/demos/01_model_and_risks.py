"""Walk through the data model: label law, score, exact population risks.

Run:  python3 demos/01_model_and_risks.py
"""

import numpy as np

from bitlogit import (
    DistributionSpec,
    excess_logistic_risk,
    logistic_prob,
    population_logistic_risk,
    sample_label,
    sample_x,
    score,
)
from bitlogit.bounds import population_hessian
from bitlogit.rng import derive_rng

print("=" * 70)
print("The logistic label law p(y|x) = sigmoid(y <theta, x>)")
print("=" * 70)

theta = np.array([1.0, -0.5, 0.25])
x = np.array([1.0, 1.0, -1.0])
print(f"theta = {theta},  x = {x}")
for y in (+1, -1):
    print(f"  p(y={y:+d} | x) = {logistic_prob(theta, x, y):.6f}")
print(f"  the two probabilities sum to "
      f"{logistic_prob(theta, x, 1) + logistic_prob(theta, x, -1)}")

print()
print("The score y * x * sigmoid(-y <theta, x>) is the log-likelihood")
print("gradient; its projections never exceed those of x itself:")
s = score(theta, (x, +1))
print(f"  score(theta, (x, +1)) = {np.round(s, 6)}")
print(f"  |s_i| <= |x_i| componentwise: {bool(np.all(np.abs(s) <= np.abs(x)))}")

print()
print("=" * 70)
print("Sampling is driven by derived, replayable streams")
print("=" * 70)
dist = DistributionSpec.uniform_hypercube(3)
rng = derive_rng(123, "demo-draws")
draws = sample_x(dist, rng, 5)
labels = sample_label(theta, draws, derive_rng(123, "demo-labels"))
for row, y in zip(draws, labels):
    print(f"  x = {row},  y = {y:+d}")

print()
print("=" * 70)
print("Population risks are exact sums over the support")
print("=" * 70)
risk_zero = population_logistic_risk(theta, np.zeros(3), dist)
print(f"  risk of the zero estimate  = {risk_zero:.12f}  (= ln 2, always)")
print(f"  risk of the true parameter = "
      f"{population_logistic_risk(theta, theta, dist):.12f}")

print()
print("Excess risk vanishes at the truth and is quadratic nearby:")
h = population_hessian(theta, dist)
for eps in (0.3, 0.1, 0.03):
    direction = np.array([1.0, 0.0, 0.0])
    excess = excess_logistic_risk(theta, theta + eps * direction, dist)
    quad = 0.5 * eps**2 * float(direction @ h @ direction)
    print(f"  eps = {eps:<5}: excess = {excess:.3e}   (eps^2/2) u'Hu = {quad:.3e}")
