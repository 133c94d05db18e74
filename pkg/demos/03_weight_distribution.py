"""Analytic weight-law checks against direct simulation.

Boundary-seeking learning (each unit reinforcing its own output) biases
weights toward the clamp boundaries at small n.  The closed forms below
predict the single-input agreement probability, the stationary weight
distribution it implies, and the self-consistent second moment; a plain
numpy re-simulation confirms each of them.
"""

import numpy as np

from paritykex import (
    expected_q,
    initial_norm,
    sigma_agreement_prob,
    stationary_distribution,
)

l, n = 1, 16
steps = 60_000
rng = np.random.default_rng(42)

w = rng.integers(-l, l + 1, size=n).astype(np.int64)
histogram = np.zeros(2 * l + 1)
agree = np.zeros((2 * l + 1, 2))
q_running = []
for t in range(steps):
    x = rng.integers(0, 2, size=n) * 2 - 1
    sign = int(np.sign(w @ x)) or -1
    for j in range(n):
        agree[w[j] + l, 0] += sign * x[j] == 1
        agree[w[j] + l, 1] += 1
    w = np.clip(w + sign * x, -l, l)
    if t > 2000:
        histogram += np.bincount(w + l, minlength=2 * l + 1)
        q_running.append(float(w @ w) / n)

q = expected_q(l, n)
print(f"architecture: single unit, n={n}, weights in [-{l}, +{l}]")
print(f"\nself-consistent second moment : {q:.4f}")
print(f"simulated long-run mean       : {np.mean(q_running):.4f}")
print(f"fresh uniform value l(l+1)/3  : {l * (l + 1) / 3:.4f}  "
      f"(rms row length {initial_norm(l):.4f})")

print(f"\n{'w':>3} {'P(w) analytic':>14} {'P(w) simulated':>15}")
model = stationary_distribution(l, n, q)
empirical = histogram / histogram.sum()
for value in range(-l, l + 1):
    print(f"{value:>3} {model[value + l]:>14.4f} {empirical[value + l]:>15.4f}")
print("boundary weights are over-represented relative to uniform "
      f"(uniform would be {1 / (2 * l + 1):.4f})")

print(f"\n{'w':>3} {'P(sign*x=+1) analytic':>22} {'simulated':>10}")
for value in range(-l, l + 1):
    freq = agree[value + l, 0] / agree[value + l, 1]
    print(f"{value:>3} {sigma_agreement_prob(value, n, q):>22.4f} {freq:>10.4f}")

print("\nat very large n the drift vanishes and the law flattens:")
flat = stationary_distribution(3, 10**8, 4.0)
print("  P(w) for l=3, n=1e8:", np.round(flat, 5), "(uniform = 0.14286)")
