"""Passive eavesdropper versus the synchronizing partners.

The listener sees everything on the wire (inputs and both announced
outputs) but cannot influence the partners.  It applies the same learning
rule, gating its units on the announced output.  Mutual learning converges
much faster than listening, and raising the weight bound collapses the
listener's success probability while only polynomially slowing the
partners.  Brute force is hopeless at realistic sizes.
"""

import time

from paritykex import keyspace_size, run_attack_trials

print("listen-and-learn attack, k=3, n=32, 300 trials per depth, cap 4000:")
print(f"{'depth':>6} {'partners':>10} {'listener':>10} {'success':>9}")
for depth in (1, 2, 3, 5):
    t0 = time.time()
    result = run_attack_trials(
        3, 32, depth, "random_walk", 300, 4000, b"demo-eavesdrop0" + bytes([depth])
    )
    print(
        f"{depth:>6} {result.mean_iter:>10.1f} {result.mean_attacker_iter:>10.1f} "
        f"{result.attacker_success_rate:>9.3f}   ({time.time() - t0:.0f}s)"
    )
print("(listener means are censored at the cap; success = listener matched")
print(" the sender's weights no later than the partners matched each other)")

print("\nbrute-force key space (2l+1)^(k*n):")
for k, n, l in ((3, 32, 3), (3, 100, 3), (3, 32, 127)):
    size = keyspace_size(k, n, l)
    print(f"  k={k:>3} n={n:>3} l={l:>3}: {len(str(size))} decimal digits")
