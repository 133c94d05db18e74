"""Synchronization-time scaling in depth and width, written as CSV.

Mean rounds to synchronize grow roughly quadratically with the weight
bound l (the security dial) but only mildly with the per-unit input count
n (the key-material dial).  Protocol mode drives two real endpoints over
a simulated lossless link and also accounts the bytes on the wire.
"""

from paritykex import run_sync_trials, write_sweep_csv

trials = 60
print(f"depth sweep, k=3, n=32, {trials} trials per point:")
depth_results = []
for l in range(1, 6):
    r = run_sync_trials(3, 32, l, "random_walk", trials, "direct", 10**6,
                        b"demo-sweep-seed!")
    depth_results.append(r)
    print(f"  l={l}: mean {r.mean_iter:8.1f}  median {r.median_iter:8.1f}  "
          f"stddev {r.stddev_iter:8.1f}")
ratios = [depth_results[i + 1].mean_iter / depth_results[i].mean_iter for i in range(4)]
print("  successive mean ratios:", [round(r, 2) for r in ratios])

print(f"\nwidth sweep, k=3, l=3, {trials} trials per point:")
width_results = []
for n in (16, 32, 64, 128):
    r = run_sync_trials(3, n, 3, "random_walk", trials, "direct", 10**6,
                        b"demo-sweep-seed!")
    width_results.append(r)
    print(f"  n={n:>3}: mean {r.mean_iter:8.1f}")

print("\nprotocol mode (two endpoints over a simulated link) also counts bytes:")
r = run_sync_trials(3, 32, 2, "random_walk", 10, "protocol", 20_000, b"demo-sweep-seed!")
print(f"  l=2: mean {r.mean_iter:.1f} rounds, mean {r.mean_bytes:.0f} bytes on the wire")

write_sweep_csv(depth_results + width_results, "sweep_demo.csv")
print("\nwrote sweep_demo.csv with the fixed column set:")
with open("sweep_demo.csv") as fh:
    print(" ", fh.readline().strip())
    print(" ", fh.readline().strip())
