"""Filter time against the number of correspondences.

Grid assignment and clustering touch each correspondence a constant number
of times, so time should grow roughly linearly once the fixed per-cell
overhead is amortised.
"""
from gridmotion import bench

rows = bench((1000, 2000, 4000, 8000, 16000), seed=0, repeats=3)
base = rows[0]["seconds"]
for r in rows:
    print(f"{r['size']:6d} matches  {r['seconds'] * 1000:7.1f} ms  x{r['seconds'] / base:4.2f}")
