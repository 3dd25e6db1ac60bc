"""Distributed sketching: shard the data, sketch shards independently, merge.

Sketches are averages, so shards can be compressed on different machines and
combined afterwards; the merged sketch is identical (up to rounding) to the
one-pass sketch of the full dataset.
"""

import numpy as np

from sketchprec import GeneratorSpec, build_operator, generate, merge, sample_gaussian, sketch_stream

gt = generate(GeneratorSpec("erdos", d=16, num_blocks=4, p=0.2, seed=1))
data = sample_gaussian(gt, n=3000, seed=2)

op = build_operator("structured", d=16, m=64, seed=3)

single_pass = sketch_stream(op, data)

shards = np.array_split(data, 4)
partials = [sketch_stream(op, shard) for shard in shards]
combined = partials[0]
for part in partials[1:]:
    combined = merge(combined, part)

print(f"single pass: n={single_pass.n}")
print(f"merged      : n={combined.n}")
print(f"max absolute difference: {np.abs(single_pass.values - combined.values).max():.2e}")
