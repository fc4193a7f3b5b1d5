"""k-bit channels and the exact Fisher information their messages retain.

Run:  python3 demos/02_quantizers_and_fisher.py
"""

import numpy as np

from bitlogit import (
    DistributionSpec,
    decode_group,
    encode_group,
    group_encoder_quantizer,
    label_only_quantizer,
    lemma_bounds,
    make_group_partition,
    trace_fisher_message,
    trace_fisher_raw,
    uniform_quantizer,
)
from bitlogit.fisher import estimate_subgaussian_param, second_moment_bound
from bitlogit.rng import derive_rng

print("=" * 70)
print("Group-partition encoding: k-1 coordinates plus the label, per sample")
print("=" * 70)

assignment = make_group_partition(d=4, k=3, n=8)
print(f"d=4, k=3  ->  groups {assignment.groups} (coordinates, 0-based)")
x = np.array([1.0, -1.0, 1.0, 1.0])
for i in (0, 1):
    msg = encode_group((x, +1), assignment, i)
    values, label = decode_group(msg, assignment, assignment.group_of_sample(i))
    print(f"  sample {i} -> group {assignment.group_of_sample(i)}: "
          f"message {msg.m:#05b}, decodes to coords {values}, y={label:+d}")

print()
print("=" * 70)
print("How much Fisher information do k-bit messages keep?")
print("=" * 70)

d = 4
dist = DistributionSpec.uniform_hypercube(d)
theta = np.array([0.8, -0.4, 0.2, -0.1])
raw = trace_fisher_raw(theta, dist)
print(f"theta = {theta}")
print(f"raw trace Tr(I_XY) = {raw:.6f}   (at theta = 0 it is d/4 = {d / 4})")
print()

channels = [
    ("uniform (data-independent)", uniform_quantizer(dist, k=2)),
    ("label only                ", label_only_quantizer()),
    ("group partition, group 0  ", group_encoder_quantizer(assignment, 0)),
    ("group partition, group 1  ", group_encoder_quantizer(assignment, 1)),
]
for name, q in channels:
    rep = trace_fisher_message(theta, dist, q, tail_params=(1.0, 1.0, 1.0))
    print(f"  {name}  k={q.k}:  Tr(I_M) = {rep.trace_msg:.6f}"
          f"   (data processing: <= {raw:.4f})")

print()
print("Budget bounds cap the message trace by tail class:")
sigma2 = estimate_subgaussian_param(dist, rng=derive_rng(0, "demo-subg"))
i0 = second_moment_bound(dist)
print(f"  feature tail parameters: sigma^2 = {sigma2:.4f}, I0 = {i0:.4f}")
for k in (1, 2, 3, 5):
    b = lemma_bounds(k, sigma2, np.sqrt(sigma2), i0)
    print(f"  k={k}:  4 s2 k = {b.lemma1:7.3f}   4 se^2 k^2 = {b.lemma2:8.3f}"
          f"   2^k I0 = {b.lemma3:7.3f}")
