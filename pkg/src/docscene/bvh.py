"""Bounding volume hierarchy over triangle soups.

Median-split construction; nodes flatten to arrays the tracing kernels walk
with an explicit stack. Results are, by construction and by test, identical
to brute-force all-triangle intersection (ties broken toward the lowest
triangle index in both).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF_SIZE = 4
MAX_DEPTH = 48


@dataclass(eq=False)
class BVH:
    """Flattened tree. Internal node: count == 0 and left_first = left child
    index (right child = left + 1). Leaf: count > 0 and left_first = offset
    into tri_order."""

    nodes_min: np.ndarray  # (n, 3) float64
    nodes_max: np.ndarray  # (n, 3) float64
    left_first: np.ndarray  # (n,) int32
    count: np.ndarray  # (n,) int32
    tri_order: np.ndarray  # (m,) int32


def build(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> BVH:
    m = len(v0)
    if m == 0:
        raise ValueError("cannot build a BVH over zero triangles")
    tri_min = np.minimum(np.minimum(v0, v1), v2)
    tri_max = np.maximum(np.maximum(v0, v1), v2)
    centroids = (tri_min + tri_max) * 0.5

    max_nodes = 2 * m
    nodes_min = np.empty((max_nodes, 3))
    nodes_max = np.empty((max_nodes, 3))
    left_first = np.zeros(max_nodes, dtype=np.int32)
    count = np.zeros(max_nodes, dtype=np.int32)
    order = np.arange(m, dtype=np.int32)

    n_nodes = 1
    # (node index, start, end, depth)
    stack = [(0, 0, m, 0)]
    while stack:
        node, start, end, depth = stack.pop()
        idx = order[start:end]
        nodes_min[node] = tri_min[idx].min(axis=0)
        nodes_max[node] = tri_max[idx].max(axis=0)
        n = end - start
        if n <= LEAF_SIZE or depth >= MAX_DEPTH:
            left_first[node] = start
            count[node] = n
            continue
        extent = centroids[idx].max(axis=0) - centroids[idx].min(axis=0)
        axis = int(np.argmax(extent))
        key = centroids[idx, axis]
        perm = np.argsort(key, kind="stable")
        order[start:end] = idx[perm]
        mid = start + n // 2
        left = n_nodes
        n_nodes += 2
        left_first[node] = left
        count[node] = 0
        stack.append((left + 1, mid, end, depth + 1))
        stack.append((left, start, mid, depth + 1))

    return BVH(
        nodes_min=np.ascontiguousarray(nodes_min[:n_nodes]),
        nodes_max=np.ascontiguousarray(nodes_max[:n_nodes]),
        left_first=left_first[:n_nodes].copy(),
        count=count[:n_nodes].copy(),
        tri_order=order,
    )
