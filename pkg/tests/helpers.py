"""Shared test utilities: reference trees and edge-length bookkeeping."""
from __future__ import annotations

import numpy as np

from simexplore.phylo import Phylogeny
from simexplore.rng import RngStream


def split_lengths(tree: Phylogeny) -> dict[int, float]:
    """Edge lengths keyed by the leaf bitmask on the side without leaf 0.

    Pendant edges are included; a rooted tree's two root edges merge into one,
    which is how the unrooted tree sees them.
    """
    n = tree.n_leaves
    full = (1 << n) - 1
    mask = [0] * tree.n_nodes
    for v in range(n):
        mask[v] = 1 << v
    out: dict[int, float] = {}
    for v in reversed(tree.preorder):
        p = tree.parent[v]
        if p < 0:
            continue
        mask[p] |= mask[v]
        s = mask[v]
        if s & 1:
            s = full ^ s
        out[s] = out.get(s, 0.0) + float(tree.length[v])
    return out


def random_rooted_tree(n: int, rng: RngStream, min_length: float = 0.05) -> Phylogeny:
    """Random binary rooted topology with i.i.d. positive edge lengths."""
    g = rng.generator
    parent = np.full(2 * n - 1, -1, dtype=np.int64)
    active = list(range(n))
    nxt = n
    while len(active) > 1:
        i, j = sorted(g.choice(len(active), size=2, replace=False))
        a, b = active[i], active[j]
        parent[a] = parent[b] = nxt
        active[i] = nxt
        del active[j]
        nxt += 1
    length = min_length + g.exponential(1.0, size=2 * n - 1)
    length[parent < 0] = 0.0
    return Phylogeny(parent, length, n, rooted=True)


def random_ultrametric_tree(n: int, rng: RngStream) -> Phylogeny:
    """Random clock-like tree: node heights increase strictly towards the root."""
    g = rng.generator
    parent = np.full(2 * n - 1, -1, dtype=np.int64)
    height = np.zeros(2 * n - 1)
    active = list(range(n))
    nxt = n
    h = 0.0
    while len(active) > 1:
        h += 0.05 + g.exponential(0.5)
        i, j = sorted(g.choice(len(active), size=2, replace=False))
        a, b = active[i], active[j]
        parent[a] = parent[b] = nxt
        height[nxt] = h
        active[i] = nxt
        del active[j]
        nxt += 1
    length = np.where(parent >= 0, height[np.maximum(parent, 0)] - height, 0.0)
    return Phylogeny(parent, length, n, rooted=True)


# one line per acceptance criterion, printed in the pytest terminal summary
ACCEPTANCE_LINES: list[str] = []


def report(criterion: str, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
