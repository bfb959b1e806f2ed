"""Bipartitions and the Robinson-Foulds distance."""
from __future__ import annotations

from ..errors import ContractViolation
from .tree import Phylogeny


def bipartitions(tree: Phylogeny) -> frozenset[int]:
    """Non-trivial splits of the unrooted tree, as leaf bitmasks.

    Each split is normalised to the side that does not contain leaf 0, so a
    rooted tree's two root edges collapse to one split, which is exactly what
    unrooting does.
    """
    n = tree.n_leaves
    full = (1 << n) - 1
    mask = [0] * tree.n_nodes
    for v in range(n):
        mask[v] = 1 << v
    splits = set()
    for v in reversed(tree.preorder):
        p = tree.parent[v]
        if p < 0:
            continue
        mask[p] |= mask[v]
        s = mask[v]
        if s & 1:
            s = full ^ s
        k = bin(s).count("1")
        if 2 <= k <= n - 2:
            splits.add(s)
    return frozenset(splits)


def robinson_foulds(t1: Phylogeny, t2: Phylogeny) -> int:
    if t1.n_leaves != t2.n_leaves:
        raise ContractViolation(
            f"trees have different leaf sets ({t1.n_leaves} vs {t2.n_leaves} leaves)"
        )
    return len(bipartitions(t1) ^ bipartitions(t2))


def has_clade(tree: Phylogeny, leaves) -> bool:
    """True when some edge separates exactly `leaves` from the rest."""
    n = tree.n_leaves
    s = 0
    for v in leaves:
        s |= 1 << int(v)
    if s & 1:
        s = ((1 << n) - 1) ^ s
    k = bin(s).count("1")
    if k <= 1:
        return True
    return s in bipartitions(tree)
