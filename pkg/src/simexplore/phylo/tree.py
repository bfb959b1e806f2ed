"""Trees as parent arrays, plus the Yule generator and the skew/scale transform.

Nodes ``0 .. n_leaves-1`` are the labelled leaves; internal nodes follow.
The root has parent ``-1`` and length 0. An unrooted tree is stored with an
arbitrary internal node of degree three as its root.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import ContractViolation, DomainError
from ..rng import RngStream


@dataclass(frozen=True, eq=False)
class Phylogeny:
    parent: np.ndarray
    length: np.ndarray
    n_leaves: int
    rooted: bool = True

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64)
        length = np.asarray(self.length, dtype=float)
        if parent.shape != length.shape:
            raise ContractViolation("parent and length arrays differ in size")
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "length", length)

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    @cached_property
    def root(self) -> int:
        roots = np.flatnonzero(self.parent < 0)
        if len(roots) != 1:
            raise ContractViolation(f"tree must have exactly one root, found {len(roots)}")
        return int(roots[0])

    @cached_property
    def children(self) -> list[list[int]]:
        kids: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                kids[p].append(v)
        return kids

    @cached_property
    def preorder(self) -> list[int]:
        order, stack = [], [self.root]
        kids = self.children
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(reversed(kids[v]))
        return order

    def validate(self) -> None:
        """Check binary structure, labels and non-negative lengths."""
        n = self.n_leaves
        kids = self.children
        if len(self.preorder) != self.n_nodes:
            raise ContractViolation("tree is not connected")
        for v in range(self.n_nodes):
            k = len(kids[v])
            if v < n:
                if k:
                    raise ContractViolation(f"leaf {v} has children")
            elif v == self.root:
                want = 2 if self.rooted else 3
                if k != want and not (n == 2 and k == 2):
                    raise ContractViolation(f"root has {k} children, expected {want}")
            elif k != 2:
                raise ContractViolation(f"internal node {v} has {k} children")
        if np.any(self.length < -1e-12):
            raise ContractViolation("negative edge length")

    def depths(self) -> np.ndarray:
        """Root-to-node path lengths."""
        d = np.zeros(self.n_nodes)
        for v in self.preorder[1:]:
            d[v] = d[self.parent[v]] + self.length[v]
        return d

    def height(self) -> float:
        return float(self.depths()[: self.n_leaves].max())

    def path_distances(self) -> np.ndarray:
        """Leaf-to-leaf path-length matrix."""
        n = self.n_leaves
        depth = self.depths()
        # ancestor sets per leaf, walking up the parent array
        anc = []
        for leaf in range(n):
            chain, v = [], leaf
            while v >= 0:
                chain.append(v)
                v = self.parent[v]
            anc.append(chain)
        D = np.zeros((n, n))
        for i in range(n):
            ai = set(anc[i])
            for j in range(i + 1, n):
                lca = next(v for v in anc[j] if v in ai)
                D[i, j] = D[j, i] = depth[i] + depth[j] - 2.0 * depth[lca]
        return D

    def with_lengths(self, length) -> Phylogeny:
        return Phylogeny(self.parent.copy(), np.asarray(length, dtype=float), self.n_leaves, self.rooted)

    def to_newick(self, precision: int = 6) -> str:
        kids = self.children

        def fmt(v):
            label = str(v) if v < self.n_leaves else "(" + ",".join(fmt(c) for c in kids[v]) + ")"
            if self.parent[v] >= 0:
                label += f":{self.length[v]:.{precision}g}"
            return label

        return fmt(self.root) + ";"


def simulate_yule_tree(n_taxa: int, rng: RngStream, birth_rate: float = 1.0) -> Phylogeny:
    """Pure-birth tree on `n_taxa` leaves.

    Every lineage splits at `birth_rate`. Once `n_taxa` lineages exist the
    process runs for one more waiting time so that the last cherry has
    positive pendant edges. Leaf labels are a random permutation of the
    creation order.
    """
    if n_taxa < 2:
        raise ContractViolation("a Yule tree needs at least 2 taxa")
    g = rng.generator
    # internal bookkeeping: node k born at born[k]; parent[k]
    parent = [-1]
    born = [0.0]
    ended = [math.nan]
    active = [0]
    t = 0.0
    while len(active) < n_taxa:
        t += g.exponential(1.0 / (birth_rate * len(active)))
        pos = int(g.integers(len(active)))
        node = active[pos]
        ended[node] = t
        new = []
        for _ in range(2):
            parent.append(node)
            born.append(t)
            ended.append(math.nan)
            new.append(len(parent) - 1)
        active[pos:pos + 1] = new
    t += g.exponential(1.0 / (birth_rate * len(active)))
    for node in active:
        ended[node] = t

    # relabel: leaves 0..n-1 (shuffled), internal nodes after in creation order
    tips = set(active)
    leaves = [k for k in range(len(parent)) if k in tips]
    internal = [k for k in range(len(parent)) if k not in tips]
    perm = g.permutation(n_taxa)
    new_id = {}
    for k, leaf in enumerate(leaves):
        new_id[leaf] = int(perm[k])
    for k, node in enumerate(internal):
        new_id[node] = n_taxa + k
    size = len(parent)
    par = np.full(size, -1, dtype=np.int64)
    length = np.zeros(size)
    for old in range(size):
        v = new_id[old]
        if parent[old] >= 0:
            par[v] = new_id[parent[old]]
            length[v] = ended[old] - born[old]
    return Phylogeny(par, length, n_taxa, rooted=True)


def apply_skew_scale(tree: Phylogeny, skew: float, scale: float, rng: RngStream) -> Phylogeny:
    """Multiply each edge by ``exp(u)``, ``u ~ U(-skew, skew)``, then rescale to height `scale`."""
    if skew < 0:
        raise ContractViolation("skew must be non-negative")
    if scale <= 0:
        raise ContractViolation("scale must be positive")
    u = rng.uniform(-skew, skew, size=tree.n_nodes)
    length = tree.length * np.exp(u)
    length[tree.root] = 0.0
    skewed = tree.with_lengths(length)
    h = skewed.height()
    if not h > 0:
        raise DomainError("cannot rescale a tree of zero height")
    return tree.with_lengths(length * (scale / h))
