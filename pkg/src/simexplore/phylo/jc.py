"""Jukes-Cantor sequence evolution and distance correction."""
from __future__ import annotations

import numpy as np

from ..errors import ContractViolation
from ..rng import RngStream
from .tree import Phylogeny

NUCLEOTIDES = "ACGT"
SATURATION_CAP = 0.74999


class Alignment:
    """`n` equal-length sequences coded 0..3 for A, C, G, T."""

    def __init__(self, codes):
        codes = np.asarray(codes, dtype=np.uint8)
        if codes.ndim != 2:
            raise ContractViolation("alignment must be a 2-d array of codes")
        if codes.size and codes.max() > 3:
            raise ContractViolation("alignment codes must be in 0..3")
        self.codes = codes

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def length(self) -> int:
        return self.codes.shape[1]

    def sequences(self) -> list[str]:
        table = np.frombuffer(NUCLEOTIDES.encode(), dtype=np.uint8)
        return [table[row].tobytes().decode() for row in self.codes]

    def to_fasta(self) -> str:
        return "".join(f">{i}\n{s}\n" for i, s in enumerate(self.sequences()))


def evolve_sequences(tree: Phylogeny, length: int, rng: RngStream) -> Alignment:
    """Simulate JC69 evolution of a uniform random root sequence down `tree`.

    Over an edge of length ``t`` each site is redrawn uniformly from the four
    bases with probability ``1 - exp(-4t/3)``, which makes the chance of
    ending on a different base ``3/4 (1 - exp(-4t/3))``.
    """
    g = rng.generator
    seqs = np.empty((tree.n_nodes, length), dtype=np.uint8)
    order = tree.preorder
    seqs[order[0]] = g.integers(0, 4, size=length, dtype=np.uint8)
    for v in order[1:]:
        s = seqs[tree.parent[v]].copy()
        t = tree.length[v]
        if t > 0:
            hit = np.flatnonzero(g.random(length) < -np.expm1(-4.0 * t / 3.0))
            s[hit] = g.integers(0, 4, size=hit.size, dtype=np.uint8)
        seqs[v] = s
    return Alignment(seqs[: tree.n_leaves])


def mismatch_proportions(alignment: Alignment) -> np.ndarray:
    c = alignment.codes
    if c.shape[1] == 0:
        raise ContractViolation("sequences are empty")
    return (c[:, None, :] != c[None, :, :]).mean(axis=2)


def jc_distance(p):
    """``-3/4 ln(1 - 4p/3)`` with `p` capped just below saturation."""
    p = np.minimum(np.asarray(p, dtype=float), SATURATION_CAP)
    return -0.75 * np.log1p(-4.0 * p / 3.0)


def jc_distance_matrix(alignment: Alignment, return_saturation: bool = False):
    """Pairwise JC69 distances. Proportions at or beyond 3/4 are capped at 0.74999."""
    p = mismatch_proportions(alignment)
    D = jc_distance(p)
    np.fill_diagonal(D, 0.0)
    if return_saturation:
        return D, bool(np.any(p >= 0.75))
    return D
