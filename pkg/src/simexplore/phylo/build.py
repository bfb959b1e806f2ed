"""Distance-based tree building: neighbor joining and UPGMA.

Both use a deterministic tie rule: among equal candidates the pair with the
lowest (i, j) position in the current working matrix is chosen.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractViolation
from .tree import Phylogeny


def _check_matrix(D) -> np.ndarray:
    D = np.array(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ContractViolation("distance matrix must be square")
    if not np.allclose(D, D.T, rtol=0, atol=1e-12):
        raise ContractViolation("distance matrix must be symmetric")
    if not np.all(np.isfinite(D)):
        raise ContractViolation("distance matrix has non-finite entries")
    return D


def _argmin_upper(M: np.ndarray) -> tuple[int, int]:
    m = len(M)
    masked = M.copy()
    masked[np.tril_indices(m)] = np.inf
    flat = int(np.argmin(masked))
    return divmod(flat, m)


def neighbor_joining(D) -> Phylogeny:
    """Saitou-Nei neighbor joining; returns an unrooted tree (degree-3 root)."""
    D = _check_matrix(D)
    n = len(D)
    if n < 3:
        raise ContractViolation("neighbor joining needs at least 3 taxa")
    size = 2 * n - 2
    parent = np.full(size, -1, dtype=np.int64)
    length = np.zeros(size)
    nodes = list(range(n))
    next_id = n
    while len(nodes) > 3:
        m = len(nodes)
        r = D.sum(axis=1)
        Q = (m - 2) * D - r[:, None] - r[None, :]
        i, j = _argmin_upper(Q)
        dij = D[i, j]
        li = 0.5 * dij + (r[i] - r[j]) / (2.0 * (m - 2))
        u = next_id
        next_id += 1
        parent[nodes[i]], length[nodes[i]] = u, li
        parent[nodes[j]], length[nodes[j]] = u, dij - li
        du = 0.5 * (D[i] + D[j] - dij)
        du[i] = 0.0
        D[i, :] = du
        D[:, i] = du
        D = np.delete(np.delete(D, j, axis=0), j, axis=1)
        nodes[i] = u
        del nodes[j]
    a, b, c = nodes
    center = next_id
    length[a] = 0.5 * (D[0, 1] + D[0, 2] - D[1, 2])
    length[b] = 0.5 * (D[0, 1] + D[1, 2] - D[0, 2])
    length[c] = 0.5 * (D[0, 2] + D[1, 2] - D[0, 1])
    parent[[a, b, c]] = center
    return Phylogeny(parent, length, n, rooted=False)


def upgma(D) -> Phylogeny:
    """Average-linkage clustering; node heights are half the merge distance."""
    D = _check_matrix(D)
    n = len(D)
    if n < 2:
        raise ContractViolation("UPGMA needs at least 2 taxa")
    size = 2 * n - 1
    parent = np.full(size, -1, dtype=np.int64)
    length = np.zeros(size)
    height = np.zeros(size)
    nodes = list(range(n))
    counts = [1] * n
    next_id = n
    while len(nodes) > 1:
        i, j = _argmin_upper(D)
        u = next_id
        next_id += 1
        height[u] = 0.5 * D[i, j]
        for k in (i, j):
            parent[nodes[k]] = u
            length[nodes[k]] = height[u] - height[nodes[k]]
        ci, cj = counts[i], counts[j]
        du = (ci * D[i] + cj * D[j]) / (ci + cj)
        du[i] = 0.0
        D[i, :] = du
        D[:, i] = du
        D = np.delete(np.delete(D, j, axis=0), j, axis=1)
        nodes[i], counts[i] = u, ci + cj
        del nodes[j], counts[j]
    return Phylogeny(parent, length, n, rooted=True)
