import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_rooted_tree, random_ultrametric_tree, split_lengths
from simexplore.errors import ContractViolation, DomainError
from simexplore.phylo import (
    PhyloSimulator,
    Phylogeny,
    apply_skew_scale,
    bipartitions,
    evolve_sequences,
    has_clade,
    jc_distance,
    jc_distance_matrix,
    neighbor_joining,
    phylo_pipeline,
    robinson_foulds,
    simulate_yule_tree,
    upgma,
)
from simexplore.phylo.jc import Alignment, mismatch_proportions
from simexplore.rng import RngStream


def brute_force_splits(tree: Phylogeny) -> set[frozenset]:
    """Non-trivial splits found by deleting each edge of the undirected graph."""
    g = nx.Graph()
    g.add_nodes_from(range(tree.n_nodes))
    for v, p in enumerate(tree.parent):
        if p >= 0:
            g.add_edge(v, int(p))
    # a degree-2 root yields the same split from both of its edges
    leaves = set(range(tree.n_leaves))
    out = set()
    for u, v in list(g.edges):
        h = g.copy()
        h.remove_edge(u, v)
        side = nx.node_connected_component(h, u) & leaves
        other = leaves - side
        if 2 <= len(side) <= len(leaves) - 2:
            out.add(frozenset(side if 0 not in side else other))
    return out


def brute_force_rf(t1, t2) -> int:
    return len(brute_force_splits(t1) ^ brute_force_splits(t2))


def quartet(a_len=1.0, b_len=2.0, mid=1.0, c_len=3.0, d_len=4.0) -> Phylogeny:
    # ((A:1,B:2):1,(C:3,D:4)) rooted at the (C,D) node: A=0 B=1 C=2 D=3
    parent = [4, 4, 5, 5, 5, -1]
    length = [a_len, b_len, c_len, d_len, mid, 0.0]
    return Phylogeny(np.array(parent), np.array(length), 4, rooted=False)


# --- simulated trees -----------------------------------------------------

def test_yule_two_taxa_is_cherry():
    t = simulate_yule_tree(2, RngStream(1))
    t.validate()
    assert t.n_nodes == 3 and sorted(t.children[t.root]) == [0, 1]


def test_yule_thirty_taxa_shape():
    t = simulate_yule_tree(30, RngStream(2))
    t.validate()
    assert t.n_leaves == 30 and t.n_nodes - 30 == 29
    assert np.all(t.length[np.arange(t.n_nodes) != t.root] > 0)
    depths = t.depths()[:30]
    assert np.allclose(depths, depths[0])  # Yule trees are clocklike


def test_yule_mean_cherry_count():
    # expected cherries under the Yule model is n / 3
    counts = []
    for i in range(400):
        t = simulate_yule_tree(30, RngStream(3).child("t", i))
        kids = t.children
        counts.append(sum(1 for v in range(30, t.n_nodes) if all(c < 30 for c in kids[v])))
    assert np.mean(counts) == pytest.approx(10.0, abs=0.3)


def test_skew_scale():
    t = simulate_yule_tree(30, RngStream(4))
    pure = apply_skew_scale(t, 0.0, 0.37, RngStream(5))
    assert pure.height() == pytest.approx(0.37, rel=1e-12)
    ratio = pure.length[t.length > 0] / t.length[t.length > 0]
    assert np.allclose(ratio, ratio[0])
    skewed = apply_skew_scale(t, math.log(10), 0.5, RngStream(6))
    assert skewed.height() == pytest.approx(0.5, rel=1e-12)
    factors = skewed.length[t.length > 0] / t.length[t.length > 0]
    assert factors.max() / factors.min() > 2.0
    with pytest.raises(DomainError):
        apply_skew_scale(t.with_lengths(np.zeros(t.n_nodes)), 0.1, 1.0, RngStream(7))
    with pytest.raises(ContractViolation):
        apply_skew_scale(t, -0.1, 1.0, RngStream(7))


# --- sequences and distances ---------------------------------------------

def test_jc_formula_points():
    assert float(jc_distance(0.3)) == pytest.approx(0.38312, abs=1e-5)
    assert float(jc_distance(0.0)) == 0.0
    assert np.isfinite(jc_distance(0.75)) and np.isfinite(jc_distance(0.9))
    assert float(jc_distance(0.75)) == float(jc_distance(0.74999))


def test_zero_edge_copies_parent():
    t = Phylogeny(np.array([2, 2, -1]), np.array([0.0, 0.0, 0.0]), 2)
    aln = evolve_sequences(t, 500, RngStream(8))
    assert np.array_equal(aln.codes[0], aln.codes[1])
    D, sat = jc_distance_matrix(aln, return_saturation=True)
    assert np.all(D == 0) and not sat


def test_saturation_limit():
    t = Phylogeny(np.array([2, 2, -1]), np.array([25.0, 25.0, 0.0]), 2)
    aln = evolve_sequences(t, 100_000, RngStream(9))
    p = mismatch_proportions(aln)[0, 1]
    assert p == pytest.approx(0.75, abs=0.01)


def test_expected_mismatch_matches_jc():
    t = Phylogeny(np.array([2, 2, -1]), np.array([0.1, 0.15, 0.0]), 2)
    aln = evolve_sequences(t, 200_000, RngStream(10))
    d = jc_distance_matrix(aln)[0, 1]
    assert d == pytest.approx(0.25, abs=0.01)


def test_saturation_flag():
    aln = Alignment(np.array([[0, 1, 2, 3], [1, 2, 3, 0]], dtype=np.uint8))
    D, sat = jc_distance_matrix(aln, return_saturation=True)
    assert sat and np.isfinite(D).all()


# --- tree building --------------------------------------------------------

def test_nj_quartet_roundtrip():
    truth = quartet()
    D = truth.path_distances()
    assert D[0, 1] == 3 and D[2, 3] == 7 and D[0, 2] == 5
    nj = neighbor_joining(D)
    nj.validate()
    assert robinson_foulds(nj, truth) == 0
    got, want = split_lengths(nj), split_lengths(truth)
    assert got.keys() == want.keys()
    assert all(abs(got[k] - want[k]) < 1e-9 for k in want)


def test_nj_three_taxa_star():
    D = np.array([[0, 3, 4], [3, 0, 5], [4, 5, 0]], dtype=float)
    nj = neighbor_joining(D)
    assert nj.length[:3] == pytest.approx([(3 + 4 - 5) / 2, (3 + 5 - 4) / 2, (4 + 5 - 3) / 2])
    with pytest.raises(ContractViolation):
        neighbor_joining(D[:2, :2])


def test_nj_tie_takes_lowest_pair():
    # all Q values tie on a star matrix: leaves 0 and 1 are joined first
    D = np.ones((4, 4)) - np.eye(4)
    nj = neighbor_joining(D)
    assert nj.parent[0] == nj.parent[1] == 4


def test_upgma_two_taxa_and_ties():
    t = upgma(np.array([[0, 0.4], [0.4, 0]]))
    assert t.n_nodes == 3 and t.length[0] == pytest.approx(0.2) and t.length[1] == pytest.approx(0.2)
    t = upgma(np.ones((4, 4)) - np.eye(4))
    assert t.parent[0] == t.parent[1] == 4


@pytest.mark.parametrize("seed", range(20))
def test_nj_exact_on_additive(seed):
    truth = random_rooted_tree(8, RngStream(100).child("nj", seed))
    nj = neighbor_joining(truth.path_distances())
    assert robinson_foulds(nj, truth) == 0
    got, want = split_lengths(nj), split_lengths(truth)
    assert all(abs(got[k] - want[k]) < 1e-9 for k in want)


@pytest.mark.parametrize("seed", range(20))
def test_upgma_exact_on_ultrametric(seed):
    truth = random_ultrametric_tree(8, RngStream(200).child("up", seed))
    up = upgma(truth.path_distances())
    assert robinson_foulds(up, truth) == 0
    assert np.allclose(up.depths()[:8], up.depths()[0])
    assert up.height() == pytest.approx(truth.height(), abs=1e-9)
    got, want = split_lengths(up), split_lengths(truth)
    assert all(abs(got[k] - want[k]) < 1e-9 for k in want)


# --- comparison ------------------------------------------------------------

def test_rf_quartets():
    a = quartet()
    # ((A,C),(B,D)) : swap leaves 1 and 2
    b = Phylogeny(np.array([4, 5, 4, 5, 5, -1]), a.length.copy(), 4, rooted=False)
    assert robinson_foulds(a, a) == 0
    assert robinson_foulds(a, b) == 2
    with pytest.raises(ContractViolation):
        robinson_foulds(a, random_rooted_tree(5, RngStream(1)))


def test_rf_matches_brute_force_on_six_leaf_trees():
    trees = [random_rooted_tree(6, RngStream(300).child("rf", i)) for i in range(50)]
    for t1, t2 in itertools.combinations(trees, 2):
        assert robinson_foulds(t1, t2) == brute_force_rf(t1, t2)


def test_rooted_and_unrooted_views_agree():
    truth = random_rooted_tree(8, RngStream(5))
    assert len(bipartitions(truth)) == 8 - 3
    assert robinson_foulds(truth, neighbor_joining(truth.path_distances())) == 0


def test_has_clade():
    a = quartet()
    assert has_clade(a, [0, 1]) and has_clade(a, [2, 3]) and not has_clade(a, [0, 2])
    assert has_clade(a, [3])


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 9), st.integers(0, 10_000), st.integers(0, 10_000))
def test_rf_is_symmetric_and_bounded(n, s1, s2):
    t1 = random_rooted_tree(n, RngStream(s1))
    t2 = random_rooted_tree(n, RngStream(s2))
    d = robinson_foulds(t1, t2)
    assert d == robinson_foulds(t2, t1)
    assert 0 <= d <= 2 * (n - 3) and d % 2 == 0


# --- pipeline --------------------------------------------------------------

def test_pipeline_deterministic_and_metrics():
    sim = PhyloSimulator()
    a = sim.run(np.array([0.5, 0.3]), RngStream(11))
    b = sim.run(np.array([0.5, 0.3]), RngStream(11))
    assert a == b
    assert a.outcome_holds == (a.metrics["rf_upgma"] <= a.metrics["rf_nj"])
    res = phylo_pipeline(0.5, 0.3, RngStream(11), debug=True)
    assert res["true_tree"].n_leaves == 30 and res["alignment"].length == 1000


def test_saturated_pipeline_still_runs():
    rec = PhyloSimulator(n_taxa=8, seq_length=200).run(np.array([40.0, 0.0]), RngStream(12))
    assert rec.metrics["saturated"] == 1.0
