"""UPGMA-versus-NJ outcome: does UPGMA get at least as close to the true tree?"""
from __future__ import annotations

import math

import numpy as np

from ..params import ParameterSpace
from ..rng import RngStream
from ..simulators import OutcomeRecord, Simulator
from .build import neighbor_joining, upgma
from .compare import robinson_foulds
from .jc import evolve_sequences, jc_distance_matrix
from .tree import apply_skew_scale, simulate_yule_tree

PHYLO_SPACE = ParameterSpace.from_bounds([("scale", 0.02, 1.0), ("skew", 0.0, math.log(10.0))])


def phylo_pipeline(scale: float, skew: float, rng: RngStream, n_taxa: int = 30, seq_length: int = 1000, debug: bool = False):
    """Run the whole case-study pipeline and return a dict of intermediate results."""
    true_tree = simulate_yule_tree(n_taxa, rng.child("yule"))
    true_tree = apply_skew_scale(true_tree, skew, scale, rng.child("skew"))
    alignment = evolve_sequences(true_tree, seq_length, rng.child("evolve"))
    D, saturated = jc_distance_matrix(alignment, return_saturation=True)
    nj_tree = neighbor_joining(D)
    upgma_tree = upgma(D)
    out = {
        "rf_nj": robinson_foulds(nj_tree, true_tree),
        "rf_upgma": robinson_foulds(upgma_tree, true_tree),
        "saturated": saturated,
    }
    if debug:
        out.update(true_tree=true_tree, alignment=alignment, distances=D, nj_tree=nj_tree, upgma_tree=upgma_tree)
    return out


class PhyloSimulator(Simulator):
    """Outcome holds when RF(UPGMA, truth) <= RF(NJ, truth); ties count for UPGMA.

    Parameters are ``(scale, skew)``.
    """

    metric_names = ("rf_nj", "rf_upgma", "saturated")

    def __init__(self, n_taxa: int = 30, seq_length: int = 1000):
        self.n_taxa = n_taxa
        self.seq_length = seq_length

    def run(self, theta, rng):
        scale, skew = float(theta[0]), float(theta[1])
        res = phylo_pipeline(scale, skew, rng, self.n_taxa, self.seq_length)
        return OutcomeRecord(
            res["rf_upgma"] <= res["rf_nj"],
            {"rf_nj": float(res["rf_nj"]), "rf_upgma": float(res["rf_upgma"]), "saturated": float(res["saturated"])},
        )


def phylo_outcome(theta, rng: RngStream, n_taxa: int = 30, seq_length: int = 1000) -> OutcomeRecord:
    return PhyloSimulator(n_taxa, seq_length).run(np.asarray(theta, dtype=float), rng)
