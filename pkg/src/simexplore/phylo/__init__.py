"""UPGMA-vs-NJ case study: trees, JC69 sequences, tree building and comparison."""
from .build import neighbor_joining, upgma
from .compare import bipartitions, has_clade, robinson_foulds
from .jc import Alignment, evolve_sequences, jc_distance, jc_distance_matrix
from .sim import PHYLO_SPACE, PhyloSimulator, phylo_outcome, phylo_pipeline
from .tree import Phylogeny, apply_skew_scale, simulate_yule_tree

__all__ = [
    "Alignment",
    "PHYLO_SPACE",
    "Phylogeny",
    "PhyloSimulator",
    "apply_skew_scale",
    "bipartitions",
    "evolve_sequences",
    "has_clade",
    "jc_distance",
    "jc_distance_matrix",
    "neighbor_joining",
    "phylo_outcome",
    "phylo_pipeline",
    "robinson_foulds",
    "simulate_yule_tree",
    "upgma",
]
