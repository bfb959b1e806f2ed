"""Forward simulation of crop domestication with admixture, and the erroneous
monophyly outcome.

Two wild populations are each founded from their own 20 random marker
haplotypes. Each passes through a bottleneck, expands, and is domesticated;
the two domesticates are then merged and evolve together. Ten genomes (two
from each wild, each domesticated and the admixed population) are compared
by Dice distance and a neighbor-joining tree; the outcome holds when the two
admixed genomes form a clade of their own.

Generations are non-overlapping Wright-Fisher steps. Every offspring takes
one gamete from each of two parents drawn with replacement; a gamete is a
single-crossover recombinant of the parent's pair with probability ``p_r``
and otherwise one of the two chromosomes unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .params import ParameterSpace
from .phylo.build import neighbor_joining
from .phylo.compare import has_clade
from .rng import RngStream
from .simulators import OutcomeRecord, Simulator

N_FOUNDERS = 20
N_LOCI = 100
DIVERSITY_SAMPLE = 20

# wild-type pair, domesticated pair x2, admixed pair
POPULATION_LABELS = ("wild1", "wild1", "wild2", "wild2", "dom1", "dom1", "dom2", "dom2", "admixed", "admixed")
ADMIXED = (8, 9)

DOMESTICATION_SPACE = ParameterSpace.from_bounds(
    [
        ("n_w", 1000, 20000),
        ("n_b", 10, 39),
        ("t_b", 5, 25),
        ("n_d", 40, 400),
        ("t_d", 10, 50),
        ("t_h", 25, 400),
        ("p_r", 0.0, 1.0),
    ],
    integer=("n_w", "n_b", "t_b", "n_d", "t_d", "t_h"),
)

# reference values for the fixed dimensions, with p_r at 0.1
REFERENCE_VALUES = {"n_w": 10000, "n_b": 20, "t_b": 10, "t_d": 20, "p_r": 0.1}


@dataclass(frozen=True)
class DomesticationParams:
    n_w: int
    n_b: int
    t_b: int
    n_d: int
    t_d: int
    t_h: int
    p_r: float

    def __post_init__(self):
        for name in ("n_w", "n_b", "n_d"):
            if getattr(self, name) < 1:
                raise ContractViolation(f"{name} must be a positive integer")
        for name in ("t_b", "t_d", "t_h"):
            if getattr(self, name) < 0:
                raise ContractViolation(f"{name} must be non-negative")
        if not 0.0 <= self.p_r <= 1.0:
            raise ContractViolation("p_r must lie in [0, 1]")

    @classmethod
    def from_vector(cls, theta) -> DomesticationParams:
        t = [float(v) for v in theta]
        return cls(*(int(round(v)) for v in t[:6]), t[6])


def make_founders(rng: RngStream, n_founders: int = N_FOUNDERS, n_loci: int = N_LOCI) -> np.ndarray:
    """Founder haplotypes: i.i.d. Bernoulli(1/2) marker presence."""
    return rng.generator.random((n_founders, n_loci)) < 0.5


def next_generation(pop: np.ndarray, size: int, p_r: float, g: np.random.Generator) -> np.ndarray:
    """One Wright-Fisher generation. `pop` has shape ``(N, 2, L)``."""
    n, _, L = pop.shape
    parents = g.integers(n, size=(size, 2))
    first = g.integers(2, size=(size, 2))
    a = pop[parents, first]
    b = pop[parents, 1 - first]
    if p_r > 0.0 and L > 1:
        rec = g.random((size, 2)) < p_r
        cut = g.integers(1, L, size=(size, 2))
        tail = np.arange(L)[None, None, :] >= cut[:, :, None]
        return np.where(rec[:, :, None] & tail, b, a)
    return a


def dice_distance_matrix(genomes) -> np.ndarray:
    """Dice distance between marker-presence sets pooled over each genome's pair."""
    genomes = np.asarray(genomes, dtype=bool)
    if genomes.ndim != 3 or len(genomes) < 2:
        raise ContractViolation("need an array of at least 2 genomes shaped (n, 2, L)")
    present = genomes.any(axis=1).astype(np.int64)
    inter = present @ present.T
    sizes = present.sum(axis=1)
    denom = sizes[:, None] + sizes[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        D = np.where(denom > 0, 1.0 - 2.0 * inter / np.maximum(denom, 1), 0.0)
    np.fill_diagonal(D, 0.0)
    return D


def _pick(pop: np.ndarray, k: int, g: np.random.Generator) -> np.ndarray:
    return pop[g.choice(len(pop), size=min(k, len(pop)), replace=False)]


def simulate_domestication(params: DomesticationParams, rng: RngStream, founders=None):
    """Run the model.

    Returns
    -------
    sampled : (10, 2, L) bool array
        Genomes in ``POPULATION_LABELS`` order.
    diversity : float
        Mean pairwise Dice distance over up to 20 genomes of the final
        admixed population.
    """
    p = params
    g = rng.child("demography").generator
    if founders is None:
        founders = [make_founders(rng.child("founders", k)) for k in range(2)]

    wild_samples, domesticated = [], []
    for k in range(2):
        # wild genomes as founder-index pairs; only the drawn ones are materialised
        wild = g.integers(len(founders[k]), size=(p.n_w, 2))
        pick = g.integers(p.n_w, size=2)
        wild_samples.append(founders[k][wild[pick]])
        pop = founders[k][wild[g.integers(p.n_w, size=p.n_b)]]
        for _ in range(p.t_b):
            pop = next_generation(pop, p.n_b, p.p_r, g)
        pop = next_generation(pop, p.n_d, p.p_r, g)
        for _ in range(p.t_d):
            pop = next_generation(pop, p.n_d, p.p_r, g)
        domesticated.append(pop)

    dom_samples = [_pick(pop, 2, g) for pop in domesticated]
    pooled = np.concatenate(domesticated)
    pop = pooled[g.choice(len(pooled), size=p.n_d, replace=False)]
    for _ in range(p.t_h):
        pop = next_generation(pop, p.n_d, p.p_r, g)
    admixed = _pick(pop, 2, g)

    D = dice_distance_matrix(_pick(pop, DIVERSITY_SAMPLE, g))
    iu = np.triu_indices(len(D), 1)
    diversity = float(D[iu].mean()) if iu[0].size else 0.0
    sampled = np.concatenate([*wild_samples, *dom_samples, admixed])
    return sampled, diversity


def monophyly_from_sample(sampled: np.ndarray, rng: RngStream):
    """NJ on the Dice matrix; True when the admixed pair forms its own clade.

    Leaves are presented to NJ in a random order so that the lowest-index tie
    rule cannot systematically favour or disfavour the admixed pair.
    """
    order = rng.generator.permutation(len(sampled))
    D = dice_distance_matrix(sampled[order])
    degenerate = not np.any(D > 0)
    tree = neighbor_joining(D)
    pos = [int(np.flatnonzero(order == a)[0]) for a in ADMIXED]
    return has_clade(tree, pos), degenerate, tree


class DomesticationSimulator(Simulator):
    """Outcome: the admixed population erroneously appears monophyletic.

    Parameters follow ``DOMESTICATION_SPACE``:
    ``(n_w, n_b, t_b, n_d, t_d, t_h, p_r)``.
    """

    metric_names = ("diversity", "degenerate")

    def run(self, theta, rng):
        params = DomesticationParams.from_vector(theta)
        sampled, diversity = simulate_domestication(params, rng.child("model"))
        holds, degenerate, _ = monophyly_from_sample(sampled, rng.child("tree"))
        return OutcomeRecord(bool(holds), {"diversity": diversity, "degenerate": float(degenerate)})


def monophyly_outcome(theta, rng: RngStream) -> OutcomeRecord:
    return DomesticationSimulator().run(np.asarray(theta, dtype=float), rng)


def reference_point(**overrides) -> np.ndarray:
    """A parameter vector at the reference values, with overrides."""
    values = {**REFERENCE_VALUES, **overrides}
    missing = [n for n in DOMESTICATION_SPACE.names if n not in values]
    if missing:
        raise ContractViolation(f"no value for {missing}")
    return np.array([float(values[n]) for n in DOMESTICATION_SPACE.names])
