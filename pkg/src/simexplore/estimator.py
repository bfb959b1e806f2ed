"""Importance-sampling estimate of the outcome's marginal probability and the
likelihood surface reconstructed from it.

The fitted KDE stands in for the posterior. Draws from it are simulated once
each and weighted by ``prior / kde`` when the outcome holds; the mean weight
estimates P(R). Bayes' rule then turns ``kde * P(R) / prior`` into an
estimate of P(R | theta).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .density import KdeModel, kde_density, kde_density_many, kde_sample
from .errors import ContractViolation, DomainError
from .parallel import map_ranges
from .params import UniformBoxPrior, prior_density, prior_density_many
from .rng import RngStream
from .simulators import Negated, Simulator
from .surface import GridSpec, LikelihoodSurface, grid_points

log = logging.getLogger(__name__)


@dataclass
class MarginalEstimate:
    p_hat: float
    std_error: float
    M: int
    nonzero_weight_count: int
    thetas: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)
    metrics: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @classmethod
    def from_weights(cls, weights, thetas=None, metrics=None) -> MarginalEstimate:
        w = np.asarray(weights, dtype=float)
        m = len(w)
        se = float(w.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
        return cls(float(w.mean()) if m else 0.0, se, m, int(np.count_nonzero(w)), thetas, w, metrics or {})

    @classmethod
    def empty_support(cls, M: int = 0) -> MarginalEstimate:
        """The convention used when the outcome never occurs: P(R) = 0."""
        return cls(0.0, 0.0, M, 0)

    def to_json(self) -> dict:
        return {
            "p_hat": self.p_hat,
            "std_error": self.std_error,
            "M": self.M,
            "nonzero_weight_count": self.nonzero_weight_count,
        }


def _importance_draws(start, stop, model, sim, rng):
    space = model.space
    out = []
    for i in range(start, stop):
        s = rng.child("is", i)
        theta = kde_sample(model, s.child("draw"))
        record = sim.run(space.to_simulator(theta), s.child("sim"))
        out.append((theta, record.outcome_holds, record.metrics))
    return out


def estimate_marginal(
    kde: KdeModel,
    prior: UniformBoxPrior,
    sim: Simulator,
    M: int,
    rng: RngStream,
    workers: int | None = None,
) -> MarginalEstimate:
    """Importance-sampling estimate of P(R) from `M` draws of the KDE.

    Draw ``i`` uses substream ``("is", i)``, so the result is identical for
    any worker count.
    """
    if M < 1:
        raise ContractViolation("M must be a positive integer")
    if kde.space != prior.space:
        raise ContractViolation("KDE and prior are defined on different parameter spaces")
    draws = map_ranges(partial(_importance_draws, model=kde, sim=sim, rng=rng), M, workers)
    thetas = np.array([d[0] for d in draws])
    holds = np.array([d[1] for d in draws], dtype=bool)
    weights = np.zeros(M)
    if holds.any():
        k = kde_density_many(kde, thetas[holds])
        weights[holds] = prior_density_many(prior, thetas[holds]) / k
    metrics = {}
    names = sorted(draws[0][2]) if draws else []
    if names and all(sorted(d[2]) == names for d in draws):
        metrics = {n: np.array([d[2][n] for d in draws], dtype=float) for n in names}
    est = MarginalEstimate.from_weights(weights, thetas, metrics)
    log.info("P(R) estimate %.4f +/- %.4f from %d draws", est.p_hat, est.std_error, M)
    return est


def consistency_gap(
    estimate_r: MarginalEstimate | None,
    estimate_rc: MarginalEstimate | None,
) -> float:
    """``|P(R) + P(R^c) - 1|``; a missing estimate counts as probability 0."""
    p = estimate_r.p_hat if estimate_r is not None else 0.0
    q = estimate_rc.p_hat if estimate_rc is not None else 0.0
    return abs(p + q - 1.0)


def complement_check(sim, kde_r, kde_rc, prior, M, rng, workers=None) -> float:
    """Estimate P(R) and P(R^c) from their KDEs and return the consistency gap.

    Either KDE may be ``None`` when its chain could not start (the event has
    empty support); that side then contributes 0.
    """
    est_r = estimate_marginal(kde_r, prior, sim, M, rng.child("r"), workers) if kde_r is not None else None
    est_rc = (
        estimate_marginal(kde_rc, prior, Negated(sim), M, rng.child("rc"), workers)
        if kde_rc is not None else None
    )
    return consistency_gap(est_r, est_rc)


def likelihood_at(kde: KdeModel, prior: UniformBoxPrior, estimate: MarginalEstimate, theta, clip: bool = True) -> float:
    """``kde(theta) * P(R) / prior(theta)``, clipped to [0, 1] unless `clip` is false."""
    p = prior_density(prior, theta)
    if p <= 0.0:
        raise DomainError("likelihood is undefined where the prior density is zero")
    value = kde_density(kde, theta) * estimate.p_hat / p
    return min(max(value, 0.0), 1.0) if clip else value


def likelihood_grid(kde: KdeModel, prior: UniformBoxPrior, estimate: MarginalEstimate, grid: GridSpec) -> LikelihoodSurface:
    """Evaluate the likelihood on a grid, optionally as a slice with some dims fixed."""
    space = prior.space
    names, coords, thetas = grid_points(space, grid)
    p = prior_density_many(prior, thetas)
    if np.any(p <= 0.0):
        raise DomainError("grid contains points outside the prior support")
    raw = kde_density_many(kde, thetas) * estimate.p_hat / p
    shape = tuple(len(c) for c in coords)
    raw = raw.reshape(shape)
    values = np.clip(raw, 0.0, 1.0)
    return LikelihoodSurface(
        names, coords, values, raw, None, dict(grid.fixed),
        {"p_hat": estimate.p_hat, "std_error": estimate.std_error, "M": estimate.M},
    )


def write_marginal_json(estimate: MarginalEstimate, path, extra: dict | None = None) -> None:
    doc = estimate.to_json()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
