import numpy as np
import pytest

from simexplore.density import fit_kde
from simexplore.errors import ContractViolation, DomainError
from simexplore.estimator import (
    MarginalEstimate,
    complement_check,
    consistency_gap,
    estimate_marginal,
    likelihood_at,
    likelihood_grid,
)
from simexplore.params import ParameterSpace, UniformBoxPrior
from simexplore.rng import RngStream
from simexplore.simulators import BernoulliOracle, ConstantOutcome
from simexplore.surface import GridSpec, LikelihoodSurface

UNIT = ParameterSpace.from_bounds([("theta", 0.0, 1.0)])
PRIOR = UniformBoxPrior(UNIT)


@pytest.fixture(scope="module")
def posterior_kde():
    xs = RngStream(10).generator.beta(2, 1, 10_000)
    return fit_kde(xs[:, None], UNIT)


@pytest.fixture(scope="module")
def complement_kde():
    xs = RngStream(11).generator.beta(1, 2, 10_000)
    return fit_kde(xs[:, None], UNIT)


def uniform_kde():
    # evenly spread points give a near-uniform KDE
    return fit_kde(((np.arange(20_000) + 0.5) / 20_000)[:, None], UNIT)


def test_always_true_with_prior_like_kde():
    est = estimate_marginal(uniform_kde(), PRIOR, ConstantOutcome(True), 500, RngStream(1))
    assert est.p_hat == pytest.approx(1.0, abs=0.01)
    assert np.allclose(est.weights, 1.0, atol=0.02)


def test_always_false_gives_zero():
    est = estimate_marginal(uniform_kde(), PRIOR, ConstantOutcome(False), 200, RngStream(2))
    assert est.p_hat == 0.0 and est.nonzero_weight_count == 0


def test_bernoulli_marginal(posterior_kde):
    est = estimate_marginal(posterior_kde, PRIOR, BernoulliOracle(), 2000, RngStream(3))
    assert abs(est.p_hat - 0.5) < 0.03
    assert est.M == 2000 and len(est.weights) == 2000
    assert est.std_error > 0


def test_marginal_contracts(posterior_kde):
    with pytest.raises(ContractViolation):
        estimate_marginal(posterior_kde, PRIOR, BernoulliOracle(), 0, RngStream(1))
    other = UniformBoxPrior(ParameterSpace.from_bounds([("theta", 0.0, 2.0)]))
    with pytest.raises(ContractViolation):
        estimate_marginal(posterior_kde, other, BernoulliOracle(), 10, RngStream(1))


def test_marginal_independent_of_workers(posterior_kde):
    a = estimate_marginal(posterior_kde, PRIOR, BernoulliOracle(), 300, RngStream(4), workers=1)
    b = estimate_marginal(posterior_kde, PRIOR, BernoulliOracle(), 300, RngStream(4), workers=2)
    assert np.array_equal(a.weights, b.weights) and a.p_hat == b.p_hat


def test_complement_bernoulli(posterior_kde, complement_kde):
    gap = complement_check(BernoulliOracle(), posterior_kde, complement_kde, PRIOR, 2000, RngStream(5))
    assert gap < 0.05
    again = complement_check(BernoulliOracle(), posterior_kde, complement_kde, PRIOR, 2000, RngStream(5))
    assert gap == again


def test_complement_with_empty_support():
    gap = complement_check(ConstantOutcome(True), uniform_kde(), None, PRIOR, 300, RngStream(6))
    assert gap == pytest.approx(0.0, abs=0.01)
    assert consistency_gap(MarginalEstimate.empty_support(), None) == 1.0


def test_likelihood_at(posterior_kde):
    est = MarginalEstimate(0.5, 0.0, 1, 1)
    assert likelihood_at(posterior_kde, PRIOR, est, [0.7]) == pytest.approx(0.7, abs=0.08)
    with pytest.raises(DomainError):
        likelihood_at(posterior_kde, PRIOR, est, [1.3])


def test_likelihood_grid_identity_and_single_point(posterior_kde):
    est = MarginalEstimate(0.5, 0.0, 1, 1)
    surf = likelihood_grid(posterior_kde, PRIOR, est, GridSpec(counts=50))
    inner = (surf.coords[0] >= 0.1) & (surf.coords[0] <= 0.9)
    assert np.max(np.abs(surf.values[inner] - surf.coords[0][inner])) < 0.08
    one = likelihood_grid(posterior_kde, PRIOR, est, GridSpec(counts=1))
    assert one.values.shape == (1,)
    assert one.values[0] == pytest.approx(likelihood_at(posterior_kde, PRIOR, est, [0.5]))


def test_clipping_is_reported():
    kde = fit_kde(np.full((50, 1), 0.5) + np.linspace(-1e-3, 1e-3, 50)[:, None], UNIT)
    surf = likelihood_grid(kde, PRIOR, MarginalEstimate(0.9, 0.0, 1, 1), GridSpec(counts=11))
    assert surf.values.max() <= 1.0 and surf.clipped_count > 0
    assert surf.raw_values.max() > 1.0


def test_marginalize_averages_other_axes():
    rng = RngStream(7)
    vals = rng.random((3, 4, 5))
    coords = [np.arange(3.0), np.arange(4.0), np.arange(5.0)]
    surf = LikelihoodSurface(["a", "b", "c"], coords, vals)
    one = surf.marginalize(["b"])
    assert np.allclose(one.values, vals.mean(axis=(0, 2)))
    two = surf.marginalize(["c", "a"])
    assert two.values.shape == (5, 3)
    assert np.allclose(two.values, vals.mean(axis=1).T)
