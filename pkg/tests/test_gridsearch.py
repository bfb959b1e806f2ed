import numpy as np
import pytest
from scipy import stats

from simexplore.errors import ContractViolation
from simexplore.gridsearch import grid_estimate
from simexplore.params import ParameterSpace
from simexplore.rng import RngStream
from simexplore.simulators import BernoulliOracle, ConstantOutcome
from simexplore.surface import GridSpec, axis_coordinates, grid_points

UNIT = ParameterSpace.from_bounds([("theta", 0.0, 1.0)])
BOX = ParameterSpace.from_bounds([("a", 0.0, 1.0), ("b", 10.0, 20.0)])


def test_always_true_grid_is_one():
    surf = grid_estimate(ConstantOutcome(True), BOX, GridSpec(counts=4, replicates=5), RngStream(1))
    assert surf.values.shape == (4, 4) and np.all(surf.values == 1.0)
    assert np.all(surf.std_error == 0.0)


def test_bernoulli_within_binomial_ci():
    r = 100
    surf = grid_estimate(BernoulliOracle(), UNIT, GridSpec(counts=20, replicates=r), RngStream(2))
    # 20 independent 99% intervals: one miss happens 18% of the time, so allow
    # at most two misses (probability of more is about 0.1%) and require the
    # 99.9% interval everywhere
    misses = 0
    for theta, p in zip(surf.coords[0], surf.values):
        lo, hi = stats.binom.interval(0.99, r, theta)
        misses += not (lo / r <= p <= hi / r)
        lo, hi = stats.binom.interval(0.999, r, theta)
        assert lo / r <= p <= hi / r
    assert misses <= 2


def test_grid_layout_and_fixed_slice():
    assert np.allclose(axis_coordinates(0, 1, 4), [0.125, 0.375, 0.625, 0.875])
    assert np.allclose(axis_coordinates(0, 1, 3, midpoints=False), [0, 0.5, 1])
    names, coords, pts = grid_points(BOX, GridSpec(counts={"a": 3}, fixed={"b": 12.5}))
    assert names == ["a"] and pts.shape == (3, 2) and np.all(pts[:, 1] == 12.5)
    with pytest.raises(ContractViolation):
        GridSpec(counts=0)


def test_workers_do_not_change_result():
    spec = GridSpec(counts=6, replicates=20)
    a = grid_estimate(BernoulliOracle(), UNIT, spec, RngStream(3), workers=1)
    b = grid_estimate(BernoulliOracle(), UNIT, spec, RngStream(3), workers=2)
    assert np.array_equal(a.values, b.values)
