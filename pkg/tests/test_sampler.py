import numpy as np
import pytest
from scipy import stats

from simexplore.errors import ContractViolation, InitializationError
from simexplore.params import ParameterSpace, UniformBoxPrior, UniformWindowKernel
from simexplore.rng import RngStream
from simexplore.sampler import (
    ACCEPTED,
    ChainConfig,
    acceptance_report,
    extract_samples,
    run_chain,
)
from simexplore.simulators import BernoulliOracle, ConstantOutcome

UNIT = ParameterSpace.from_bounds([("theta", 0.0, 1.0)])
PRIOR = UniformBoxPrior(UNIT)


def chain(sim, n, thin=1, burn=0, frac=0.5, seed=0, initial=None, budget=10_000):
    cfg = ChainConfig(n, thin=thin, burn_in=burn, master_seed=seed, init_budget=budget)
    return run_chain(sim, PRIOR, UniformWindowKernel.fraction_of(UNIT, frac), UNIT, cfg, initial=initial)


def test_always_true_samples_prior():
    tr = chain(ConstantOutcome(True), 20_000, thin=10, burn=0, seed=1)
    assert len(tr.retained) == 2000
    assert acceptance_report(tr)["accepted"] == 1.0
    assert stats.kstest(tr.retained[:, 0], "uniform").statistic < 0.05


def test_bernoulli_posterior_is_beta21():
    tr = chain(BernoulliOracle(), 20_000, thin=10, burn=0, seed=2)
    assert stats.kstest(tr.retained[:, 0], stats.beta(2, 1).cdf).statistic < 0.05


def test_outcome_rejection_rate_with_broad_proposals():
    # a full-width reflected window makes proposals exactly uniform on [0, 1],
    # so the outcome fails with probability 1 - E[theta'] = 1/2
    tr = chain(BernoulliOracle(), 20_000, seed=2, frac=1.0)
    rep = acceptance_report(tr)
    assert abs(rep["rejected_by_outcome"] - 0.5) < 0.05
    assert rep["rejected_by_prior_kernel"] == 0.0
    assert sum(rep.values()) == pytest.approx(1.0)


def test_zero_steps_has_only_initial_state():
    tr = chain(ConstantOutcome(True), 0)
    assert tr.thetas.shape == (1, 1) and tr.n_steps == 0
    assert len(tr.retained) == 0


def test_initialization_failure_names_budget():
    with pytest.raises(InitializationError, match="budget 25"):
        chain(ConstantOutcome(False), 10, budget=25)


def test_extract_samples_counts():
    tr = chain(ConstantOutcome(True), 1000, seed=3)
    assert np.array_equal(extract_samples(tr, 0, 1), tr.thetas[1:])
    assert len(extract_samples(tr, 0, 100)) == 10
    with pytest.raises(ContractViolation):
        extract_samples(tr, 0, 0)


def test_protocol_sample_counts():
    # the step-index arithmetic behind the 1,000 / 5,000 sample protocols
    steps = np.arange(1, 100_001)
    assert np.count_nonzero(steps % 100 == 0) == 1000
    steps = np.arange(1, 1_000_001)
    assert np.count_nonzero(steps % 200 == 0) == 5000
    assert np.count_nonzero((steps[:20_000] > 2000) & (steps[:20_000] % 10 == 0)) == 1800


def test_accepted_states_satisfy_outcome_and_move():
    tr = chain(BernoulliOracle(), 500, seed=4)
    acc = np.flatnonzero(tr.kinds == ACCEPTED)
    stay = np.flatnonzero(tr.kinds[1:] != ACCEPTED) + 1
    assert np.all(tr.thetas[stay] == tr.thetas[stay - 1])
    assert len(acc) > 0


def test_reproducible_and_seed_sensitive():
    a = chain(BernoulliOracle(), 300, seed=5)
    b = chain(BernoulliOracle(), 300, seed=5)
    c = chain(BernoulliOracle(), 300, seed=6)
    assert np.array_equal(a.thetas, b.thetas) and np.array_equal(a.kinds, b.kinds)
    assert not np.array_equal(a.thetas, c.thetas)


def test_config_contracts():
    with pytest.raises(ContractViolation):
        ChainConfig(10, thin=0)
    with pytest.raises(ContractViolation):
        ChainConfig(10, burn_in=10)
    assert ChainConfig(1000).burn_in == 100


def test_initial_outside_space_rejected():
    with pytest.raises(ContractViolation):
        chain(ConstantOutcome(True), 10, initial=[1.5])


def test_all_false_after_start_never_accepts():
    class FirstOnly(ConstantOutcome):
        def __init__(self):
            super().__init__(True)
            self.calls = 0

        def run(self, theta, rng):
            from simexplore.simulators import OutcomeRecord

            self.calls += 1
            return OutcomeRecord(self.calls == 1)

    tr = chain(FirstOnly(), 200, seed=7)
    assert acceptance_report(tr)["accepted"] == 0.0
