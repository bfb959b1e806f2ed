"""The simulator interface and the small built-in analytic simulators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import RngStream


@dataclass(frozen=True)
class OutcomeRecord:
    """Result of one simulation: whether the outcome event held, plus observables."""

    outcome_holds: bool
    metrics: dict[str, float] = field(default_factory=dict)

    def negated(self) -> OutcomeRecord:
        return OutcomeRecord(not self.outcome_holds, dict(self.metrics))


class Simulator:
    """Base class for outcome simulators.

    Subclasses implement :meth:`run`, which must be a pure function of
    ``(theta, rng)``: the same vector and stream give the same record. `theta`
    arrives already rounded on integer-valued dimensions.
    """

    metric_names: tuple[str, ...] = ()

    def run(self, theta: np.ndarray, rng: RngStream) -> OutcomeRecord:
        raise NotImplementedError

    def __call__(self, theta, rng):
        return self.run(theta, rng)


class Negated(Simulator):
    """The complement event: same simulation, outcome flipped."""

    def __init__(self, inner: Simulator):
        self.inner = inner
        self.metric_names = inner.metric_names

    def run(self, theta, rng):
        return self.inner.run(theta, rng).negated()


class ConstantOutcome(Simulator):
    def __init__(self, value: bool):
        self.value = bool(value)

    def run(self, theta, rng):
        return OutcomeRecord(self.value)


class BernoulliOracle(Simulator):
    """Outcome holds with probability equal to the first parameter.

    With a uniform prior on [0, 1] the likelihood is the identity, the
    posterior is Beta(2, 1) and the marginal probability of the outcome is 1/2.
    """

    metric_names = ("u",)

    def run(self, theta, rng):
        u = float(rng.random())
        return OutcomeRecord(u < float(theta[0]), {"u": u})
