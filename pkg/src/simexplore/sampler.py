"""Likelihood-free Metropolis-Hastings over any simulator/outcome pair.

Each step proposes a move, runs the prior/kernel Hastings test, and only if
that passes runs a single simulation at the proposed point. The move is
accepted exactly when the simulated outcome holds, so the chain targets the
parameter distribution conditional on the outcome without ever evaluating a
likelihood.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, InitializationError
from .params import (
    ParameterSpace,
    UniformBoxPrior,
    UniformWindowKernel,
    hastings_ratio,
    prior_sample,
    propose,
)
from .rng import RngStream
from .simulators import Simulator

log = logging.getLogger(__name__)

INITIAL, ACCEPTED, REJECTED_PRIOR_KERNEL, REJECTED_OUTCOME = 0, 1, 2, 3
KIND_NAMES = ("initial", "accepted", "rejected_by_prior_kernel", "rejected_by_outcome")
STEP_KINDS = KIND_NAMES[1:]


@dataclass(frozen=True)
class ChainConfig:
    n_steps: int
    thin: int = 1
    burn_in: int | None = None
    master_seed: int = 0
    init_budget: int = 10_000

    def __post_init__(self):
        if self.n_steps < 0:
            raise ContractViolation("n_steps must be non-negative")
        if self.thin < 1:
            raise ContractViolation("thin must be a positive integer")
        if self.thin > max(self.n_steps, 1):
            raise ContractViolation("thin must not exceed n_steps")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.n_steps // 10)
        if self.burn_in < 0 or (self.n_steps > 0 and self.burn_in >= self.n_steps):
            raise ContractViolation("burn_in must satisfy 0 <= burn_in < n_steps")
        if self.init_budget < 1:
            raise ContractViolation("init_budget must be positive")

    def to_json(self) -> dict:
        return {
            "n_steps": self.n_steps,
            "thin": self.thin,
            "burn_in": self.burn_in,
            "master_seed": self.master_seed,
            "init_budget": self.init_budget,
        }


@dataclass(frozen=True)
class ChainTrace:
    """Full history of one chain.

    ``thetas[k]`` and ``kinds[k]`` describe the state after step ``k``;
    row 0 is the initial state.
    """

    space: ParameterSpace
    thetas: np.ndarray
    kinds: np.ndarray
    config: ChainConfig
    init_attempts: int
    simulator_calls: int
    retained: np.ndarray = field(init=False)

    def __post_init__(self):
        for arr in (self.thetas, self.kinds):
            arr.setflags(write=False)
        retained = extract_samples(self, self.config.burn_in, self.config.thin)
        retained.setflags(write=False)
        object.__setattr__(self, "retained", retained)

    @property
    def n_steps(self) -> int:
        return len(self.kinds) - 1

    @property
    def counters(self) -> dict[str, int]:
        counts = np.bincount(self.kinds[1:], minlength=4)
        return {KIND_NAMES[k]: int(counts[k]) for k in (ACCEPTED, REJECTED_PRIOR_KERNEL, REJECTED_OUTCOME)}

    def retained_steps(self, burn_in: int | None = None, thin: int | None = None) -> np.ndarray:
        burn_in = self.config.burn_in if burn_in is None else burn_in
        thin = self.config.thin if thin is None else thin
        steps = np.arange(1, self.n_steps + 1)
        return steps[(steps > burn_in) & (steps % thin == 0)]


def _initialize(sim, prior, space, config, initial, rng):
    budget = config.init_budget
    calls = 0
    for attempt in range(budget):
        if initial is None:
            theta = prior_sample(prior, rng.child("init-theta", attempt))
        else:
            theta = space.check(initial)
        record = sim.run(space.to_simulator(theta), rng.child("init-sim", attempt))
        calls += 1
        if record.outcome_holds:
            return theta, attempt + 1, calls
    where = "prior draws" if initial is None else "simulations at the given initial state"
    raise InitializationError(
        f"outcome never held in {budget} {where} (initialization budget {budget} exhausted)"
    )


def run_chain(
    sim: Simulator,
    prior: UniformBoxPrior,
    kernel: UniformWindowKernel,
    space: ParameterSpace,
    config: ChainConfig,
    initial=None,
    rng: RngStream | None = None,
) -> ChainTrace:
    """Run the likelihood-free chain for ``config.n_steps`` steps.

    Raises
    ------
    InitializationError
        If no starting state with the outcome holding is found within
        ``config.init_budget`` attempts.
    """
    if prior.space != space:
        raise ContractViolation("prior and chain use different parameter spaces")
    if rng is None:
        rng = RngStream(config.master_seed).child("chain")
    if initial is not None and not space.contains(initial):
        raise ContractViolation("initial state lies outside the parameter space")

    theta, attempts, calls = _initialize(sim, prior, space, config, initial, rng)
    n = config.n_steps
    thetas = np.empty((n + 1, space.ndim))
    kinds = np.empty(n + 1, dtype=np.int8)
    thetas[0] = theta
    kinds[0] = INITIAL

    propose_rng = rng.child("propose")
    accept_rng = rng.child("accept")
    for k in range(1, n + 1):
        candidate = propose(kernel, theta, space, propose_rng)
        h = hastings_ratio(prior, kernel, theta, candidate)
        if accept_rng.random() >= h:
            kind = REJECTED_PRIOR_KERNEL
        else:
            record = sim.run(space.to_simulator(candidate), rng.child("sim", k))
            calls += 1
            if record.outcome_holds:
                theta = candidate
                kind = ACCEPTED
            else:
                kind = REJECTED_OUTCOME
        thetas[k] = theta
        kinds[k] = kind

    trace = ChainTrace(space, thetas, kinds, config, attempts, calls)
    log.info("chain finished: %s", acceptance_report(trace))
    return trace


def extract_samples(trace: ChainTrace, burn_in: int, thin: int) -> np.ndarray:
    """Thinned post-burn-in states: steps ``k > burn_in`` with ``k % thin == 0``."""
    if thin < 1:
        raise ContractViolation("thin must be a positive integer")
    if burn_in < 0:
        raise ContractViolation("burn_in must be non-negative")
    return np.array(trace.thetas[trace.retained_steps(burn_in, thin)])


def acceptance_report(trace: ChainTrace) -> dict[str, float]:
    counts = trace.counters
    n = trace.n_steps
    if n == 0:
        return {k: 0.0 for k in STEP_KINDS}
    return {k: counts[k] / n for k in STEP_KINDS}


def write_trace_csv(trace: ChainTrace, path, header_comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "kind", *trace.space.names])
        for k in range(len(trace.kinds)):
            w.writerow([k, KIND_NAMES[trace.kinds[k]], *(repr(float(v)) for v in trace.thetas[k])])


def trace_metadata(trace: ChainTrace) -> dict:
    return {
        "config": trace.config.to_json(),
        "master_seed": trace.config.master_seed,
        "initialization_attempts": trace.init_attempts,
        "simulator_calls": trace.simulator_calls,
        "counters": trace.counters,
        "acceptance_rates": acceptance_report(trace),
        "n_retained": int(len(trace.retained)),
        "parameters": trace.space.to_json(),
    }


def read_trace_csv(path, space: ParameterSpace) -> tuple[np.ndarray, np.ndarray]:
    """Load ``(thetas, kinds)`` back from :func:`write_trace_csv` output."""
    thetas, kinds = [], []
    with open(path, newline="") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(rows)
        if header[2:] != space.names:
            raise ContractViolation(f"trace columns {header[2:]} do not match {space.names}")
        for row in rows:
            kinds.append(KIND_NAMES.index(row[1]))
            thetas.append([float(v) for v in row[2:]])
    return np.array(thetas), np.array(kinds, dtype=np.int8)
