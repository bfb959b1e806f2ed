"""Driving simulators that live in other processes, and paired-strategy runs.

External executables are called as::

    <exe> [fixed args] --seed <u64> --param <name>=<value> ...

and must print zero or more ``METRIC <name> <float>`` lines followed by
exactly one ``OUTCOME <0|1>`` line on standard output, then exit 0. Anything
else is a hard error: a crashed simulation must never be read as "outcome
did not occur".
"""
from __future__ import annotations

import re
import subprocess
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractViolation, ExternalSimulatorError
from .params import ParameterSpace
from .rng import RngStream
from .simulators import OutcomeRecord, Simulator

_METRIC_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")
COMPARISONS = {
    "<": lambda v, t: v < t,
    "<=": lambda v, t: v <= t,
    ">": lambda v, t: v > t,
    ">=": lambda v, t: v >= t,
}


def format_protocol(record: OutcomeRecord) -> str:
    """Serialize a record as protocol lines (floats use ``repr`` so they round-trip)."""
    lines = []
    for name, value in record.metrics.items():
        if not _METRIC_NAME.match(name):
            raise ContractViolation(f"metric name {name!r} is not protocol-safe")
        lines.append(f"METRIC {name} {float(value)!r}")
    lines.append(f"OUTCOME {int(bool(record.outcome_holds))}")
    return "\n".join(lines) + "\n"


def parse_protocol(text: str) -> OutcomeRecord:
    """Parse protocol output; raises :class:`ExternalSimulatorError` on any deviation."""
    metrics: dict[str, float] = {}
    outcome = None
    for lineno, line in enumerate(text.split("\n"), 1):
        if line == "":
            continue
        if outcome is not None:
            raise ExternalSimulatorError(f"line {lineno}: output after the OUTCOME line: {line!r}", stdout=text)
        parts = line.split(" ")
        if parts[0] == "METRIC" and len(parts) == 3 and _METRIC_NAME.match(parts[1]):
            try:
                value = float(parts[2])
            except ValueError:
                raise ExternalSimulatorError(f"line {lineno}: bad metric value {parts[2]!r}", stdout=text) from None
            if parts[1] in metrics:
                raise ExternalSimulatorError(f"line {lineno}: metric {parts[1]!r} repeated", stdout=text)
            metrics[parts[1]] = value
        elif parts[0] == "OUTCOME" and len(parts) == 2 and parts[1] in ("0", "1"):
            outcome = parts[1] == "1"
        else:
            raise ExternalSimulatorError(f"line {lineno}: not a protocol line: {line!r}", stdout=text)
    if outcome is None:
        raise ExternalSimulatorError("no OUTCOME line in simulator output", stdout=text)
    return OutcomeRecord(outcome, metrics)


@dataclass(frozen=True)
class OutcomeRule:
    """Recompute the outcome from an emitted metric instead of trusting OUTCOME."""

    metric: str
    comparison: str
    threshold: float

    def __post_init__(self):
        if self.comparison not in COMPARISONS:
            raise ContractViolation(f"comparison must be one of {sorted(COMPARISONS)}")

    def apply(self, record: OutcomeRecord) -> OutcomeRecord:
        if self.metric not in record.metrics:
            raise ExternalSimulatorError(f"simulator did not emit metric {self.metric!r}")
        holds = COMPARISONS[self.comparison](record.metrics[self.metric], self.threshold)
        return OutcomeRecord(bool(holds), dict(record.metrics))


@dataclass(frozen=True)
class ExternalSimSpec:
    """How to launch an external simulator.

    ``param_flags`` maps each parameter name to the name used after
    ``--param``; by default the parameter's own name.
    """

    executable: tuple[str, ...]
    fixed_args: tuple[str, ...] = ()
    param_flags: dict = field(default_factory=dict)
    outcome_rule: OutcomeRule | None = None
    timeout: float = 600.0

    def __post_init__(self):
        exe = (self.executable,) if isinstance(self.executable, str) else tuple(self.executable)
        if not exe:
            raise ContractViolation("executable must not be empty")
        object.__setattr__(self, "executable", exe)
        object.__setattr__(self, "fixed_args", tuple(self.fixed_args))
        if self.timeout <= 0:
            raise ContractViolation("timeout must be positive")

    def check_space(self, space: ParameterSpace) -> None:
        flags = [self.param_flags.get(n, n) for n in space.names]
        unknown = set(self.param_flags) - set(space.names)
        if unknown:
            raise ContractViolation(f"flag mapping names unknown parameters {sorted(unknown)}")
        if len(set(flags)) != len(flags):
            raise ContractViolation("two parameters map to the same flag")

    def command(self, space: ParameterSpace, theta, seed: int) -> list[str]:
        theta = space.to_simulator(theta)
        cmd = [*self.executable, *self.fixed_args, "--seed", str(int(seed))]
        for name, value, is_int in zip(space.names, theta, space.integer_mask):
            text = str(int(value)) if is_int else repr(float(value))
            cmd += ["--param", f"{self.param_flags.get(name, name)}={text}"]
        return cmd


def run_external(spec: ExternalSimSpec, space: ParameterSpace, theta, seed: int) -> OutcomeRecord:
    """Launch one external simulation and parse its record."""
    spec.check_space(space)
    cmd = spec.command(space, theta, seed)
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=spec.timeout, check=False)
    except subprocess.TimeoutExpired as exc:
        raise ExternalSimulatorError(
            f"simulator timed out after {spec.timeout} s: {' '.join(cmd)}",
            stdout=_text(exc.stdout), stderr=_text(exc.stderr),
        ) from None
    except OSError as exc:
        raise ExternalSimulatorError(f"could not launch {cmd[0]!r}: {exc}") from None
    if proc.returncode != 0:
        raise ExternalSimulatorError(
            f"simulator exited with status {proc.returncode}: {' '.join(cmd)}",
            stdout=proc.stdout, stderr=proc.stderr, returncode=proc.returncode,
        )
    try:
        record = parse_protocol(proc.stdout)
        if spec.outcome_rule is not None:
            record = spec.outcome_rule.apply(record)
    except ExternalSimulatorError as exc:
        raise ExternalSimulatorError(str(exc.args[0]), stdout=proc.stdout, stderr=proc.stderr, returncode=0) from None
    return record


def _text(b) -> str:
    if b is None:
        return ""
    return b.decode("utf-8", "replace") if isinstance(b, bytes) else b


class ExternalSimulator(Simulator):
    """A :class:`Simulator` backed by an executable; the seed comes from the stream."""

    def __init__(self, spec: ExternalSimSpec, space: ParameterSpace):
        spec.check_space(space)
        self.spec = spec
        self.space = space

    def run(self, theta, rng: RngStream) -> OutcomeRecord:
        return run_external(self.spec, self.space, theta, rng.seed_int())


# A side of a paired comparison: anything mapping (theta, seed) to a record.
Side = Callable[[np.ndarray, int], OutcomeRecord]


class external_side:
    """A paired-comparison side that runs an executable (picklable)."""

    def __init__(self, spec: ExternalSimSpec, space: ParameterSpace):
        spec.check_space(space)
        self.spec = spec
        self.space = space

    def __call__(self, theta, seed: int) -> OutcomeRecord:
        return run_external(self.spec, self.space, theta, seed)


@dataclass(frozen=True)
class PairedComparisonSpec:
    """Two strategies run with the same parameters and the same seed.

    The outcome holds when side A's ``metric`` is smaller than side B's;
    with ``ties_succeed`` (the default) equality also counts.
    """

    side_a: Side
    side_b: Side
    metric: str
    ties_succeed: bool = True


class Verdict:
    A_BETTER = "a"
    B_BETTER = "b"
    TIE = "tie"


def compare_metric(a: float, b: float) -> str:
    if a < b:
        return Verdict.A_BETTER
    if b < a:
        return Verdict.B_BETTER
    return Verdict.TIE


def paired_comparison(pair: PairedComparisonSpec, theta, seed: int) -> OutcomeRecord:
    """Run both sides on ``(theta, seed)`` and compare them on the metric.

    The returned metrics are the two sides' metrics prefixed ``a_`` and
    ``b_``. Each side derives all of its randomness from the seed alone, so
    running one side never changes what the other sees.
    """
    theta = np.asarray(theta, dtype=float)
    rec_a = pair.side_a(theta, seed)
    rec_b = pair.side_b(theta, seed)
    for label, rec in (("A", rec_a), ("B", rec_b)):
        if pair.metric not in rec.metrics:
            raise ExternalSimulatorError(f"side {label} did not report metric {pair.metric!r}")
    verdict = compare_metric(rec_a.metrics[pair.metric], rec_b.metrics[pair.metric])
    holds = verdict == Verdict.A_BETTER or (verdict == Verdict.TIE and pair.ties_succeed)
    metrics = {f"a_{k}": v for k, v in rec_a.metrics.items()}
    metrics.update({f"b_{k}": v for k, v in rec_b.metrics.items()})
    return OutcomeRecord(holds, metrics)


class PairedSimulator(Simulator):
    """A paired comparison as a :class:`Simulator`, seeded from the stream."""

    def __init__(self, pair: PairedComparisonSpec):
        self.pair = pair

    def run(self, theta, rng: RngStream) -> OutcomeRecord:
        return paired_comparison(self.pair, theta, rng.seed_int())


def tally_pairs(pair: PairedComparisonSpec, theta, seeds) -> dict[str, int]:
    """Count A-better / B-better / tie verdicts over a list of seeds."""
    counts = {Verdict.A_BETTER: 0, Verdict.B_BETTER: 0, Verdict.TIE: 0}
    for seed in seeds:
        rec = paired_comparison(pair, theta, int(seed))
        counts[compare_metric(rec.metrics[f"a_{pair.metric}"], rec.metrics[f"b_{pair.metric}"])] += 1
    return counts


def toy_side(strategy: str, metric: str = "total", threshold: float = 0.1, settings=None) -> Side:
    """An in-process toy-epidemic side for paired comparisons."""
    from .toy_epidemic import ToyEpidemicSimulator

    sim = ToyEpidemicSimulator(strategy, metric, threshold, settings)
    return sim.run_seed
