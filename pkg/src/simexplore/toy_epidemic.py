"""A small stochastic SEIR epidemic on a fixed synthetic contact structure.

This is a stand-in for a full agent-based influenza simulator, sized so the
paired-strategy and external-process machinery can be exercised on a desk.
It is not calibrated to any real population.

Contact layers: households, day groups (school classes and workplaces) and
uniform community mixing. Vaccination removes a uniform fraction of the
population before the epidemic. Once cumulative ascertained symptomatic
cases reach a threshold, a response starts:

``closure``
    school classes stop mixing for a fixed number of days, and community
    contact rises for the children sent home;
``antiviral``
    every newly ascertained case and its household are treated for a few
    days, cutting their household and community infectiousness and
    susceptibility and their chance of illness;
``halve``
    transmission is halved in every layer from the start (a reference
    strategy with an obvious effect).

Run as a module it speaks the external-simulator line protocol::

    python -m simexplore.toy_epidemic --seed 7 --param R0=2.0 --param f_v=0.0 --strategy closure
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .params import ParameterSpace
from .rng import RngStream
from .simulators import OutcomeRecord, Simulator

STRATEGIES = ("none", "closure", "antiviral", "halve")
TOY_SPACE = ParameterSpace.from_bounds([("R0", 1.2, 3.0), ("f_v", 0.0, 0.7)])
_STRUCTURE_SEED = 20120718


@dataclass(frozen=True)
class EpidemicSettings:
    population: int = 10_000
    days: int = 180
    initial_infected: int = 10
    seeded_daily: int = 1
    latent_days: float = 1.5
    infectious_days: float = 4.0
    symptomatic_fraction: float = 0.67
    ascertainment_fraction: float = 0.8
    ascertainment_delay: int = 1
    threshold: float = 0.008
    response_delay: int = 7
    closure_days: int = 14
    closure_community_boost: float = 1.5
    antiviral_infectiousness: float = 0.62
    antiviral_susceptibility: float = 0.3
    antiviral_illness: float = 0.6
    treatment_days: int = 5
    prophylaxis_days: int = 10
    household_share: float = 0.3
    school_share: float = 0.35
    work_share: float = 0.15
    community_share: float = 0.2

    def shares(self) -> dict[str, float]:
        return {
            "household": self.household_share,
            "school": self.school_share,
            "work": self.work_share,
            "community": self.community_share,
        }


@dataclass(frozen=True)
class ContactStructure:
    household: np.ndarray  # household id per person
    school: np.ndarray  # class id per person; non-members point at a sink group
    work: np.ndarray  # workplace id per person; non-members point at a sink group
    n_households: int
    n_schools: int  # excluding the sink
    n_works: int
    children: np.ndarray  # indices of school members
    mean_contacts: dict


@lru_cache(maxsize=4)
def contact_structure(population: int = 10_000) -> ContactStructure:
    """The fixed synthetic population (same for every run)."""
    g = np.random.default_rng(_STRUCTURE_SEED)
    sizes = []
    while sum(sizes) < population:
        sizes.append(int(g.choice([1, 2, 3, 4, 5], p=[0.25, 0.3, 0.2, 0.15, 0.1])))
    sizes[-1] -= sum(sizes) - population
    household = np.repeat(np.arange(len(sizes)), sizes)

    child = g.random(population) < 0.25
    worker = ~child & (g.random(population) < 0.7)
    kids = np.flatnonzero(child)
    staff = np.flatnonzero(worker)
    n_schools = -(-len(kids) // 25)
    n_works = -(-len(staff) // 15)
    school = np.full(population, n_schools)
    work = np.full(population, n_works)
    school[kids] = g.permutation(len(kids)) // 25
    work[staff] = g.permutation(len(staff)) // 15

    def mean_others(ids, n_groups):
        counts = np.bincount(ids, minlength=n_groups + 1)[:n_groups]
        # same-group others per person, averaged over everyone
        return float((counts * (counts - 1)).sum() / population)

    mean_contacts = {
        "household": mean_others(household, len(sizes)),
        "school": mean_others(school, n_schools),
        "work": mean_others(work, n_works),
        "community": 1.0,
    }
    return ContactStructure(household, school, work, len(sizes), n_schools, n_works, kids, mean_contacts)


def _group_pressure(ids, idx, weights, n_groups):
    """Summed infectiousness of each person's group; the sink group gets zero."""
    counts = np.bincount(ids[idx], weights=weights, minlength=n_groups + 1)
    counts[n_groups:] = 0.0
    return counts[ids]


def toy_epidemic(R0: float, f_v: float, strategy: str, seed: int, settings: EpidemicSettings | None = None,
                 return_series: bool = False) -> dict:
    """Simulate one epidemic; returns ``{"peak": ..., "total": ...}`` symptomatic counts.

    ``peak`` is the largest number of people simultaneously symptomatic;
    ``total`` is the cumulative number who became symptomatic.

    With ``return_series`` the result also holds ``"series"`` (symptomatic
    count at the end of each day) and ``"response_day"``.

    Every person carries fixed uniforms for illness and ascertainment, and
    each day's draws come from their own substream, so two strategies run
    with the same seed see the same randomness wherever their states agree.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    s = settings or EpidemicSettings()
    cs = contact_structure(s.population)
    N = s.population
    root = RngStream(seed)

    effective_R0 = R0 * (0.5 if strategy == "halve" else 1.0)
    beta = {
        layer: share * effective_R0 / (s.infectious_days * cs.mean_contacts[layer])
        for layer, share in s.shares().items()
    }
    p_progress = 1.0 / s.latent_days
    p_recover = 1.0 / s.infectious_days

    init = root.child("init").generator
    u_ill, u_asc = init.random((2, N))
    # 0 S, 1 E, 2 I, 3 R
    state = np.zeros(N, dtype=np.int8)
    state[init.random(N) < f_v] = 3
    symptomatic = np.zeros(N, dtype=bool)
    treated_until = np.zeros(N, dtype=np.int64)

    susceptible = np.flatnonzero(state == 0)
    first = init.choice(susceptible, size=min(s.initial_infected, len(susceptible)), replace=False)
    state[first] = 1
    symptomatic[first] = u_ill[first] < s.symptomatic_fraction

    response_day = None
    pending: dict[int, np.ndarray] = {}  # day -> cases ascertained that day
    known = np.zeros(N, dtype=bool)  # ascertained and still ill
    n_known = 0
    is_child = np.zeros(N, dtype=bool)
    is_child[cs.children] = True
    total = int(symptomatic[first].sum())
    peak = 0
    sick_now = 0
    series = []
    for day in range(s.days):
        g = root.child("day", day).generator
        responding = response_day is not None and day >= response_day
        closed = strategy == "closure" and responding and day < response_day + s.closure_days
        treated = treated_until > day if strategy == "antiviral" else None

        exposed = np.flatnonzero(state == 1)
        ill = np.flatnonzero(state == 2)
        sus = np.flatnonzero(state == 0)

        # treatment acts on household and community transmission only
        w = np.ones(len(ill))
        if treated is not None:
            w[treated[ill]] = 1.0 - s.antiviral_infectiousness
        near = beta["household"] * _group_pressure(cs.household, ill, w, cs.n_households)[sus]
        near += beta["community"] * w.sum() / N
        if treated is not None:
            near[treated[sus]] *= 1.0 - s.antiviral_susceptibility
        ones = np.ones(len(ill))
        hazard = near + beta["work"] * _group_pressure(cs.work, ill, ones, cs.n_works)[sus]
        if not closed:
            hazard += beta["school"] * _group_pressure(cs.school, ill, ones, cs.n_schools)[sus]
        else:
            hazard[is_child[sus]] += beta["community"] * len(ill) / N * (s.closure_community_boost - 1.0)

        u_inf, u_stage = g.random((2, N))
        hit = np.zeros(N, dtype=bool)
        hit[sus[u_inf[sus] < -np.expm1(-hazard)]] = True
        hit[g.choice(N, size=s.seeded_daily, replace=False)] = True
        new_inf = sus[hit[sus]]
        onset = exposed[u_stage[exposed] < p_progress]
        recover = ill[u_stage[ill] < p_recover]

        p_sym = s.symptomatic_fraction
        if treated is not None:
            p_sym = np.where(treated[new_inf], p_sym * (1.0 - s.antiviral_illness), p_sym)
        symptomatic[new_inf] = u_ill[new_inf] < p_sym
        state[recover] = 3
        state[onset] = 2
        state[new_inf] = 1

        newly_sick = onset[symptomatic[onset]]
        total += len(newly_sick)
        sick_now += len(newly_sick) - int(symptomatic[recover].sum())
        peak = max(peak, sick_now)
        series.append(sick_now)

        gone = recover[known[recover]]
        known[gone] = False
        n_known -= len(gone)
        found = newly_sick[u_asc[newly_sick] < s.ascertainment_fraction]
        pending[day + s.ascertainment_delay] = found
        confirmed = pending.pop(day, found[:0])
        confirmed = confirmed[state[confirmed] == 2]
        known[confirmed] = True
        n_known += len(confirmed)
        if response_day is None and n_known >= s.threshold * N:
            response_day = day + s.response_delay
        if strategy == "antiviral" and responding and len(confirmed):
            homes = np.zeros(cs.n_households, dtype=bool)
            homes[cs.household[confirmed]] = True
            contacts = homes[cs.household]
            treated_until[contacts] = np.maximum(treated_until[contacts], day + 1 + s.prophylaxis_days)
            treated_until[confirmed] = np.maximum(treated_until[confirmed], day + 1 + s.treatment_days)
    out = {"peak": float(peak), "total": float(total)}
    if return_series:
        out.update(series=np.array(series), response_day=response_day)
    return out


class ToyEpidemicSimulator(Simulator):
    """In-process toy epidemic under one strategy.

    The outcome holds when ``metric`` stays below ``threshold`` (a fraction
    of the population).
    """

    metric_names = ("peak", "total")

    def __init__(self, strategy: str = "none", metric: str = "total", threshold: float = 0.1,
                 settings: EpidemicSettings | None = None):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {strategy!r}")
        self.strategy = strategy
        self.metric = metric
        self.threshold = threshold
        self.settings = settings or EpidemicSettings()

    def run_seed(self, theta, seed: int) -> OutcomeRecord:
        m = toy_epidemic(float(theta[0]), float(theta[1]), self.strategy, seed, self.settings)
        return OutcomeRecord(m[self.metric] < self.threshold * self.settings.population, m)

    def run(self, theta, rng):
        return self.run_seed(theta, rng.seed_int())


def main(argv=None) -> int:
    from .extern import format_protocol

    ap = argparse.ArgumentParser(prog="python -m simexplore.toy_epidemic", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--param", action="append", default=[], metavar="NAME=VALUE")
    ap.add_argument("--strategy", choices=STRATEGIES, default="none")
    ap.add_argument("--metric", choices=("peak", "total"), default="total")
    ap.add_argument("--threshold", type=float, default=0.1)
    args = ap.parse_args(argv)

    params = {}
    for item in args.param:
        name, _, value = item.partition("=")
        params[name] = float(value)
    try:
        theta = [params["R0"], params["f_v"]]
    except KeyError as exc:
        print(f"missing parameter {exc}", file=sys.stderr)
        return 2
    record = ToyEpidemicSimulator(args.strategy, args.metric, args.threshold).run_seed(theta, args.seed)
    sys.stdout.write(format_protocol(record))
    return 0


if __name__ == "__main__":
    sys.exit(main())
