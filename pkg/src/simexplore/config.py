"""Experiment configuration: JSON schema, validation and object construction.

A config is a JSON object::

    {
      "name": "bernoulli-oracle",
      "seed": 1,
      "simulator": {"builtin": "bernoulli-oracle", "options": {}},
      "parameters": [{"name": "theta", "lower": 0, "upper": 1}],
      "chain": {"n_steps": 20000, "thin": 10, "burn_in": 2000,
                "proposal": {"fraction": 0.5}},
      "kde": {"boundary": "reflect"},
      "importance": {"M": 2000},
      "surface": {"counts": 50},
      "complement": true,
      "grid_baseline": {"counts": 20, "replicates": 200, "with_run": true}
    }

``simulator`` is one of ``{"builtin": name, "options": {...}}``,
``{"external": {...}}`` or ``{"paired": {"a": side, "b": side, "metric": m}}``
where a side is ``{"toy": strategy}`` or ``{"external": {...}}``.
``parameters`` may be omitted for builtins that define their own space.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .density import BOUNDARY_RULES
from .errors import ConfigError, ContractViolation
from .extern import (
    COMPARISONS,
    ExternalSimSpec,
    ExternalSimulator,
    OutcomeRule,
    PairedComparisonSpec,
    PairedSimulator,
    external_side,
    toy_side,
)
from .params import ParameterSpace, UniformBoxPrior, UniformWindowKernel
from .sampler import ChainConfig
from .simulators import BernoulliOracle, Simulator
from .surface import GridSpec

BUILTIN_SIMULATORS = ("bernoulli-oracle", "phylo", "domestication", "toy-epidemic")
SHIPPED_CONFIGS = ("bernoulli-oracle", "phylo-a1", "domestication-a2", "toy-epidemic-a3")
TOP_LEVEL_KEYS = {
    "name", "description", "seed", "simulator", "parameters", "chain", "kde",
    "importance", "surface", "complement", "grid_baseline",
}
_HASH_EXCLUDED = ("seed", "description")


def _builtin_space(name: str) -> ParameterSpace:
    if name == "bernoulli-oracle":
        return ParameterSpace.from_bounds([("theta", 0.0, 1.0)])
    if name == "phylo":
        from .phylo import PHYLO_SPACE

        return PHYLO_SPACE
    if name == "domestication":
        from .domestication import DOMESTICATION_SPACE

        return DOMESTICATION_SPACE
    from .toy_epidemic import TOY_SPACE

    return TOY_SPACE


_BUILTIN_OPTIONS = {
    "bernoulli-oracle": {},
    "phylo": {"n_taxa": int, "seq_length": int},
    "domestication": {},
    "toy-epidemic": {"strategy": str, "metric": str, "threshold": float},
}


def shipped_config_path(name: str) -> Path:
    """Path of a config shipped with the package (``name`` without ``.json``)."""
    if name not in SHIPPED_CONFIGS:
        raise ContractViolation(f"no shipped config {name!r}; known: {', '.join(SHIPPED_CONFIGS)}")
    return Path(str(resources.files("simexplore") / "configs" / f"{name}.json"))


def load_config_file(path) -> dict:
    """Read a config; a bare shipped-config name is accepted in place of a path."""
    p = Path(path)
    if not p.exists() and str(path) in SHIPPED_CONFIGS:
        p = shipped_config_path(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config {str(path)!r}: {exc.strerror or exc}"]) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from None
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a JSON object"])
    return doc


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``dotted.key=json-value`` overrides (a plain string if not JSON)."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError([f"override {item!r} is not of the form key=value"])
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value
    return doc


def config_hash(doc: dict) -> str:
    """Short SHA-256 of the canonical config, ignoring the seed and description."""
    body = {k: v for k, v in doc.items() if k not in _HASH_EXCLUDED}
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


# validation -----------------------------------------------------------------

def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


class _Checker:
    def __init__(self):
        self.errors: list[str] = []

    def fail(self, where: str, msg: str) -> None:
        self.errors.append(f"{where}: {msg}")

    def keys(self, where: str, obj: dict, allowed) -> None:
        for k in obj:
            if k not in allowed:
                self.fail(where, f"unknown key {k!r} (allowed: {', '.join(sorted(allowed))})")

    def int_field(self, where, obj, key, minimum=None, required=False):
        if key not in obj:
            if required:
                self.fail(where, f"missing required field {key!r}")
            return None
        v = obj[key]
        if not _is_int(v):
            self.fail(f"{where}.{key}", f"must be an integer, got {v!r}")
            return None
        if minimum is not None and v < minimum:
            self.fail(f"{where}.{key}", f"must be >= {minimum}, got {v}")
            return None
        return v

    def obj_field(self, where, obj, key, required=False):
        if key not in obj:
            if required:
                self.fail(where, f"missing required field {key!r}")
            return None
        v = obj[key]
        if not isinstance(v, dict):
            self.fail(f"{where}.{key}", "must be an object")
            return None
        return v


def _check_external(c: _Checker, where: str, ext) -> None:
    if not isinstance(ext, dict):
        c.fail(where, "must be an object")
        return
    c.keys(where, ext, {"executable", "fixed_args", "param_flags", "outcome_rule", "timeout"})
    exe = ext.get("executable")
    if isinstance(exe, str):
        exe = [exe]
    if not (isinstance(exe, list) and exe and all(isinstance(e, str) and e for e in exe)):
        c.fail(f"{where}.executable", "must be a non-empty string or list of strings")
    fixed = ext.get("fixed_args", [])
    if not (isinstance(fixed, list) and all(isinstance(a, str) for a in fixed)):
        c.fail(f"{where}.fixed_args", "must be a list of strings")
    flags = ext.get("param_flags", {})
    if not (isinstance(flags, dict) and all(isinstance(v, str) and v for v in flags.values())):
        c.fail(f"{where}.param_flags", "must map parameter names to non-empty strings")
    if "timeout" in ext and not (_is_num(ext["timeout"]) and ext["timeout"] > 0):
        c.fail(f"{where}.timeout", "must be a positive number")
    rule = ext.get("outcome_rule")
    if rule is not None:
        if not isinstance(rule, dict):
            c.fail(f"{where}.outcome_rule", "must be an object")
        else:
            c.keys(f"{where}.outcome_rule", rule, {"metric", "comparison", "threshold"})
            if not isinstance(rule.get("metric"), str):
                c.fail(f"{where}.outcome_rule.metric", "must be a string")
            if rule.get("comparison") not in COMPARISONS:
                c.fail(f"{where}.outcome_rule.comparison", f"must be one of {sorted(COMPARISONS)}")
            if not _is_num(rule.get("threshold")):
                c.fail(f"{where}.outcome_rule.threshold", "must be a finite number")


def _check_simulator(c: _Checker, sim) -> str | None:
    """Validate the simulator block; returns the builtin name if any."""
    where = "simulator"
    if not isinstance(sim, dict):
        c.fail(where, "must be an object")
        return None
    kinds = [k for k in ("builtin", "external", "paired") if k in sim]
    if len(kinds) != 1:
        c.fail(where, "must contain exactly one of 'builtin', 'external', 'paired'")
        return None
    kind = kinds[0]
    if kind == "builtin":
        c.keys(where, sim, {"builtin", "options"})
        name = sim["builtin"]
        if name not in BUILTIN_SIMULATORS:
            c.fail(f"{where}.builtin", f"unknown simulator {name!r}; known: {', '.join(BUILTIN_SIMULATORS)}")
            return None
        opts = sim.get("options", {})
        if not isinstance(opts, dict):
            c.fail(f"{where}.options", "must be an object")
            return name
        allowed = _BUILTIN_OPTIONS[name]
        for k, v in opts.items():
            if k not in allowed:
                c.fail(f"{where}.options", f"unknown option {k!r} for {name}")
            elif allowed[k] is int and not (_is_int(v) and v >= 1):
                c.fail(f"{where}.options.{k}", "must be a positive integer")
            elif allowed[k] is float and not _is_num(v):
                c.fail(f"{where}.options.{k}", "must be a number")
            elif allowed[k] is str and not isinstance(v, str):
                c.fail(f"{where}.options.{k}", "must be a string")
        if name == "toy-epidemic":
            from .toy_epidemic import STRATEGIES

            if opts.get("strategy", "none") not in STRATEGIES:
                c.fail(f"{where}.options.strategy", f"must be one of {list(STRATEGIES)}")
            if opts.get("metric", "total") not in ("peak", "total"):
                c.fail(f"{where}.options.metric", "must be 'peak' or 'total'")
        if name == "phylo" and opts.get("n_taxa", 30) < 4:
            c.fail(f"{where}.options.n_taxa", "must be at least 4")
        return name
    if kind == "external":
        c.keys(where, sim, {"external"})
        _check_external(c, f"{where}.external", sim["external"])
        return None
    c.keys(where, sim, {"paired"})
    pair = sim["paired"]
    if not isinstance(pair, dict):
        c.fail(f"{where}.paired", "must be an object")
        return None
    c.keys(f"{where}.paired", pair, {"a", "b", "metric", "ties_succeed"})
    toy_sides = True
    for side in ("a", "b"):
        s = pair.get(side)
        w = f"{where}.paired.{side}"
        if not isinstance(s, dict) or len(s) != 1 or next(iter(s)) not in ("toy", "external"):
            c.fail(w, "must be {'toy': strategy} or {'external': {...}}")
            continue
        if "toy" in s:
            from .toy_epidemic import STRATEGIES

            if s["toy"] not in STRATEGIES:
                c.fail(f"{w}.toy", f"must be one of {list(STRATEGIES)}")
        else:
            toy_sides = False
            _check_external(c, f"{w}.external", s["external"])
    if not isinstance(pair.get("metric"), str):
        c.fail(f"{where}.paired.metric", "must be a string")
    if "ties_succeed" in pair and not isinstance(pair["ties_succeed"], bool):
        c.fail(f"{where}.paired.ties_succeed", "must be true or false")
    return "toy-epidemic" if toy_sides else None


def _check_parameters(c: _Checker, params) -> list[str]:
    names: list[str] = []
    if not isinstance(params, list) or not params:
        c.fail("parameters", "must be a non-empty list")
        return names
    for i, p in enumerate(params):
        where = f"parameters[{i}]"
        if not isinstance(p, dict):
            c.fail(where, "must be an object")
            continue
        c.keys(where, p, {"name", "lower", "upper", "integer"})
        name = p.get("name")
        if not isinstance(name, str) or not name:
            c.fail(f"{where}.name", "must be a non-empty string")
        elif name in names:
            c.fail(f"{where}.name", f"duplicate parameter name {name!r}")
        else:
            names.append(name)
            where = f"parameters[{i}] ({name})"
        lo, hi = p.get("lower"), p.get("upper")
        if not _is_num(lo):
            c.fail(f"{where}.lower", "must be a finite number")
        if not _is_num(hi):
            c.fail(f"{where}.upper", "must be a finite number")
        if _is_num(lo) and _is_num(hi) and not lo < hi:
            c.fail(where, f"bound lower ({lo}) must be < upper ({hi})")
        integer = p.get("integer", False)
        if not isinstance(integer, bool):
            c.fail(f"{where}.integer", "must be true or false")
        elif integer and any(_is_num(v) and float(v) != int(v) for v in (lo, hi)):
            c.fail(where, "integer parameter needs integer bounds")
    return names


def _check_grid(c: _Checker, where: str, grid, names: list[str], baseline: bool) -> None:
    allowed = {"counts", "midpoints", "coordinates", "fixed"}
    if baseline:
        allowed |= {"replicates", "with_run"}
    c.keys(where, grid, allowed)
    counts = grid.get("counts", 20)
    if isinstance(counts, dict):
        for k, v in counts.items():
            if names and k not in names:
                c.fail(f"{where}.counts", f"unknown parameter {k!r}")
            if not (_is_int(v) and v >= 1):
                c.fail(f"{where}.counts.{k}", "must be a positive integer")
    elif not (_is_int(counts) and counts >= 1):
        c.fail(f"{where}.counts", "must be a positive integer or an object of them")
    if "midpoints" in grid and not isinstance(grid["midpoints"], bool):
        c.fail(f"{where}.midpoints", "must be true or false")
    for key in ("coordinates", "fixed"):
        block = grid.get(key, {})
        if not isinstance(block, dict):
            c.fail(f"{where}.{key}", "must be an object")
            continue
        for k, v in block.items():
            if names and k not in names:
                c.fail(f"{where}.{key}", f"unknown parameter {k!r}")
            if key == "fixed" and not _is_num(v):
                c.fail(f"{where}.fixed.{k}", "must be a finite number")
            if key == "coordinates" and not (isinstance(v, list) and v and all(_is_num(x) for x in v)):
                c.fail(f"{where}.coordinates.{k}", "must be a non-empty list of numbers")
    overlap = set(grid.get("fixed", {}) or {}) & set(grid.get("coordinates", {}) or {})
    if isinstance(grid.get("fixed"), dict) and isinstance(grid.get("coordinates"), dict) and overlap:
        c.fail(where, f"parameters both fixed and gridded: {sorted(overlap)}")
    if baseline:
        c.int_field(where, grid, "replicates", minimum=1)
        if "with_run" in grid and not isinstance(grid["with_run"], bool):
            c.fail(f"{where}.with_run", "must be true or false")


def validate_config(doc) -> list[str]:
    """Every problem with a config document (an empty list means valid)."""
    c = _Checker()
    if not isinstance(doc, dict):
        return ["config must be a JSON object"]
    c.keys("config", doc, TOP_LEVEL_KEYS)
    if "name" in doc and not isinstance(doc["name"], str):
        c.fail("name", "must be a string")
    if "seed" in doc and not (_is_int(doc["seed"]) and doc["seed"] >= 0):
        c.fail("seed", "must be a non-negative integer")

    builtin = None
    if "simulator" not in doc:
        c.fail("config", "missing required field 'simulator'")
    else:
        builtin = _check_simulator(c, doc["simulator"])

    if "parameters" in doc:
        names = _check_parameters(c, doc["parameters"])
        if builtin is not None and builtin in BUILTIN_SIMULATORS:
            expected = _builtin_space(builtin).names
            if names and names != expected:
                c.fail("parameters", f"builtin {builtin!r} takes parameters {expected}, got {names}")
    elif builtin is not None:
        names = _builtin_space(builtin).names
    else:
        names = []
        if isinstance(doc.get("simulator"), dict) and "builtin" not in doc["simulator"]:
            c.fail("config", "missing required field 'parameters' (needed for external simulators)")

    sim = doc.get("simulator")
    if isinstance(sim, dict) and "external" in sim and isinstance(sim["external"], dict):
        flags = sim["external"].get("param_flags", {})
        if isinstance(flags, dict) and names:
            for k in flags:
                if k not in names:
                    c.fail("simulator.external.param_flags", f"unknown parameter {k!r}")

    chain = c.obj_field("config", doc, "chain", required=True)
    if chain is not None:
        c.keys("chain", chain, {"n_steps", "thin", "burn_in", "init_budget", "proposal"})
        n_steps = c.int_field("chain", chain, "n_steps", minimum=0, required=True)
        thin = c.int_field("chain", chain, "thin", minimum=1)
        burn = c.int_field("chain", chain, "burn_in", minimum=0)
        c.int_field("chain", chain, "init_budget", minimum=1)
        if n_steps is not None and burn is not None and n_steps > 0 and burn >= n_steps:
            c.fail("chain.burn_in", f"must be smaller than n_steps ({burn} >= {n_steps})")
        if n_steps is not None and thin is not None and thin > max(n_steps, 1):
            c.fail("chain.thin", f"must not exceed n_steps ({thin} > {n_steps})")
        prop = chain.get("proposal", {"fraction": 0.1})
        if not isinstance(prop, dict):
            c.fail("chain.proposal", "must be an object")
        else:
            c.keys("chain.proposal", prop, {"fraction", "half_widths"})
            if "fraction" in prop and "half_widths" in prop:
                c.fail("chain.proposal", "give either 'fraction' or 'half_widths', not both")
            if "fraction" in prop and not (_is_num(prop["fraction"]) and prop["fraction"] >= 0):
                c.fail("chain.proposal.fraction", "must be a non-negative number")
            hw = prop.get("half_widths")
            if hw is not None:
                if not isinstance(hw, dict):
                    c.fail("chain.proposal.half_widths", "must map parameter names to numbers")
                else:
                    for k, v in hw.items():
                        if names and k not in names:
                            c.fail("chain.proposal.half_widths", f"unknown parameter {k!r}")
                        if not (_is_num(v) and v >= 0):
                            c.fail(f"chain.proposal.half_widths.{k}", "must be a non-negative number")
                    missing = [n for n in names if n not in hw]
                    if missing:
                        c.fail("chain.proposal.half_widths", f"missing parameters {missing}")

    kde = c.obj_field("config", doc, "kde")
    if kde is not None:
        c.keys("kde", kde, {"boundary", "allow_degenerate"})
        if kde.get("boundary", "reflect") not in BOUNDARY_RULES:
            c.fail("kde.boundary", f"must be one of {list(BOUNDARY_RULES)}")
        if "allow_degenerate" in kde and not isinstance(kde["allow_degenerate"], bool):
            c.fail("kde.allow_degenerate", "must be true or false")

    imp = c.obj_field("config", doc, "importance", required=True)
    if imp is not None:
        c.keys("importance", imp, {"M"})
        c.int_field("importance", imp, "M", minimum=1, required=True)

    surf = c.obj_field("config", doc, "surface")
    if surf is not None:
        _check_grid(c, "surface", surf, names, baseline=False)
    if "complement" in doc and not isinstance(doc["complement"], bool):
        c.fail("complement", "must be true or false")
    base = doc.get("grid_baseline")
    if base is not None:
        if not isinstance(base, dict):
            c.fail("grid_baseline", "must be an object or null")
        else:
            _check_grid(c, "grid_baseline", base, names, baseline=True)
    return c.errors


# construction ---------------------------------------------------------------

@dataclass
class Experiment:
    """A validated config turned into runnable objects."""

    doc: dict
    name: str
    seed: int
    space: ParameterSpace
    simulator: Simulator
    chain: ChainConfig
    kernel: UniformWindowKernel
    boundary: str
    allow_degenerate: bool
    M: int
    surface: GridSpec
    complement: bool
    baseline: GridSpec | None
    baseline_with_run: bool
    hash: str

    @property
    def prior(self) -> UniformBoxPrior:
        return UniformBoxPrior(self.space)


def _make_external(block: dict) -> ExternalSimSpec:
    rule = block.get("outcome_rule")
    return ExternalSimSpec(
        executable=tuple([block["executable"]] if isinstance(block["executable"], str) else block["executable"]),
        fixed_args=tuple(block.get("fixed_args", [])),
        param_flags=dict(block.get("param_flags", {})),
        outcome_rule=OutcomeRule(**rule) if rule else None,
        timeout=float(block.get("timeout", 600.0)),
    )


def _make_simulator(sim: dict, space: ParameterSpace) -> Simulator:
    if "builtin" in sim:
        name, opts = sim["builtin"], sim.get("options", {})
        if name == "bernoulli-oracle":
            return BernoulliOracle()
        if name == "phylo":
            from .phylo import PhyloSimulator

            return PhyloSimulator(**opts)
        if name == "domestication":
            from .domestication import DomesticationSimulator

            return DomesticationSimulator()
        from .toy_epidemic import ToyEpidemicSimulator

        return ToyEpidemicSimulator(**opts)
    if "external" in sim:
        return ExternalSimulator(_make_external(sim["external"]), space)
    pair = sim["paired"]
    sides = []
    for key in ("a", "b"):
        s = pair[key]
        sides.append(toy_side(s["toy"], pair["metric"]) if "toy" in s else external_side(_make_external(s["external"]), space))
    return PairedSimulator(PairedComparisonSpec(sides[0], sides[1], pair["metric"], pair.get("ties_succeed", True)))


def _grid_spec(block: dict, baseline: bool) -> GridSpec:
    return GridSpec(
        counts=block.get("counts", 20),
        midpoints=block.get("midpoints", True),
        replicates=block.get("replicates", 1) if baseline else 1,
        coordinates={k: tuple(float(x) for x in v) for k, v in block.get("coordinates", {}).items()},
        fixed={k: float(v) for k, v in block.get("fixed", {}).items()},
    )


def build_experiment(doc: dict, seed: int | None = None) -> Experiment:
    """Validate and construct; raises :class:`ConfigError` listing every problem."""
    errors = validate_config(doc)
    if errors:
        raise ConfigError(errors)
    sim_block = doc["simulator"]
    if "parameters" in doc:
        space = ParameterSpace.from_bounds(
            [(p["name"], p["lower"], p["upper"]) for p in doc["parameters"]],
            integer=[p["name"] for p in doc["parameters"] if p.get("integer")],
        )
    else:
        space = _builtin_space(sim_block["builtin"] if "builtin" in sim_block else "toy-epidemic")
    seed = int(doc.get("seed", 0) if seed is None else seed)
    ch = doc["chain"]
    prop = ch.get("proposal", {"fraction": 0.1})
    if "half_widths" in prop:
        kernel = UniformWindowKernel(tuple(float(prop["half_widths"][n]) for n in space.names))
    else:
        kernel = UniformWindowKernel.fraction_of(space, float(prop.get("fraction", 0.1)))
    try:
        chain = ChainConfig(
            n_steps=ch["n_steps"], thin=ch.get("thin", 1), burn_in=ch.get("burn_in"),
            master_seed=seed, init_budget=ch.get("init_budget", 10_000),
        )
    except ContractViolation as exc:
        raise ConfigError([f"chain: {exc}"]) from None
    kde = doc.get("kde", {})
    base = doc.get("grid_baseline")
    try:
        simulator = _make_simulator(sim_block, space)
    except ContractViolation as exc:
        raise ConfigError([f"simulator: {exc}"]) from None
    return Experiment(
        doc=doc,
        name=doc.get("name", "experiment"),
        seed=seed,
        space=space,
        simulator=simulator,
        chain=chain,
        kernel=kernel,
        boundary=kde.get("boundary", "reflect"),
        allow_degenerate=kde.get("allow_degenerate", False),
        M=doc["importance"]["M"],
        surface=_grid_spec(doc.get("surface", {}), baseline=False),
        complement=doc.get("complement", False),
        baseline=_grid_spec(base, baseline=True) if base else None,
        baseline_with_run=bool(base and base.get("with_run", False)),
        hash=config_hash(doc),
    )
