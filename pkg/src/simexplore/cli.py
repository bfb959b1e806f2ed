"""``explore``: run likelihood-free experiments from JSON configs.

    explore run <config> [--seed N] [--workers K] [--out DIR] [--set key=value ...] [--plots]
    explore validate <config>
    explore grid <config> [--seed N] [--workers K] [--out DIR] [--set key=value ...]

Exit codes: 0 success, 2 config error, 3 simulator error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .config import Experiment, apply_overrides, build_experiment, load_config_file, validate_config
from .density import fit_kde, write_kde
from .errors import (
    ConfigError,
    ContractViolation,
    DomainError,
    ExternalSimulatorError,
    InitializationError,
    KdeFitError,
)
from .estimator import consistency_gap, estimate_marginal, likelihood_grid, write_marginal_json
from .gridsearch import grid_estimate
from .parallel import set_default_workers
from .rng import RngStream
from .sampler import run_chain, trace_metadata, write_trace_csv
from .simulators import Negated
from .surface import LikelihoodSurface

log = logging.getLogger("simexplore")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATOR = 3
EXIT_NUMERICAL = 4


class StageError(Exception):
    def __init__(self, stage: str, exc: Exception, code: int):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage
        self.code = code


class ArtifactWriter:
    """Writes artifacts as ``<name>.partial`` and renames them all on success."""

    def __init__(self, out: Path, seed: int, config_hash: str):
        self.out = out
        self.seed = seed
        self.config_hash = config_hash
        self.written: list[Path] = []
        out.mkdir(parents=True, exist_ok=True)

    @property
    def comment(self) -> str:
        return f"seed={self.seed},config_hash={self.config_hash}"

    @property
    def stamp(self) -> dict:
        return {"seed": self.seed, "config_hash": self.config_hash}

    def path(self, name: str) -> Path:
        final = self.out / name
        final.parent.mkdir(parents=True, exist_ok=True)
        if final.exists():
            final.unlink()
        self.written.append(final)
        return final.with_name(final.name + ".partial")

    def json(self, name: str, doc: dict) -> None:
        with open(self.path(name), "w") as fh:
            json.dump({**doc, **self.stamp}, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def csv_rows(self, name: str, header: list[str], rows) -> None:
        with open(self.path(name), "w") as fh:
            fh.write(f"# {self.comment}\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    def commit(self) -> None:
        for final in self.written:
            partial = final.with_name(final.name + ".partial")
            if partial.exists():
                os.replace(partial, final)


def _stage(name: str, func, *args, **kwargs):
    log.info("stage %s", name)
    try:
        return func(*args, **kwargs)
    except ExternalSimulatorError as exc:
        raise StageError(name, exc, EXIT_SIMULATOR) from exc
    except InitializationError as exc:
        raise StageError(name, exc, EXIT_SIMULATOR) from exc
    except (KdeFitError, DomainError, FloatingPointError, ContractViolation) as exc:
        raise StageError(name, exc, EXIT_NUMERICAL) from exc


def _write_chain(w: ArtifactWriter, exp: Experiment, trace, prefix: str) -> np.ndarray:
    write_trace_csv(trace, w.path(f"{prefix}trace.csv"), w.comment)
    w.json(f"{prefix}trace_meta.json", trace_metadata(trace))
    samples = trace.retained
    w.csv_rows(f"{prefix}samples.csv", exp.space.names, samples)
    return samples


def _chain_kde_estimate(w: ArtifactWriter, exp: Experiment, sim, rng: RngStream, prefix: str, label: str):
    trace = _stage(f"{label}chain", run_chain, sim, exp.prior, exp.kernel, exp.space, exp.chain, rng=rng.child("chain"))
    samples = _write_chain(w, exp, trace, prefix)
    kde = _stage(f"{label}kde", fit_kde, samples, exp.space, exp.boundary, exp.allow_degenerate)
    write_kde(kde, w.path(f"{prefix}kde_points.csv"), w.path(f"{prefix}kde.json"), w.stamp, w.comment)
    est = _stage(f"{label}importance", estimate_marginal, kde, exp.prior, sim, exp.M, rng.child("importance"))
    write_marginal_json(est, w.path(f"{prefix}marginal.json"), w.stamp)
    return trace, kde, est


def _write_surface(w: ArtifactWriter, surface: LikelihoodSurface, name: str) -> None:
    if not np.all(np.isfinite(surface.values)):
        raise StageError(name, FloatingPointError("surface contains non-finite values"), EXIT_NUMERICAL)
    surface.write_csv(w.path(f"{name}.csv"), w.comment)
    surface.write_json(w.path(f"{name}.json"), w.stamp)


def run_experiment(exp: Experiment, out: Path, workers: int = 1, plots: bool = False) -> dict:
    """Run chain, KDE, importance sampling and surface; returns a summary dict."""
    set_default_workers(workers)
    started = time.time()
    w = ArtifactWriter(out, exp.seed, exp.hash)
    root = RngStream(exp.seed)
    summary: dict = {"name": exp.name, **w.stamp}

    trace, kde, est = _chain_kde_estimate(w, exp, exp.simulator, root, "", "")
    summary.update(p_hat=est.p_hat, std_error=est.std_error, M=est.M, n_samples=int(len(trace.retained)))
    surface = _stage("surface", likelihood_grid, kde, exp.prior, est, exp.surface)
    _write_surface(w, surface, "surface")
    summary["clipped_points"] = surface.clipped_count

    if exp.complement:
        comp_rng = root.child("complement")
        try:
            _, _, est_rc = _chain_kde_estimate(w, exp, Negated(exp.simulator), comp_rng, "complement/", "complement-")
        except StageError as exc:
            if not isinstance(exc.__cause__, InitializationError):
                raise
            log.warning("complement outcome never held; its probability counts as 0")
            est_rc = None
        gap = consistency_gap(est, est_rc)
        w.json("complement/consistency.json", {
            "p_hat": est.p_hat,
            "p_hat_complement": est_rc.p_hat if est_rc is not None else 0.0,
            "gap": gap,
        })
        summary["complement_gap"] = gap

    if exp.baseline is not None and exp.baseline_with_run:
        grid = _stage("grid", grid_estimate, exp.simulator, exp.space, exp.baseline, root.child("grid"))
        _write_surface(w, grid, "grid")

    w.commit()
    if plots:
        from .plots import render_run

        try:
            summary["plots"] = [str(p) for p in _stage("plots", render_run, out)]
        except ImportError as exc:
            log.warning("skipping plots: %s", exc)
    with open(out / "run_info.json", "w") as fh:
        json.dump({**summary, "workers": workers, "elapsed_seconds": round(time.time() - started, 3),
                   "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S")}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def run_grid_only(exp: Experiment, out: Path, workers: int = 1) -> dict:
    if exp.baseline is None:
        raise ConfigError(["grid_baseline: required by 'explore grid' but missing from the config"])
    set_default_workers(workers)
    w = ArtifactWriter(out, exp.seed, exp.hash)
    grid = _stage("grid", grid_estimate, exp.simulator, exp.space, exp.baseline, RngStream(exp.seed).child("grid"))
    _write_surface(w, grid, "grid")
    w.commit()
    return {"name": exp.name, **w.stamp, "grid_points": int(grid.values.size)}


def _load(args) -> Experiment:
    doc = apply_overrides(load_config_file(args.config), getattr(args, "set", None) or [])
    return build_experiment(doc, seed=getattr(args, "seed", None))


def _out_dir(args, exp: Experiment) -> Path:
    return Path(args.out) if args.out else Path("runs") / f"{exp.name}-seed{exp.seed}"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="explore", description="Likelihood-free exploration of simulation experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, run=True):
        p.add_argument("config", help="config JSON path or shipped config name")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field (dotted key, JSON value)")
        if run:
            p.add_argument("--seed", type=int, help="master seed (overrides the config)")
            p.add_argument("--workers", type=int, default=1, help="worker processes")
            p.add_argument("--out", help="output directory")

    p_run = sub.add_parser("run", help="run the full pipeline")
    common(p_run)
    p_run.add_argument("--plots", action="store_true", help="also render PNG figures (needs matplotlib)")
    common(sub.add_parser("validate", help="check a config without running it"), run=False)
    common(sub.add_parser("grid", help="run only the grid baseline"))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            doc = apply_overrides(load_config_file(args.config), args.set or [])
            errors = validate_config(doc)
            if errors:
                raise ConfigError(errors)
            print(f"{args.config}: ok")
            return EXIT_OK
        exp = _load(args)
        out = _out_dir(args, exp)
        if args.command == "run":
            summary = run_experiment(exp, out, args.workers, args.plots)
        else:
            summary = run_grid_only(exp, out, args.workers)
    except ConfigError as exc:
        print("config error:", file=sys.stderr)
        for err in exc.errors:
            print(f"  {err}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    print(json.dumps({**summary, "out": str(out)}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
