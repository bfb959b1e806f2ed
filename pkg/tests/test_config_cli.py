import json
import sys
import textwrap
from pathlib import Path

import pytest

from simexplore.cli import main
from simexplore.config import (
    SHIPPED_CONFIGS,
    apply_overrides,
    build_experiment,
    config_hash,
    load_config_file,
    validate_config,
)
from simexplore.errors import ConfigError

FAST = ["--set", "chain.n_steps=600", "--set", "chain.thin=5", "--set", "chain.burn_in=100",
        "--set", "importance.M=100", "--set", "grid_baseline.replicates=10"]


def bernoulli_doc(**changes):
    doc = load_config_file("bernoulli-oracle")
    for k, v in changes.items():
        doc[k] = v
    return doc


def data_files(out: Path) -> dict[str, bytes]:
    return {str(p.relative_to(out)): p.read_bytes() for p in sorted(out.rglob("*"))
            if p.is_file() and p.name != "run_info.json" and "plots" not in p.parts}


@pytest.mark.parametrize("name", SHIPPED_CONFIGS)
def test_shipped_configs_validate(name):
    doc = load_config_file(name)
    assert validate_config(doc) == []
    exp = build_experiment(doc)
    assert exp.name == name
    assert main(["validate", name]) == 0


def test_bad_bounds_are_named():
    doc = bernoulli_doc(parameters=[{"name": "theta", "lower": 1.0, "upper": 0.5}])
    errors = validate_config(doc)
    assert any("parameters[0] (theta)" in e and "lower" in e for e in errors)


def test_unknown_builtin_lists_known_names():
    doc = bernoulli_doc(simulator={"builtin": "weather"})
    errors = validate_config(doc)
    assert len(errors) == 1
    assert "weather" in errors[0] and "bernoulli-oracle" in errors[0] and "toy-epidemic" in errors[0]


def test_errors_are_collected_not_first_only():
    doc = bernoulli_doc(chain={"n_steps": -1, "thin": 0, "proposal": {"fraction": 0.5}}, colour="red")
    errors = validate_config(doc)
    assert any("colour" in e for e in errors)
    assert any("chain.n_steps" in e for e in errors)
    assert any("chain.thin" in e for e in errors)
    with pytest.raises(ConfigError):
        build_experiment(doc)


def test_chain_length_conflicts_are_config_errors(tmp_path):
    doc = apply_overrides(load_config_file("bernoulli-oracle"), ["chain.n_steps=2000"])
    errors = validate_config(doc)
    assert any(e.startswith("chain.burn_in") for e in errors)
    doc = apply_overrides(doc, ["chain.burn_in=0", "chain.thin=5000"])
    assert any(e.startswith("chain.thin") for e in validate_config(doc))
    assert main(["run", "bernoulli-oracle", "--out", str(tmp_path), "--set", "chain.n_steps=2000"]) == 2


def test_overrides_and_hash():
    doc = load_config_file("bernoulli-oracle")
    doc2 = apply_overrides(doc, ["chain.n_steps=100", "name=abc"])
    assert doc2["chain"]["n_steps"] == 100 and doc2["name"] == "abc"
    assert doc["chain"]["n_steps"] == 20000
    assert config_hash(doc) == config_hash({**doc, "seed": 5, "description": "x"})
    assert config_hash(doc) != config_hash(doc2)
    with pytest.raises(ConfigError):
        apply_overrides(doc, ["novalue"])


def test_cli_exit_code_for_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(bernoulli_doc(simulator={"builtin": "weather"})))
    assert main(["validate", str(bad)]) == 2
    assert "weather" in capsys.readouterr().err
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["validate", str(tmp_path / "broken.json")]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_run_writes_stamped_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "bernoulli-oracle", "--out", str(out), "--seed", "7", *FAST]) == 0
    summary = json.loads(capsys.readouterr().out)
    h = summary["config_hash"]
    for name in ["trace.csv", "samples.csv", "kde_points.csv", "surface.csv", "grid.csv",
                 "complement/trace.csv", "complement/samples.csv"]:
        assert (out / name).read_text().startswith(f"# seed=7,config_hash={h}\n")
    for name in ["trace_meta.json", "kde.json", "marginal.json", "surface.json", "grid.json",
                 "complement/consistency.json"]:
        doc = json.loads((out / name).read_text())
        assert doc["seed"] == 7 and doc["config_hash"] == h
    assert not list(out.rglob("*.partial"))
    info = json.loads((out / "run_info.json").read_text())
    assert "elapsed_seconds" in info


def test_rerun_is_byte_identical_and_seed_sensitive(tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["run", "bernoulli-oracle", "--out", str(a), *FAST]) == 0
    assert main(["run", "bernoulli-oracle", "--out", str(b), "--workers", "2", *FAST]) == 0
    assert main(["run", "bernoulli-oracle", "--out", str(c), "--seed", "99", *FAST]) == 0
    assert data_files(a) == data_files(b)
    assert data_files(a)["samples.csv"] != data_files(c)["samples.csv"]


def test_failed_simulator_leaves_only_partial_files(tmp_path, capsys):
    exe = tmp_path / "crash.py"
    exe.write_text(textwrap.dedent("""
        import sys
        print("segfault-ish", file=sys.stderr)
        sys.exit(3)
    """))
    cfg = {
        "name": "crash",
        "seed": 1,
        "simulator": {"external": {"executable": [sys.executable, str(exe)]}},
        "parameters": [{"name": "x", "lower": 0, "upper": 1}],
        "chain": {"n_steps": 10, "thin": 1, "burn_in": 0, "proposal": {"fraction": 0.2}},
        "importance": {"M": 10},
    }
    path = tmp_path / "crash.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    assert main(["run", str(path), "--out", str(out)]) == 3
    assert "segfault-ish" in capsys.readouterr().err
    assert not [p for p in out.rglob("*") if p.is_file() and not p.name.endswith(".partial")]


def test_never_true_outcome_is_initialization_failure(tmp_path, capsys):
    exe = tmp_path / "never.py"
    exe.write_text('print("OUTCOME 0")\n')
    cfg = {
        "name": "never",
        "simulator": {"external": {"executable": [sys.executable, str(exe)]}},
        "parameters": [{"name": "x", "lower": 0, "upper": 1}],
        "chain": {"n_steps": 10, "thin": 1, "burn_in": 0, "init_budget": 3, "proposal": {"fraction": 0.2}},
        "importance": {"M": 10},
    }
    path = tmp_path / "never.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 3
    assert "budget 3" in capsys.readouterr().err


def test_degenerate_kde_is_a_numerical_failure(tmp_path):
    # a one-step chain retains a single sample, so no KDE can be fitted
    out = tmp_path / "o"
    args = ["run", "bernoulli-oracle", "--out", str(out), "--set", "chain.n_steps=1",
            "--set", "chain.thin=1", "--set", "chain.burn_in=0", "--set", "complement=false"]
    assert main(args) == 4


def test_grid_command(tmp_path):
    out = tmp_path / "g"
    assert main(["grid", "bernoulli-oracle", "--out", str(out), "--set", "grid_baseline.replicates=5"]) == 0
    assert (out / "grid.csv").exists() and not (out / "samples.csv").exists()


def test_plots_are_rendered_after_commit(tmp_path):
    pytest.importorskip("matplotlib")
    out = tmp_path / "p"
    assert main(["run", "bernoulli-oracle", "--out", str(out), "--plots", *FAST]) == 0
    assert {p.name for p in (out / "plots").iterdir()} == {"surface.png", "grid.png", "samples.png"}
