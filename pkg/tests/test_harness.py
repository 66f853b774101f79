import csv
import json
from pathlib import Path

import numpy as np
import pytest

from ddlqr.cli import main as cli_main
from ddlqr.exceptions import ConfigError
from ddlqr.harness import (SUMMARY_COLUMNS, load_config, parse_matrix,
                           resolve_config_path, run_experiment, summarize)

MINI_CFG = """\
[experiment]
name = mini
total_steps = 96
conv_tol = 1e-2

[system]
a = 1.01 0.01 0; 0.01 1.01 0.01; 0 0.01 1.01
b = 1 0 0; 0 1 0; 0 0 1

[cost]
q = 0.001 0 0; 0 0.001 0; 0 0 0.001
r = 1 0 0; 0 1 0; 0 0 1

[run:ipi_small]
method = ipi
tau = 4
episodes = 24
k1 = -1.5 0 0; 0 -1.0 0; 0 0 -0.5
dither = gaussian
dither_cov = 1 0 0; 0 1 0; 0 0 1
h0_scale = 0.01
seed = 1

[run:dpi_small]
method = dpi
tau = 16
episodes = 10
k1 = -1.5 0 0; 0 -1.0 0; 0 0 -0.5
dither_cov = 1 0 0; 0 1 0; 0 0 1
seed = 2

[run:mb]
method = model-based
k1 = -1.5 0 0; 0 -1.0 0; 0 0 -0.5
iters = 20
"""


def write_cfg(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_matrix():
    assert np.array_equal(parse_matrix("1 2; 3 4"), [[1, 2], [3, 4]])
    assert np.array_equal(parse_matrix("1, 2.5"), [[1.0, 2.5]])
    with pytest.raises(ConfigError):
        parse_matrix("1 2; 3")


def test_bundled_configs_resolve_and_validate():
    for name in ("fig3.cfg", "scalar_sanity.cfg"):
        cfg = load_config(name)
        assert cfg.runs
    assert resolve_config_path("fig3.cfg").name == "fig3.cfg"
    with pytest.raises(ConfigError):
        resolve_config_path("no_such_config.cfg")


def test_unknown_keys_rejected(tmp_path):
    bad = MINI_CFG.replace("h0_scale = 0.01", "h0_scale = 0.01\nbogus = 1")
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, bad))


def test_missing_section_rejected(tmp_path):
    bad = MINI_CFG.replace("[cost]", "[cost_x]")
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, bad))


def test_bad_method_rejected(tmp_path):
    bad = MINI_CFG.replace("method = dpi", "method = dqn")
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, bad))


def test_seed_expansion(tmp_path):
    text = MINI_CFG.replace("seed = 1", "seeds = 1 2 3")
    cfg = load_config(write_cfg(tmp_path, text))
    ids = sorted(r.run_id for r in cfg.runs)
    assert "ipi_small-s1" in ids and "ipi_small-s3" in ids
    assert len(cfg.runs) == 5


def test_empty_sweep_manifest(tmp_path):
    text = MINI_CFG.split("[run:ipi_small]")[0]
    path = write_cfg(tmp_path, text, "empty.cfg")
    manifest_path = run_experiment(path, output_root=tmp_path / "out")
    manifest = json.loads(Path(manifest_path).read_text())
    assert manifest["runs"] == []


def test_run_and_summary_schema(tmp_path):
    path = write_cfg(tmp_path, MINI_CFG)
    manifest_path = run_experiment(path, output_root=tmp_path / "out")
    out_dir = Path(manifest_path).parent
    with open(out_dir / "summary.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == SUMMARY_COLUMNS
        rows = {r["run_id"]: r for r in reader}
    assert set(rows) == {"ipi_small", "dpi_small", "mb"}
    assert rows["ipi_small"]["status"] == "ok"
    assert rows["dpi_small"]["status"] == "ok"
    assert rows["mb"]["status"] == "ok"
    # identification columns stay empty for the model-based run
    assert rows["mb"]["delta_theta_upper_final"] == ""
    assert rows["mb"]["persistency_verdict"] == ""
    assert rows["ipi_small"]["bounds_dominate"] == "yes"
    assert float(rows["dpi_small"]["final_err_K"]) <= 1e-6
    # method trace rows are schema-complete
    for rid in rows:
        trace_file = out_dir / f"trace_{rid}.csv"
        with open(trace_file, newline="") as fh:
            for row in csv.reader(fh):
                assert row and all(v != "" for v in row)


def test_determinism_byte_identical(tmp_path):
    path = write_cfg(tmp_path, MINI_CFG)
    m1 = run_experiment(path, output_root=tmp_path / "o1")
    m2 = run_experiment(path, output_root=tmp_path / "o2")
    d1, d2 = Path(m1).parent, Path(m2).parent
    names = sorted(p.name for p in d1.iterdir())
    assert names == sorted(p.name for p in d2.iterdir())
    for name in names:
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


def test_failed_run_recorded_not_fatal(tmp_path):
    text = MINI_CFG.replace("tau = 16", "tau = 14")
    path = write_cfg(tmp_path, text)
    manifest_path = run_experiment(path, output_root=tmp_path / "out")
    manifest = json.loads(Path(manifest_path).read_text())
    status = {r["id"]: r["status"] for r in manifest["runs"]}
    assert status["ipi_small"] == "ok"
    assert status["dpi_small"].startswith("underdetermined:improvement")
    assert cli_main(["run", str(path), "--output-root",
                     str(tmp_path / "cli_out")]) == 3


def test_summarize_output(tmp_path, capsys):
    path = write_cfg(tmp_path, MINI_CFG)
    manifest_path = run_experiment(path, output_root=tmp_path / "out")
    text = summarize(manifest_path)
    assert "run_id" in text and "dpi_small" in text
    assert "equal_budget_steps=96" in text
    assert "ipi_episodes=24" in text and "dpi_episodes=6" in text
    assert (Path(manifest_path).parent / "comparison.csv").exists()
    # incomplete manifest rejected
    (Path(manifest_path).parent / "summary.csv").unlink()
    with pytest.raises(ConfigError):
        summarize(manifest_path)


def test_cli_exit_codes(tmp_path):
    ok_cfg = write_cfg(tmp_path, MINI_CFG)
    assert cli_main(["validate", str(ok_cfg)]) == 0
    bad_cfg = write_cfg(tmp_path, MINI_CFG.replace("method = ipi", "method = x"),
                        "bad.cfg")
    assert cli_main(["validate", str(bad_cfg)]) == 2
    assert cli_main(["summarize", str(tmp_path / "missing.json")]) == 2
    out = tmp_path / "cli_run"
    assert cli_main(["run", str(ok_cfg), "--output-root", str(out)]) == 0


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("DDLQR_OUTPUT_ROOT", str(tmp_path / "env_out"))
    path = write_cfg(tmp_path, MINI_CFG)
    manifest_path = run_experiment(path)
    assert str(manifest_path).startswith(str(tmp_path / "env_out"))
