import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from trajsr import metrics
from trajsr.cli import main
from trajsr.config import load_config
from trajsr.errors import ConfigError
from trajsr.trajectory import load_jsonl


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture()
def graph_file(tmp_path, capsys):
    code, _, _ = run(capsys, "grid", "--rows", 8, "--cols", 8, "--out", tmp_path)
    assert code == 0
    return tmp_path / "graph.json"


def test_gen_is_reproducible(tmp_path, graph_file, capsys):
    outs = []
    for name in ("a", "b"):
        code, out, _ = run(capsys, "gen", "--graph", graph_file, "--n-traj", 10, "--seed", 5,
                           "--out", tmp_path / name)
        assert code == 0 and "generated 10 trajectories" in out
        outs.append((tmp_path / name / "trajectories.jsonl").read_bytes())
    assert outs[0] == outs[1]
    trajs = load_jsonl(tmp_path / "a" / "trajectories.jsonl")
    assert len({t.id for t in trajs}) == 10
    parts = [load_jsonl(tmp_path / "a" / f"{p}.jsonl") for p in ("train", "val", "test")]
    assert sorted(t.id for p in parts for t in p) == sorted(t.id for t in trajs)


def test_missing_graph_is_one_line_error(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--graph", tmp_path / "missing.json", "--out", tmp_path)
    assert code == 1
    assert err.count("\n") == 1 and err.startswith("error: load:") and "missing.json" in err


@pytest.mark.parametrize("argv", [["degrade"], ["nonsense-command"], ["gen", "--n-traj", "many"]])
def test_usage_errors_exit_one(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1
    err = capsys.readouterr().err
    assert err.startswith("error: usage:") and err.count("\n") == 1


def test_bad_thread_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("TRAJSR_THREADS", "0")
    code, _, err = run(capsys, "grid", "--out", tmp_path)
    assert code == 1 and "TRAJSR_THREADS" in err


@pytest.fixture()
def dataset(tmp_path, graph_file, capsys):
    code, _, _ = run(capsys, "gen", "--graph", graph_file, "--n-traj", 12, "--seed", 3, "--out", tmp_path)
    assert code == 0
    return tmp_path / "trajectories.jsonl"


def test_degrade_modes(tmp_path, graph_file, dataset, capsys):
    orig = load_jsonl(dataset)
    common = ["--graph", graph_file, "--out", tmp_path]
    assert run(capsys, "degrade", dataset, "--level", 7, *common)[0] == 0
    hexed = tmp_path / "trajectories.hex.jsonl"
    once = load_jsonl(hexed)
    assert [len(t) for t in once] == [len(t) for t in orig]
    assert run(capsys, "degrade", hexed, "--level", 7, *common)[0] == 0
    twice = load_jsonl(tmp_path / "trajectories.hex.hex.jsonl")
    for a, b in zip(once, twice):
        assert np.max(np.abs(a.lat - b.lat)) < 1e-9 and np.max(np.abs(a.lon - b.lon)) < 1e-9

    assert run(capsys, "degrade", dataset, "--kind", "noise", "--sigma-m", 0, *common)[0] == 0
    for a, b in zip(orig, load_jsonl(tmp_path / "trajectories.noise.jsonl")):
        assert a == b

    assert run(capsys, "degrade", dataset, "--kind", "round", "--decimals", 3, *common)[0] == 0
    for a, b in zip(orig, load_jsonl(tmp_path / "trajectories.round.jsonl")):
        assert np.max(np.abs(a.lat - b.lat)) <= 5e-4 + 1e-12 and np.array_equal(a.t, b.t)


def test_hex_degrade_needs_graph(tmp_path, dataset, capsys):
    code, _, err = run(capsys, "degrade", dataset, "--out", tmp_path)
    assert code == 1 and err.startswith("error: config:")


def test_eval_identity_and_report(tmp_path, dataset, capsys):
    code, _, _ = run(capsys, "eval", "--reference", dataset, "--candidate", f"same={dataset}",
                     "--out", tmp_path)
    assert code == 0
    doc = json.loads((tmp_path / "eval.json").read_text())
    assert doc[0]["label"] == "same" and doc[0]["mean_km"] == 0.0
    assert (tmp_path / "eval.csv").read_text().splitlines()[1] == "same,0.000000,0.000000,0.000000,12"

    code, out, _ = run(capsys, "report", tmp_path / "eval.json", "--out", tmp_path / "rep",
                       "--original", dataset, "--degraded", dataset)
    assert code == 0 and "| same | 0.000 km |" in out
    for name in ("histogram.svg", "overlay.svg"):
        root = ET.fromstring((tmp_path / "rep" / name).read_text())
        assert root.tag.endswith("svg")


def test_report_table_fixture(tmp_path, capsys):
    reps = [metrics.summarize([v], lbl) for lbl, v in
            (("LSTM", 0.498), ("Map matching trajectory", 0.632), ("Proposed system", 0.198))]
    path = tmp_path / "fixture.json"
    path.write_text(json.dumps([r.to_dict() for r in reps]))
    code, _, _ = run(capsys, "report", path, "--out", tmp_path)
    assert code == 0
    assert (tmp_path / "table.md").read_text() == (
        "| Trajectory | Distance |\n|---|---|\n| LSTM | 0.498 km |\n"
        "| Map matching trajectory | 0.632 km |\n| Proposed system | 0.198 km |\n")
    svg = ET.fromstring((tmp_path / "histogram.svg").read_text())
    bars = [e for e in svg.iter() if e.get("class") == "bar"]
    assert len(bars) == 3 * (len(reps[0].bin_edges_km) - 1)


def test_eval_rejects_unpaired(tmp_path, dataset, capsys):
    other = tmp_path / "other.jsonl"
    other.write_text(dataset.read_text().replace('"traj0', '"zz0'))
    code, _, err = run(capsys, "eval", "--reference", dataset, "--candidate", f"x={other}", "--out", tmp_path)
    assert code == 1 and "no reference counterpart" in err


def test_pipeline_end_to_end(tmp_path, graph_file, capsys):
    g = ["--graph", graph_file, "--out", tmp_path, "--edge-m", 500]
    assert run(capsys, "gen", "--graph", graph_file, "--n-traj", 12, "--out", tmp_path)[0] == 0
    for split in ("train", "test"):
        assert run(capsys, "degrade", tmp_path / f"{split}.jsonl", *g)[0] == 0
    code, out, _ = run(capsys, "train", "--degraded", tmp_path / "train.hex.jsonl",
                       "--original", tmp_path / "train.jsonl", "--epochs", 2, *g)
    assert code == 0 and "for 2 epochs" in out
    code, _, _ = run(capsys, "reconstruct", tmp_path / "test.hex.jsonl", "--checkpoint", tmp_path / "model.ckpt",
                     "--graph", graph_file, "--out", tmp_path)
    assert code == 0
    assert run(capsys, "mapmatch", tmp_path / "test.hex.jsonl", *g)[0] == 0
    code, out, _ = run(capsys, "eval", "--reference", tmp_path / "test.jsonl",
                       "--candidate", f"Map matching trajectory={tmp_path / 'test.hex.matched.jsonl'}",
                       "--candidate", f"Proposed system={tmp_path / 'test.hex.reconstructed.jsonl'}",
                       "--out", tmp_path)
    assert code == 0 and "Proposed system: mean" in out
    rec = load_jsonl(tmp_path / "test.hex.reconstructed.jsonl")
    ref = {t.id: t for t in load_jsonl(tmp_path / "test.jsonl")}
    for r in rec:
        assert len(r) == len(ref[r.id]) and np.array_equal(r.t, ref[r.id].t)


def test_config_file_and_override_precedence(tmp_path, graph_file, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('seed = 11\n[paths]\ngraph = "graph.json"\nout_dir = "fromfile"\n'
                   '[gen]\nn_traj = 4\n[degrade]\nkind = "round"\ndecimals = 2\n')
    loaded = load_config(cfg)
    assert loaded.graph == graph_file and loaded.out_dir == tmp_path / "fromfile" and loaded.seed == 11

    assert run(capsys, "gen", "--config", cfg)[0] == 0
    assert len(load_jsonl(tmp_path / "fromfile" / "trajectories.jsonl")) == 4
    assert run(capsys, "gen", "--config", cfg, "--n-traj", 6, "--out", tmp_path / "flag")[0] == 0
    assert len(load_jsonl(tmp_path / "flag" / "trajectories.jsonl")) == 6
    # same seed from the file, different output directory: identical data
    assert run(capsys, "gen", "--config", cfg, "--n-traj", 4, "--out", tmp_path / "same")[0] == 0
    assert ((tmp_path / "same" / "trajectories.jsonl").read_bytes()
            == (tmp_path / "fromfile" / "trajectories.jsonl").read_bytes())

    src = tmp_path / "fromfile" / "trajectories.jsonl"
    assert run(capsys, "degrade", src, "--config", cfg)[0] == 0
    rounded = load_jsonl(tmp_path / "fromfile" / "trajectories.round.jsonl")
    assert all(np.allclose(t.lat, np.round(t.lat, 2), atol=1e-12) for t in rounded)


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[gen]\nn_trajectories = 5\n")
    with pytest.raises(ConfigError, match="n_trajectories"):
        load_config(cfg)
    code, _, err = run(capsys, "grid", "--config", cfg)
    assert code == 1 and err.startswith("error: config:")
    cfg.write_text('[degrade]\nkind = "blur"\n')
    assert run(capsys, "grid", "--config", cfg)[0] == 1
