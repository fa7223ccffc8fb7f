import json
import subprocess
import sys

import numpy as np
import pytest

from qwanneal.cli import main
from qwanneal.instance import load
from qwanneal.mps import MatrixProductState


def records(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


@pytest.fixture
def corpus(tmp_path, monkeypatch):
    monkeypatch.delenv("QWANNEAL_OUTPUT_DIR", raising=False)
    assert main(["gen", "ladder", "4", "2", "--count", "2", "--out-dir", str(tmp_path / "inst")]) == 0
    return sorted((tmp_path / "inst").iterdir())


def test_gen_writes_loadable_instances(corpus):
    assert [p.name for p in corpus] == ["ladder_4_2_s0.txt", "ladder_4_2_s1.txt"]
    assert load(corpus[1]).seed == 1


def test_anneal_outputs_manifest_header_and_results(corpus, tmp_path):
    out, trace, ck = tmp_path / "res.jsonl", tmp_path / "trace.jsonl", tmp_path / "ck"
    rc = main(["anneal", *map(str, corpus), "--oracle", "exact", "--json-out", str(out), "--trace-out", str(trace), "--checkpoint-dir", str(ck), "--fail-on-miss"])
    assert rc == 0
    recs = records(out)
    assert recs[0]["record"] == "manifest" and recs[0]["params"]["eta"] == 1e-8
    assert recs[1]["record"] == "header" and "work" in recs[1]["units"]
    results = recs[2:]
    assert len(results) == 2 and all(r["success"] for r in results)
    assert {r["record"] for r in records(trace)[2:]} == {"trace"}
    psi = MatrixProductState.load(results[0]["checkpoint"])
    assert psi.n_sites == 8


def test_anneal_biased_tracking(corpus, capsys):
    assert main(["anneal", str(corpus[0]), "--tracking", "biased"]) == 0
    result = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert result["tracking"] == "biased" and result["success"] is None


def test_output_dir_override(corpus, tmp_path, monkeypatch):
    monkeypatch.setenv("QWANNEAL_OUTPUT_DIR", str(tmp_path / "outdir"))
    assert main(["oracle", str(corpus[0]), "exact", "--out", "exact.jsonl"]) == 0
    recs = records(tmp_path / "outdir" / "exact.jsonl")
    assert recs[2]["method"] == "exact"
    assert len(recs) == 4


def test_oracle_minima_defaults_to_weak_preset(corpus, capsys):
    assert main(["oracle", str(corpus[0]), "minima", "--runs", "3"]) == 0
    assert json.loads(capsys.readouterr().out.splitlines()[0])["params"]["preset"] is None
    assert main(["oracle", str(corpus[0]), "sta", "--preset", "weak", "--restarts", "1"]) == 0
    rec = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert rec["steps"] > 0


def test_sweep_with_tracked_configs(corpus, tmp_path):
    configs = tmp_path / "configs.txt"
    configs.write_text("# label\n++++++++\n+-+-+-+-\n")
    out = tmp_path / "sweep.jsonl"
    rc = main(["sweep", str(corpus[0]), "--gammas", "2,1,0.5", "--track-configs", str(configs), "--out", str(out)])
    assert rc == 0
    recs = records(out)
    points = [r for r in recs if r["record"] == "point"]
    assert [p["gamma"] for p in points] == [2.0, 1.0, 0.5]
    assert [c for c, _ in points[0]["tracked_amplitudes"]] == ["++++++++", "+-+-+-+-"]
    assert recs[-1]["record"] == "summary" and recs[-1]["gamma_gap_min"] is not None


def test_bench_csv(corpus, tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", str(corpus[0].parent), "--oracle", "exact", "--etas", "1e-8", "1e-3", "--out", str(out)]) == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert lines[0].startswith("geometry,eta")
    assert len(lines) == 3


def test_exit_codes(corpus, tmp_path):
    assert main(["anneal", str(tmp_path / "missing.txt")]) == 1
    assert main(["anneal", str(corpus[0]), "--eta", "2"]) == 2
    assert main(["oracle", str(corpus[0]), "sta", "--r", "0.5"]) == 2
    with pytest.raises(SystemExit) as info:
        main(["no-such-command"])
    assert info.value.code == 2


def test_console_entry_point(corpus):
    proc = subprocess.run([sys.executable, "-m", "qwanneal.cli", "oracle", str(corpus[0]), "exact"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout.splitlines()[0])["record"] == "manifest"
    bad = subprocess.run([sys.executable, "-m", "qwanneal.cli", "anneal"], capture_output=True, text=True)
    assert bad.returncode == 2
