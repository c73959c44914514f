import json
import subprocess
import sys

import pytest

from ecgbench.cli import main
from ecgbench.config import PipelineConfig, dump_config, load_config
from ecgbench.features import read_features_csv

REPORT_FILES = ("pairs.csv", "summary.txt", "roc_S1_forest_k1.csv", "roc_S1_forest_k5.csv")


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    code = main(["synth", "--subjects", "5", "--days", "7", "--minutes", "1", "--seed", "42",
                 "--out", str(root / "corpus")])
    assert code == 0
    return root


@pytest.fixture(scope="module")
def processed(corpus):
    code = main(["process", "--input", str(corpus / "corpus"), "--out", str(corpus / "proc"),
                 "--seed", "42", "--jobs", "2"])
    assert code == 0
    return corpus / "proc"


def test_synth_counts_and_determinism(corpus, tmp_path):
    manifest = json.loads((corpus / "corpus" / "manifest.json").read_text())
    assert len(manifest["recordings"]) == 35
    assert main(["synth", "--subjects", "5", "--days", "7", "--minutes", "1", "--seed", "42",
                 "--out", str(tmp_path / "again" / "nested")]) == 0
    again = (tmp_path / "again" / "nested" / "manifest.json").read_bytes()
    assert again == (corpus / "corpus" / "manifest.json").read_bytes()


def test_process_outputs(processed):
    feats = sorted(p.name for p in (processed / "features").glob("*.csv"))
    assert feats == [f"S0{i}.csv" for i in range(1, 6)]
    log = (processed / "process.log").read_text()
    for word in ("episodes=", "beats=", "outliers=", "windows="):
        assert word in log
    assert (processed / "config.ini").exists()
    listed = {f["path"] for f in json.loads((processed / "outputs.json").read_text())["files"]}
    assert "features/S01.csv" in listed and "process.log" in listed


def test_clean_corpus_has_no_invalid_loss(tmp_path):
    assert main(["synth", "--subjects", "2", "--minutes", "1", "--gaps", "0", "--seed", "1",
                 "--out", str(tmp_path / "c")]) == 0
    assert main(["process", "--input", str(tmp_path / "c"), "--out", str(tmp_path / "p")]) == 0
    total = (tmp_path / "p" / "process.log").read_text().splitlines()[-1]
    assert total.startswith("total:") and "invalid=0.00%" in total


def test_gaps_reduce_windows_proportionally(tmp_path):
    args = ["--subjects", "2", "--minutes", "4", "--seed", "5", "--snr", "none"]
    main(["synth", *args, "--gaps", "0", "--out", str(tmp_path / "a")])
    main(["synth", *args, "--gaps", "2", "--out", str(tmp_path / "b")])
    counts = []
    for name in ("a", "b"):
        assert main(["process", "--input", str(tmp_path / name), "--out",
                     str(tmp_path / f"p{name}")]) == 0
        counts.append(sum(len(read_features_csv(f))
                          for f in (tmp_path / f"p{name}" / "features").glob("*.csv")))
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    coverage = (sum(r["invalid_fraction"] * r["n_samples"] for r in manifest["recordings"])
                / sum(r["n_samples"] for r in manifest["recordings"]))
    expected = counts[0] * (1 - coverage)
    assert abs(counts[1] - expected) <= 0.10 * counts[0]


def test_evaluate_and_report(processed, tmp_path, capsys):
    out = tmp_path / "eval"
    assert main(["evaluate", "--input", str(processed), "--out", str(out), "--scenario", "1",
                 "--classifier", "forest", "--fusion", "5", "--seed", "42", "--jobs", "2"]) == 0
    printed = capsys.readouterr().out
    assert "S1" in printed and "k=5" in printed
    for name in REPORT_FILES:
        assert (out / name).exists()
    rows = (out / "pairs.csv").read_text().splitlines()[1:]
    assert len({tuple(r.split(",")[2:4]) for r in rows}) == 20
    assert len(rows) == 20 * 5
    # rerun from the snapshot alone
    again = tmp_path / "again"
    assert main(["evaluate", "--config", str(out / "config.ini"), "--out", str(again),
                 "--jobs", "1"]) == 0
    for name in REPORT_FILES:
        assert (again / name).read_bytes() == (out / name).read_bytes()
    assert main(["report", "--input", str(out)]) == 0
    assert "output files listed" in capsys.readouterr().out


def test_s2a_excludes_subject_without_day_two(processed, tmp_path, caplog):
    src = tmp_path / "feats"
    src.mkdir()
    for f in (processed / "features").glob("*.csv"):
        lines = f.read_text().splitlines()
        if f.stem == "S03":
            day_col = lines[0].split(",").index("day_index")
            lines = [lines[0]] + [ln for ln in lines[1:] if ln.split(",")[day_col] != "2"]
        (src / f.name).write_text("\n".join(lines) + "\n")
    assert main(["evaluate", "--input", str(src), "--out", str(tmp_path / "e"), "--scenario",
                 "2a", "--fusion", "1"]) == 0
    assert "excluding S03" in caplog.text
    assert "excluded in S2a: S03" in (tmp_path / "e" / "summary.txt").read_text()


def test_exit_codes(tmp_path, capsys):
    assert main(["evaluate", "--scenario", "9", "--input", str(tmp_path)]) == 1
    assert main(["bogus"]) == 1
    assert main(["synth"]) == 1  # no --out
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["process", "--input", str(empty), "--out", str(tmp_path / "o")]) == 2
    assert str(empty) in capsys.readouterr().err
    assert main(["evaluate", "--input", str(tmp_path / "missing"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[nonsense]\nx = 1\n")
    assert main(["synth", "--config", str(bad), "--out", str(tmp_path / "s")]) == 1


def test_config_roundtrip_and_flags_win(tmp_path):
    cfg = load_config(text="[run]\nseed = 9\n[forest]\nn_trees = 7\n[linear]\nC = 0.0001\n"
                           "[synth]\nsubjects = 3\n[evaluate]\nscenario = S2b\nfusion = 3\n")
    assert cfg.seed == 9 and cfg.forest.n_trees == 7 and cfg.linear.C == 1e-4
    assert cfg.synth.n_subjects == 3 and cfg.fusion_levels == (1, 2, 3)
    assert dump_config(load_config(text=dump_config(cfg))) == dump_config(cfg)
    path = tmp_path / "c.ini"
    path.write_text(dump_config(cfg))
    assert main(["synth", "--config", str(path), "--subjects", "1", "--minutes", "0.2",
                 "--out", str(tmp_path / "o")]) == 0
    snap = load_config(str(tmp_path / "o" / "config.ini"))
    assert snap.synth.n_subjects == 1 and snap.seed == 9 and snap.forest.n_trees == 7
    assert dump_config(PipelineConfig()) == dump_config(load_config(text=dump_config(PipelineConfig())))


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "ecgbench", "--version"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "ecgbench" in res.stdout
