import csv
import json
import shutil
import subprocess
import sys

import pytest

from szzkit.cli import main

STAGES = ("mine", "run", "classify", "report")


def _run(stage, repo, out, *extra, workers=1):
    return main([stage, "--repo", str(repo), "--out", str(out), "--workers", str(workers), *extra])


def _pipeline(repo, out, workers=1, prompts=False):
    for stage in STAGES:
        extra = ("--emit-prompts",) if prompts and stage == "classify" else ()
        assert _run(stage, repo, out, *extra, workers=workers) == 0, stage


def _snapshot(out):
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_end_to_end(build, tmp_path, capsys):
    fmap = build("ghosts")
    out = tmp_path / "out"
    _pipeline(fmap.path, out)
    files = _snapshot(out)
    for name in ("dataset.csv", "abnormal.csv", "common_hashes.txt", "classification.csv",
                 "ghosts.csv", "report.json", "metrics_table.csv", "overlap.png", "metrics.png",
                 "categories.png", "chains_TC.json"):
        assert name in files, name
    for alg in ("B", "AG", "L", "R", "MA", "PYD", "TC"):
        assert f"predictions_{alg}.csv" in files
    assert len(_rows(out / "dataset.csv")) == 4
    assert files["overlap.png"].startswith(b"\x89PNG")
    report = json.loads(files["report.json"])
    b_row = next(r for r in report["algorithms"] if r["algorithm"] == "B")
    assert b_row["recall"] == pytest.approx(0.5)
    printed = capsys.readouterr().out
    assert printed.startswith("mined 4 bug-fix links; abnormal 0")
    assert "B-SZZ outcomes: Success 2" in printed


def test_rerun_is_byte_identical_and_parallel_safe(build, tmp_path):
    fmap = build("ghosts")
    out = tmp_path / "out"
    _pipeline(fmap.path, out, workers=1)
    first = _snapshot(out)
    shutil.rmtree(out)
    _pipeline(fmap.path, out, workers=2)
    assert _snapshot(out) == first


def test_algos_subset_writes_single_file(build, tmp_path):
    fmap = build("ghosts")
    out = tmp_path / "out"
    assert _run("mine", fmap.path, out) == 0
    assert _run("run", fmap.path, out, "--algos", "R") == 0
    assert sorted(p.name for p in out.glob("predictions_*.csv")) == ["predictions_R.csv"]


def test_missing_inputs_exit_codes(build, tmp_path):
    fmap = build("ghosts")
    out = tmp_path / "out"
    assert _run("run", fmap.path, out) == 4
    assert _run("mine", fmap.path, out) == 0
    assert _run("run", fmap.path, out, "--algos", "R") == 0
    assert _run("classify", fmap.path, out) == 5
    assert _run("report", fmap.path, out) == 6


def test_repository_exit_codes(tmp_path):
    assert _run("mine", tmp_path, tmp_path / "out") == 2
    empty = tmp_path / "empty"
    subprocess.run(["git", "init", "-q", str(empty)], check=True)
    assert _run("mine", empty, tmp_path / "out") == 2


def test_unwritable_output_exit_code(build, tmp_path):
    fmap = build("ghosts")
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert _run("mine", fmap.path, blocker) == 3


def test_config_file_with_flag_override(build, tmp_path):
    fmap = build("lineage_replica")
    out = tmp_path / "out"
    conf = tmp_path / "szz.conf"
    conf.write_text(f"# pipeline settings\nrepo = {fmap.path}\nout = {out}\n"
                    "algorithms = B, TC\nblame-count = 1\nworkers = 1\n")
    assert main(["mine", "--config", str(conf)]) == 0
    # the dataset is empty (no trailers), so seed one link by hand
    (out / "dataset.csv").write_text(f"fix_sha,inducing_shas,subject\n{fmap['fix'].id},"
                                     f"{fmap['inducer'].id},x\n")
    assert main(["run", "--config", str(conf), "--blame-count", "-1"]) == 0
    rows = _rows(out / "predictions_TC.csv")
    assert fmap["inducer"].id in rows[0]["inducing_shas"]
    assert not (out / "predictions_AG.csv").exists()


def test_attribution_json(build, tmp_path):
    fmap = build("ghosts")
    out = tmp_path / "out"
    assert _run("mine", fmap.path, out) == 0
    assert _run("run", fmap.path, out, "--algos", "B", "--attribution") == 0
    data = json.loads((out / "predictions_B.json").read_text())
    assert [entry["fix_sha"] for entry in data] == [r["fix_sha"] for r in _rows(out / "dataset.csv")]
    assert all(entry["attribution"] for entry in data if entry["inducing_shas"])


def test_emit_prompts_cross_file(build, tmp_path):
    fmap = build("ladder_cross_file")
    out = tmp_path / "out"
    _pipeline(fmap.path, out, prompts=True)
    (prompt,) = (out / "prompts").iterdir()
    assert prompt.name == f"{fmap['fix'].id}.A.prompt.txt"
    assert prompt.read_text().endswith("which file in the Linux kernel could be causing "
                                       "this bug-fixing commit?\n")
    assert "CrossFile" in [r["failure_mode"] for r in _rows(out / "classification.csv")]


def test_fixture_build_subcommand(tmp_path, capsys):
    script = tmp_path / "s.fixture"
    script.write_text("@commit only\n@file a\nx\n@end\n")
    assert main(["fixture", "build", str(script), str(tmp_path / "repo")]) == 0
    assert capsys.readouterr().out.startswith("only ")


def test_module_entry_point_help():
    res = subprocess.run([sys.executable, "-m", "szzkit", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "mine" in res.stdout
