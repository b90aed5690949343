"""The four file-backed stages behind the command line: mine, run, classify, report.

Each stage reads the previous stage's artifacts from the output directory,
so any stage can be rerun on its own.  Per-fix work fans out over a process
pool; every worker opens its own repository handle.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import io, metrics, plots
from .classify import (
    FailureMode,
    Outcome,
    categorize_outcome,
    classify_failure,
    emit_llm_prompt,
    ghost_frequencies,
    is_amg,
    is_rmg,
    prompt_context,
)
from .config import RunConfig
from .errors import DegenerateVariance, IoFailure
from .git import Repository
from .miner import BugFixLink, mine_dataset
from .tracing import tcszz
from .variants import VARIANTS, Algorithm, Prediction, agszz

logger = logging.getLogger(__name__)


class StageInputMissing(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


EXIT_REPO, EXIT_WRITE, EXIT_NO_DATASET, EXIT_NO_BASELINE, EXIT_NO_REPORT_INPUT = 2, 3, 4, 5, 6

OUTCOME_ORDER = [o.value for o in Outcome]
MODE_ORDER = [m.value for m in FailureMode]


# ------------------------------------------------------------ worker plumbing

_REPO: Repository | None = None


def _init_worker(path: str, rev: str) -> None:
    global _REPO
    _REPO = Repository(path, rev)


def _parallel_map(cfg: RunConfig, repo: Repository, fn: Callable, items: Sequence) -> list:
    """Order-preserving map; serial in-process when one worker suffices."""
    global _REPO
    if cfg.workers <= 1 or len(items) <= 1:
        saved, _REPO = _REPO, repo
        try:
            return [fn(x) for x in items]
        finally:
            _REPO = saved
    chunk = max(1, len(items) // (cfg.workers * 8))
    with ProcessPoolExecutor(max_workers=min(cfg.workers, len(items)), initializer=_init_worker,
                             initargs=(repo.path, repo.head.id)) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def open_configured(cfg: RunConfig) -> Repository:
    return Repository(cfg.repo, cfg.until)


# ----------------------------------------------------------------------- mine


@dataclass
class MineSummary:
    n_links: int
    n_abnormal: int
    n_partial: int
    n_not_in_repo: int
    n_ambiguous: int
    n_common: int

    def line(self) -> str:
        return (f"mined {self.n_links} bug-fix links; abnormal {self.n_abnormal} "
                f"(PartialCommitId {self.n_partial}, NotInRepository {self.n_not_in_repo}); "
                f"ambiguous flagged {self.n_ambiguous}; common commits {self.n_common}")


def stage_mine(cfg: RunConfig) -> MineSummary:
    out = cfg.out_dir
    with open_configured(cfg) as repo:
        result = mine_dataset(repo, repo.head)
        conf = {"stage": "mine", "repo": repo.path, "until": repo.head.id}
    rows = [(link.fixing_commit.id, io.join_ids(sorted(link.inducing_ids)), link.fixing_commit.subject)
            for link in result.dataset]
    io.write_meta(io.write_csv(out / "dataset.csv", io.DATASET_HEADER, rows), "mine", conf)
    io.write_csv(out / "fix_dates.csv", io.DATES_HEADER,
                 [(link.fixing_commit.id, link.fixing_commit.timestamp) for link in result.dataset])
    io.write_csv(out / "abnormal.csv", io.ABNORMAL_HEADER,
                 [(r.fixing_commit.id, r.raw_line, r.category.value, r.subcause) for r in result.abnormal])
    io.write_csv(out / "flagged.csv", io.FLAGGED_HEADER,
                 [(r.fixing_commit.id, r.raw_line, io.join_ids(sorted(c.id for c in r.candidates)))
                  for r in result.flagged])
    io.write_lines(out / "common_hashes.txt", [c.id for c in result.common_commits])
    cats = Counter(r.category.value for r in result.abnormal)
    return MineSummary(len(result.dataset), len(result.abnormal), cats["PartialCommitId"],
                       cats["NotInRepository"], len(result.flagged), len(result.common_commits))


def load_links(cfg: RunConfig, repo: Repository) -> list[BugFixLink]:
    path = cfg.out_dir / "dataset.csv"
    if not path.exists():
        raise StageInputMissing(EXIT_NO_DATASET, f"{path} not found; run 'mine' first")
    return [BugFixLink(repo.commit(fix), tuple(repo.commit(i) for i in inducing))
            for fix, (inducing, _) in io.read_dataset(path).items()]


# ------------------------------------------------------------------------ run


def _run_fix(task: tuple) -> dict:
    fix_id, algos, mode, blame_count, threshold = task
    repo = _REPO
    fix = repo.commit(fix_id)
    out: dict[str, dict] = {}
    base: Prediction | None = None
    for alg in algos:
        a = Algorithm(alg)
        if a is Algorithm.TC:
            pred = tcszz(repo, fix, mode, blame_count, threshold)
        elif a in (Algorithm.L, Algorithm.R):
            base = base or agszz(repo, fix)
            pred = VARIANTS[a](repo, fix, base)
        else:
            pred = VARIANTS[a](repo, fix)
            if a is Algorithm.AG:
                base = pred
        out[alg] = {
            "inducing": sorted(pred.inducing_ids),
            "attribution": [{"path": lc.path, "line": lc.line, "content": lc.content, "sha": c.id}
                            for lc, c in pred.per_line_attribution.items()],
            "chains": [ch.to_json() for ch in pred.chains],
        }
    return out


def _run_config(cfg: RunConfig, repo: Repository, alg: str, dataset_digest: str) -> dict:
    conf = {"stage": "run", "algorithm": alg, "repo": repo.path, "until": repo.head.id,
            "dataset": dataset_digest}
    if alg == "TC":
        conf.update(tc_mode=cfg.effective_tc_mode.value, blame_count=cfg.blame_count,
                    similarity_threshold=cfg.similarity_threshold)
    return conf


def stage_run(cfg: RunConfig) -> dict[str, Path]:
    out = cfg.out_dir
    with open_configured(cfg) as repo:
        links = load_links(cfg, repo)
        digest = io.file_digest(out / "dataset.csv")
        confs = {alg: _run_config(cfg, repo, alg, digest) for alg in cfg.algorithms}
        paths = {alg: out / f"predictions_{alg}.csv" for alg in cfg.algorithms}
        todo = [alg for alg in cfg.algorithms if not io.is_current(paths[alg], confs[alg])
                or (cfg.attribution and not (out / f"predictions_{alg}.json").exists())]
        for alg in cfg.algorithms:
            if alg not in todo:
                logger.info("predictions for %s are up to date", alg)
        if not todo:
            return paths
        repo.prefetch_diffs(link.fixing_commit for link in links)
        tasks = [(link.fixing_commit.id, tuple(todo), cfg.effective_tc_mode.value, cfg.blame_count,
                  cfg.similarity_threshold) for link in links]
        results = _parallel_map(cfg, repo, _run_fix, tasks)
    for alg in todo:
        table = {link.fixing_commit.id: res[alg]["inducing"] for link, res in zip(links, results)}
        io.write_csv(paths[alg], io.PREDICTION_HEADER, io.prediction_rows(alg, table))
        io.write_meta(paths[alg], "run", confs[alg])
        if cfg.attribution:
            io.write_json(out / f"predictions_{alg}.json", [
                {"fix_sha": link.fixing_commit.id, "algorithm": alg,
                 "inducing_shas": res[alg]["inducing"], "attribution": res[alg]["attribution"]}
                for link, res in zip(links, results)])
        if alg == "TC":
            io.write_json(out / "chains_TC.json", [
                {"fix_sha": link.fixing_commit.id, "mode": cfg.effective_tc_mode.value,
                 "chains": res[alg]["chains"]}
                for link, res in zip(links, results)])
    return paths


# ------------------------------------------------------------------- classify


def _classify_fix(task: tuple) -> dict:
    fix_id, inducing, predictions, emit = task
    repo = _REPO
    link = BugFixLink(repo.commit(fix_id), tuple(repo.commit(i) for i in inducing))
    result: dict = {
        "rmg": is_rmg(repo, link.fixing_commit),
        "amg": sorted(c.id for c in link.inducing_commits if is_amg(repo, c)),
        "categories": {}, "failure_mode": None, "prompt": None,
    }
    for alg, ids in predictions.items():
        pred = Prediction(link.fixing_commit, Algorithm(alg), tuple(repo.commit(i) for i in ids))
        cat = categorize_outcome(link, pred, repo).category
        result["categories"][alg] = cat.value
        if alg == "B" and cat is Outcome.FAILURE:
            mode = classify_failure(repo, link, pred)
            result["failure_mode"] = mode.value
            if emit and mode is not FailureMode.LINE_CHANGE:
                ctx = prompt_context(repo, link.fixing_commit, mode)
                try:
                    result["prompt"] = emit_llm_prompt(mode, repo.message(link.fixing_commit), ctx,
                                                       link.inducing_ids)
                except ValueError as exc:
                    logger.warning("no prompt for %s: %s", link.fixing_commit.short, exc)
    return result


def _available_predictions(cfg: RunConfig, algos: Iterable[str]) -> dict[str, dict[str, set[str]]]:
    found = {}
    for alg in algos:
        path = cfg.out_dir / f"predictions_{alg}.csv"
        if path.exists():
            found[alg] = io.read_predictions(path)[1]
    return found


def stage_classify(cfg: RunConfig) -> dict[str, int]:
    out = cfg.out_dir
    with open_configured(cfg) as repo:
        links = load_links(cfg, repo)
        preds = _available_predictions(cfg, cfg.algorithms if "B" in cfg.algorithms
                                       else ("B",) + tuple(cfg.algorithms))
        if "B" not in preds:
            raise StageInputMissing(EXIT_NO_BASELINE,
                                    f"{out / 'predictions_B.csv'} not found; run 'run' with B first")
        freqs = ghost_frequencies(repo, links, repo.head)
        tasks = [(link.fixing_commit.id, sorted(link.inducing_ids),
                  {alg: sorted(t.get(link.fixing_commit.id, ())) for alg, t in preds.items()},
                  cfg.emit_prompts) for link in links]
        results = _parallel_map(cfg, repo, _classify_fix, tasks)
    rows, ghosts = [], {}
    for link, res in zip(links, results):
        fix = link.fixing_commit.id
        if res["rmg"]:
            ghosts[(fix, "AsFix")] = "RemoveMappingGhost"
        for c in res["amg"]:
            ghosts[(c, "AsInducer")] = "AddMappingGhost"
        for alg in preds:
            mode = res["failure_mode"] if alg == "B" else None
            rows.append((fix, alg, res["categories"][alg], mode or ""))
        if res["prompt"] is not None:
            label = {"CrossFile": "A", "WithinFile": "B"}.get(res["failure_mode"], "C")
            io.write_text(out / "prompts" / f"{fix}.{label}.prompt.txt", res["prompt"])
    io.write_csv(out / "classification.csv", io.CLASSIFICATION_HEADER, rows)
    io.write_csv(out / "ghosts.csv", io.GHOST_HEADER,
                 [(sha, side, kind) for (sha, side), kind in sorted(ghosts.items())])
    io.write_json(out / "ghosts.json", freqs.to_json())
    return dict(Counter(r[2] for r in rows if r[1] == "B"))


# --------------------------------------------------------------------- report


def _require(path: Path) -> Path:
    if not path.exists():
        raise StageInputMissing(EXIT_NO_REPORT_INPUT, f"{path} not found")
    return path


def build_report(truth: dict[str, set[str]], preds: dict[str, dict[str, set[str]]],
                 classification: list[dict], rmg: set[str], amg: set[str],
                 years: dict[str, int] | None = None, ghosts: dict | None = None) -> dict:
    rows = metrics.aggregate(truth, preds)
    correct = {alg: metrics.correct_pairs(truth, t) for alg, t in preds.items()}
    names, matrix = metrics.overlap_matrix(correct)
    unique = metrics.unique_contributions(correct)
    categories: dict[str, dict[str, int]] = {}
    modes: Counter = Counter()
    for r in classification:
        categories.setdefault(r["algorithm"], {k: 0 for k in OUTCOME_ORDER})[r["category"]] += 1
        if r["algorithm"] == "B" and r["failure_mode"]:
            modes[r["failure_mode"]] += 1
    ablation = {
        "filter_rmg": metrics.ghost_ablation(truth, preds, rmg, amg, True, False),
        "filter_amg": metrics.ghost_ablation(truth, preds, rmg, amg, False, True),
        "filter_both": metrics.ghost_ablation(truth, preds, rmg, amg, True, True),
    }
    stats: dict[str, dict] = {}
    if years and "TC" in preds:
        tc_series = metrics.recall_by_year(truth, preds["TC"], years)
        for alg, t in preds.items():
            if alg == "TC":
                continue
            other = metrics.recall_by_year(truth, t, years)
            common = sorted(set(tc_series) & set(other))
            key = f"TC_vs_{alg}"
            try:
                cmp = metrics.compare_recall_series([tc_series[y] for y in common],
                                                    [other[y] for y in common])
                stats[key] = {**cmp.to_json(), "years": common}
            except (ValueError, DegenerateVariance) as exc:
                stats[key] = {"error": str(exc), "years": common}
    return {
        "algorithms": [r.to_json() for r in rows],
        "overlap": matrix,
        "overlap_algorithms": names,
        "unique": {k: v.to_json() for k, v in unique.items()},
        "categories": categories,
        "failure_modes": {m: modes.get(m, 0) for m in MODE_ORDER},
        "ghosts": {**(ghosts or {}),
                   "ablation": {k: [r.to_json() for r in v] for k, v in ablation.items()}},
        "stats": stats,
    }


def stage_report(cfg: RunConfig) -> dict:
    out = cfg.out_dir
    dataset = io.read_dataset(_require(out / "dataset.csv"))
    truth = {fix: set(ids) for fix, (ids, _) in dataset.items()}
    preds = _available_predictions(cfg, cfg.algorithms)
    missing = [a for a in cfg.algorithms if a not in preds]
    if not preds:
        raise StageInputMissing(EXIT_NO_REPORT_INPUT, "no prediction files found; run 'run' first")
    if missing:
        logger.warning("no predictions for %s; left out of the report", ", ".join(missing))
    classification = io.read_csv(_require(out / "classification.csv"), io.CLASSIFICATION_HEADER)
    ghost_rows = io.read_csv(out / "ghosts.csv", io.GHOST_HEADER) if (out / "ghosts.csv").exists() else []
    rmg = {r["commit_sha"] for r in ghost_rows if r["kind"] == "RemoveMappingGhost"}
    amg = {r["commit_sha"] for r in ghost_rows if r["kind"] == "AddMappingGhost"}
    years = None
    if (out / "fix_dates.csv").exists():
        years = {r["fix_sha"]: metrics.fix_year(int(r["timestamp"]))
                 for r in io.read_csv(out / "fix_dates.csv", io.DATES_HEADER)}
    ghosts = None
    if (out / "ghosts.json").exists():
        ghosts = json.loads((out / "ghosts.json").read_text())
    report = build_report(truth, preds, classification, rmg, amg, years, ghosts)
    io.write_json(out / "report.json", report)
    io.write_csv(out / "metrics_table.csv", io.METRICS_HEADER,
                 [(r["algorithm"], repr(r["precision"]), repr(r["recall"]), repr(r["f1"]),
                   r["n_fixes_recall"], r["n_fixes_precision"]) for r in report["algorithms"]])
    try:
        plots.overlap_heatmap(report["overlap_algorithms"], report["overlap"], out / "overlap.png")
        plots.metric_bars(report["algorithms"], out / "metrics.png")
        counts = {k: v for k, v in report["categories"].get("B", {}).items() if k != "FailureWithoutMG"}
        counts.update(report["failure_modes"])
        plots.category_histogram(counts, out / "categories.png", "B-SZZ outcomes")
    except OSError as exc:
        raise IoFailure(f"cannot write figures: {exc}") from exc
    return report
