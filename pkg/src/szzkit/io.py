"""Stage artifact formats.

CSV files are UTF-8, LF-terminated, with a header row and minimal RFC 4180
quoting.  Multi-valued id fields are ``|``-joined.  Each artifact may carry
a ``<name>.meta.json`` sidecar holding the hash of the configuration that
produced it, so the CSV headers stay exactly as documented.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import IoFailure

DATASET_HEADER = ("fix_sha", "inducing_shas", "subject")
ABNORMAL_HEADER = ("fix_sha", "raw_line", "category", "subcause")
FLAGGED_HEADER = ("fix_sha", "raw_line", "candidate_shas")
PREDICTION_HEADER = ("fix_sha", "algorithm", "inducing_shas")
CLASSIFICATION_HEADER = ("fix_sha", "algorithm", "category", "failure_mode")
GHOST_HEADER = ("commit_sha", "side", "kind")
DATES_HEADER = ("fix_sha", "timestamp")
METRICS_HEADER = ("algorithm", "precision", "recall", "f1", "n_fixes_recall", "n_fixes_precision")


def join_ids(ids: Iterable[str]) -> str:
    return "|".join(ids)


def split_ids(field: str) -> list[str]:
    return [x for x in field.split("|") if x]


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path: str | Path, header: Sequence[str]) -> list[dict[str, str]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != tuple(header):
            raise IoFailure(f"{path}: expected header {','.join(header)}")
        return list(reader)


def write_json(path: str | Path, data) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def write_lines(path: str | Path, lines: Iterable[str]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(x + "\n" for x in lines), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def write_text(path: str | Path, text: str) -> Path:
    return write_lines(path, [text.rstrip("\n")]) if text else write_lines(path, [])


# ----------------------------------------------------------------- hashing


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(config: Mapping) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def meta_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_meta(path: str | Path, stage: str, config: Mapping) -> Path:
    return write_json(meta_path(path), {"stage": stage, "config_hash": config_hash(config),
                                        "config": dict(config)})


def is_current(path: str | Path, config: Mapping) -> bool:
    """True when ``path`` exists and was produced under the same configuration."""
    path, meta = Path(path), meta_path(path)
    if not path.exists() or not meta.exists():
        return False
    try:
        return json.loads(meta.read_text())["config_hash"] == config_hash(config)
    except (OSError, ValueError, KeyError):
        return False


# ------------------------------------------------------------------ tables


def read_dataset(path: str | Path) -> dict[str, tuple[list[str], str]]:
    return {r["fix_sha"]: (split_ids(r["inducing_shas"]), r["subject"])
            for r in read_csv(path, DATASET_HEADER)}


def read_predictions(path: str | Path) -> tuple[str, dict[str, set[str]]]:
    rows = read_csv(path, PREDICTION_HEADER)
    algs = {r["algorithm"] for r in rows}
    alg = algs.pop() if len(algs) == 1 else Path(path).stem.split("_", 1)[-1]
    return alg, {r["fix_sha"]: set(split_ids(r["inducing_shas"])) for r in rows}


def prediction_rows(algorithm: str, table: Mapping[str, Sequence[str]]) -> list[tuple[str, str, str]]:
    return [(fix, algorithm, join_ids(sorted(ids))) for fix, ids in table.items()]
