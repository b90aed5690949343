"""Read-only access to a local git repository.

Everything shells out to the git executable (``GIT_BINARY`` overrides the
binary).  User and system configuration are ignored and every invocation
pins the options that influence output so results are reproducible across
machines.
"""

from __future__ import annotations

import heapq
import logging
import os
import re
import subprocess
import threading
import weakref
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import (
    EmptyRepo,
    GitError,
    LineOutOfRange,
    MalformedPartial,
    NoSuchPathAtCommit,
    NotARepo,
    RangeInvalid,
    UnknownCommit,
)

logger = logging.getLogger(__name__)

SHA_RE = re.compile(r"^[0-9a-f]{40}$")
PARTIAL_RE = re.compile(r"^[0-9a-f]{7,40}$")
HUNK_RE = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")

# options that would otherwise let repository-local config change output
_PINNED = (
    "-c", "core.abbrev=40",
    "-c", "core.quotepath=off",
    "-c", "diff.algorithm=myers",
    "-c", "diff.renames=true",
    "-c", "diff.noprefix=false",
    "-c", "diff.mnemonicPrefix=false",
    "-c", "log.showSignature=false",
    "-c", "log.follow=false",
    "-c", "blame.ignoreRevsFile=",
    "-c", "color.ui=never",
)
_DIFF_OPTS = (
    "-p", "-M50%", "-U0", "--no-color", "--no-ext-diff", "--no-textconv",
    "--src-prefix=a/", "--dst-prefix=b/",
)


def git_binary() -> str:
    return os.environ.get("GIT_BINARY", "git")


def git_env() -> dict[str, str]:
    env = dict(os.environ)
    env.update(
        GIT_CONFIG_NOSYSTEM="1",
        GIT_CONFIG_GLOBAL=os.devnull,
        GIT_TERMINAL_PROMPT="0",
        GIT_OPTIONAL_LOCKS="0",
        LC_ALL="C",
        LANG="C",
    )
    for key in ("GIT_DIR", "GIT_WORK_TREE", "GIT_INDEX_FILE", "GIT_CONFIG_PARAMETERS"):
        env.pop(key, None)
    return env


def _decode(raw: bytes) -> str:
    return raw.decode("utf-8", "surrogateescape")


# ---------------------------------------------------------------- data types


@dataclass(frozen=True, slots=True)
class CommitRef:
    """A commit identity.  Equality and hashing use the id only."""

    id: str
    timestamp: int = field(default=0, compare=False)
    parents: tuple[str, ...] = field(default=(), compare=False)
    subject: str = field(default="", compare=False)

    @property
    def parent_count(self) -> int:
        return len(self.parents)

    @property
    def is_merge(self) -> bool:
        return len(self.parents) >= 2

    @property
    def is_root(self) -> bool:
        return not self.parents

    @property
    def short(self) -> str:
        return self.id[:12]

    def __repr__(self) -> str:
        return f"CommitRef({self.id[:12]})"


@dataclass(frozen=True, slots=True)
class LineChange:
    """One removed or added diff line.  ``line`` is 1-based on its own side."""

    path: str
    line: int
    content: str
    kind: str  # "removed" | "added"


@dataclass(frozen=True)
class Hunk:
    """One ``-U0`` change block.

    ``old_start``/``new_start`` give the first line the block occupies on
    each side; for an empty side it is the line the block sits before.
    """

    removed: tuple[LineChange, ...] = ()
    added: tuple[LineChange, ...] = ()
    old_start: int = 0
    new_start: int = 0


@dataclass(frozen=True)
class FileDiff:
    old_path: str | None
    new_path: str | None
    rename_flag: bool = False
    hunks: tuple[Hunk, ...] = ()
    binary: bool = False

    @property
    def path(self) -> str:
        return self.new_path or self.old_path or ""

    def removed(self) -> list[LineChange]:
        return [lc for h in self.hunks for lc in h.removed]

    def added(self) -> list[LineChange]:
        return [lc for h in self.hunks for lc in h.added]


@dataclass(frozen=True)
class DiffSet:
    commit: CommitRef
    files: tuple[FileDiff, ...] = ()

    def removed_lines(self) -> list[LineChange]:
        return [lc for f in self.files for lc in f.removed()]

    def added_lines(self) -> list[LineChange]:
        return [lc for f in self.files for lc in f.added()]

    @property
    def n_removed(self) -> int:
        return sum(len(h.removed) for f in self.files for h in f.hunks)

    @property
    def n_added(self) -> int:
        return sum(len(h.added) for f in self.files for h in f.hunks)

    def file_for(self, path: str, side: str = "new") -> FileDiff | None:
        for f in self.files:
            if (f.new_path if side == "new" else f.old_path) == path:
                return f
        return None


@dataclass(frozen=True, slots=True)
class BlameEntry:
    origin: CommitRef
    origin_path: str
    origin_line: int
    content: str


# ------------------------------------------------------------- diff parsing


def _unquote(path: str) -> str:
    """Undo git's C-style quoting of unusual path names."""
    if not (len(path) >= 2 and path[0] == '"' and path[-1] == '"'):
        return path
    body = path[1:-1]
    out = bytearray()
    i = 0
    escapes = {"n": 10, "t": 9, '"': 34, "\\": 92, "a": 7, "b": 8, "f": 12, "r": 13, "v": 11}
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            nxt = body[i + 1]
            if nxt in escapes:
                out.append(escapes[nxt])
                i += 2
                continue
            if nxt.isdigit():
                out.append(int(body[i + 1:i + 4], 8))
                i += 4
                continue
        out.extend(ch.encode("utf-8", "surrogateescape"))
        i += 1
    return _decode(bytes(out))


def _strip_prefix(path: str, prefix: str) -> str | None:
    path = _unquote(path)
    if path == "/dev/null":
        return None
    return path[len(prefix):] if path.startswith(prefix) else path


def _paths_from_header(rest: str) -> tuple[str, str]:
    if rest.startswith('"'):
        end = rest.index('"', 1)
        while rest[end - 1] == "\\":
            end = rest.index('"', end + 1)
        a, b = rest[:end + 1], rest[end + 2:]
    else:
        n = (len(rest) - 1) // 2
        a, b = rest[:n], rest[n + 1:]
        if " b/" in rest and a[2:] != b[2:]:
            a, b = rest.split(" b/", 1)
            b = "b/" + b
    return _strip_prefix(a, "a/") or "", _strip_prefix(b, "b/") or ""


class _FileBuilder:
    def __init__(self, old_path: str | None, new_path: str | None):
        self.old_path = old_path
        self.new_path = new_path
        self.rename = False
        self.binary = False
        self.hunks: list[Hunk] = []
        self.new_file = False
        self.deleted = False
        self._removed: list[LineChange] = []
        self._added: list[LineChange] = []
        self._next_old = self._old_start = 0
        self._next_new = self._new_start = 0

    def start_hunk(self, old_start: int, new_start: int) -> None:
        self.flush()
        self._next_old = self._old_start = old_start
        self._next_new = self._new_start = new_start

    def add_line(self, raw: str) -> None:
        if raw.startswith("-"):
            self._removed.append(LineChange(self.old_path or "", self._next_old, raw[1:], "removed"))
            self._next_old += 1
        elif raw.startswith("+"):
            self._added.append(LineChange(self.new_path or "", self._next_new, raw[1:], "added"))
            self._next_new += 1

    def flush(self) -> None:
        if self._removed or self._added:
            self.hunks.append(Hunk(tuple(self._removed), tuple(self._added),
                                   self._old_start, self._new_start))
        self._removed, self._added = [], []

    def build(self) -> FileDiff:
        self.flush()
        old = None if self.new_file else self.old_path
        new = None if self.deleted else self.new_path
        return FileDiff(old, new, self.rename, tuple(self.hunks), self.binary)


def parse_unified_diff(text: str) -> list[FileDiff]:
    """Parse ``-U0`` patch output from git into FileDiffs."""
    files: list[FileDiff] = []
    cur: _FileBuilder | None = None
    in_hunk = False
    for raw in text.split("\n"):
        if raw.startswith("diff --git "):
            if cur is not None:
                files.append(cur.build())
            old, new = _paths_from_header(raw[len("diff --git "):])
            cur = _FileBuilder(old, new)
            in_hunk = False
            continue
        if cur is None:
            continue
        if in_hunk:
            if raw[:1] in ("-", "+"):
                cur.add_line(raw)
                continue
            if raw.startswith("\\"):
                continue
            in_hunk = False
        if raw.startswith("@@ "):
            m = HUNK_RE.match(raw)
            if m is None:
                raise GitError(f"unparsable hunk header: {raw!r}")
            old_start, old_count = int(m.group(1)), int(m.group(2) or 1)
            new_start, new_count = int(m.group(3)), int(m.group(4) or 1)
            # a zero count names the line *before* the change
            cur.start_hunk(old_start if old_count else old_start + 1,
                           new_start if new_count else new_start + 1)
            in_hunk = True
        elif raw.startswith("--- "):
            path = _strip_prefix(raw[4:], "a/")
            if path is None:
                cur.new_file = True
            else:
                cur.old_path = path
        elif raw.startswith("+++ "):
            path = _strip_prefix(raw[4:], "b/")
            if path is None:
                cur.deleted = True
            else:
                cur.new_path = path
        elif raw.startswith("rename from "):
            cur.old_path = _unquote(raw[len("rename from "):])
            cur.rename = True
        elif raw.startswith("rename to "):
            cur.new_path = _unquote(raw[len("rename to "):])
            cur.rename = True
        elif raw.startswith("new file mode"):
            cur.new_file = True
        elif raw.startswith("deleted file mode"):
            cur.deleted = True
        elif raw.startswith("Binary files ") or raw.startswith("GIT binary patch"):
            cur.binary = True
    if cur is not None:
        files.append(cur.build())
    return files


def parse_line_porcelain(text: str, lookup) -> list[BlameEntry]:
    """Parse ``git blame --line-porcelain`` output.

    ``lookup`` maps a commit id to its CommitRef.
    """
    entries: list[BlameEntry] = []
    sha = path = None
    orig = 0
    for raw in text.split("\n"):
        if raw.startswith("\t"):
            entries.append(BlameEntry(lookup(sha), path or "", orig, raw[1:]))
            sha = path = None
        elif sha is None:
            if len(raw) > 41 and raw[40] == " ":
                parts = raw.split(" ")
                sha, orig = parts[0], int(parts[1])
        elif raw.startswith("filename "):
            path = _unquote(raw[len("filename "):])
    return entries


# ----------------------------------------------------------------- the repo


class _CatFile:
    """A persistent ``git cat-file --batch`` process."""

    def __init__(self, cmd: list[str], cwd: str):
        self._proc = subprocess.Popen(
            cmd + ["cat-file", "--batch"], cwd=cwd, env=git_env(),
            stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
        )
        self._lock = threading.Lock()
        self._finalizer = weakref.finalize(self, _CatFile._shutdown, self._proc)

    @staticmethod
    def _shutdown(proc: subprocess.Popen) -> None:
        if proc.poll() is None:
            try:
                proc.stdin.close()
                proc.wait(timeout=5)
            except Exception:  # pragma: no cover - best effort
                proc.kill()
        for stream in (proc.stdout,):
            if stream:
                stream.close()

    def read(self, spec: str) -> bytes | None:
        with self._lock:
            self._proc.stdin.write(spec.encode("utf-8", "surrogateescape") + b"\n")
            self._proc.stdin.flush()
            header = self._proc.stdout.readline()
            if header.endswith(b" missing\n") or header.endswith(b" ambiguous\n"):
                return None
            parts = header.split()
            if len(parts) != 3:
                raise GitError(f"unexpected cat-file header {header!r}")
            size = int(parts[2])
            data = self._proc.stdout.read(size)
            self._proc.stdout.read(1)
            return data if parts[1] == b"blob" else None

    def close(self) -> None:
        self._finalizer()


class Repository:
    """Read-only handle on a repository, pinned to one head commit.

    Confine a handle to one thread or process; open one handle per worker.
    """

    BLAME_CACHE = 512
    DIFF_CACHE = 4096

    def __init__(self, path: str | os.PathLike, rev: str = "HEAD"):
        self.path = str(Path(path).resolve())
        self._cmd = [git_binary(), *_PINNED]
        if not Path(self.path).is_dir():
            raise NotARepo(f"{self.path} is not a directory")
        try:
            top = self._run("rev-parse", "--show-toplevel").strip()
        except GitError:
            try:
                self._run("rev-parse", "--git-dir")
                top = self.path
            except GitError:
                raise NotARepo(f"{self.path} is not a git repository") from None
        self.path = top or self.path
        head = self._rev_parse(rev)
        if head is None:
            if rev == "HEAD" and not self._run("rev-list", "--all", "-n", "1").strip():
                raise EmptyRepo(f"{self.path} has no commits")
            raise UnknownCommit(f"cannot resolve {rev!r}")
        self._commits: dict[str, CommitRef] = {}
        self._ancestors_loaded: set[str] = set()
        self._diffs: OrderedDict[str, DiffSet] = OrderedDict()
        self._blames: OrderedDict[tuple[str, str], list[BlameEntry]] = OrderedDict()
        self._blobs: OrderedDict[tuple[str, str], str | None] = OrderedDict()
        self._id_blob: str | None = None
        self._catfile: _CatFile | None = None
        self.head = self._load_one(head)

    # -- process plumbing
    def _run(self, *args: str, input: bytes | None = None, check: bool = True) -> str:
        return _decode(self._run_bytes(*args, input=input, check=check))

    def _run_bytes(self, *args: str, input: bytes | None = None, check: bool = True) -> bytes:
        proc = subprocess.run(
            self._cmd + list(args), cwd=self.path, env=git_env(), input=input,
            stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        )
        if check and proc.returncode != 0:
            raise GitError(f"git {' '.join(args[:3])} failed: {_decode(proc.stderr).strip()}")
        return proc.stdout

    def _rev_parse(self, rev: str) -> str | None:
        proc = subprocess.run(
            self._cmd + ["rev-parse", "--verify", "-q", f"{rev}^{{commit}}"],
            cwd=self.path, env=git_env(), stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
        )
        out = _decode(proc.stdout).strip()
        return out if proc.returncode == 0 and SHA_RE.match(out) else None

    def close(self) -> None:
        if self._catfile is not None:
            self._catfile.close()
            self._catfile = None

    def __enter__(self) -> "Repository":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __getstate__(self):
        raise TypeError("Repository handles are per-worker; pass the path instead")

    # -- commit metadata
    def _ingest_log(self, *revs: str) -> list[CommitRef]:
        args = ["log", "-z", "--format=%H%x00%ct%x00%P%x00%s"]
        fields = self._run(*args, *revs, "--").split("\0")
        out = []
        for i in range(0, len(fields) - 3, 4):
            sha, ts, parents, subject = fields[i:i + 4]
            sha = sha.lstrip("\n")
            ref = CommitRef(sha, int(ts), tuple(parents.split()), subject)
            self._commits[sha] = ref
            out.append(ref)
        return out

    LOAD_BATCH = 256

    def _load_one(self, sha: str) -> CommitRef:
        ref = self._commits.get(sha)
        if ref is None:
            # neighbours are usually asked for next, so take a bounded batch
            try:
                self._ingest_log(f"-n{self.LOAD_BATCH}", sha)
            except GitError:
                raise UnknownCommit(sha) from None
            ref = self._commits.get(sha)
            if ref is None:
                raise UnknownCommit(sha)
        return ref

    def _ensure_ancestry(self, sha: str) -> None:
        if sha in self._ancestors_loaded:
            return
        self._ingest_log(sha)
        self._ancestors_loaded.add(sha)

    def commit(self, rev: "str | CommitRef") -> CommitRef:
        """Resolve a revision (id, ref name or CommitRef) to a CommitRef."""
        if isinstance(rev, CommitRef):
            ref = self._commits.get(rev.id)
            if ref is not None:
                return ref
            rev = rev.id
        if SHA_RE.match(rev):
            if rev in self._commits:
                return self._commits[rev]
            if len(rev) == 40:
                return self._load_one(rev)
        sha = self._rev_parse(rev)
        if sha is None:
            raise UnknownCommit(f"unknown commit {rev!r}")
        return self._load_one(sha)

    def lookup(self, sha: str) -> CommitRef:
        ref = self._commits.get(sha)
        return ref if ref is not None else self._load_one(sha)

    def first_parent(self, rev: "str | CommitRef") -> CommitRef | None:
        c = self.commit(rev)
        return self.lookup(c.parents[0]) if c.parents else None

    # -- history enumeration
    def list_commits(self, until: "str | CommitRef | None" = None) -> list[CommitRef]:
        """All ancestors of ``until`` (inclusive), children before parents.

        Ready commits are emitted newest committer time first, ties broken
        by the smaller id, so the order is fully deterministic.
        """
        top = self.commit(until if until is not None else self.head)
        self._ensure_ancestry(top.id)
        members: dict[str, CommitRef] = {}
        stack = [top.id]
        while stack:
            sha = stack.pop()
            if sha in members:
                continue
            ref = self._commits.get(sha) or self._load_one(sha)
            members[sha] = ref
            stack.extend(p for p in ref.parents if p not in members)
        pending = {sha: 0 for sha in members}
        for ref in members.values():
            for p in set(ref.parents):
                pending[p] += 1
        heap = [(-top.timestamp, top.id)]
        order: list[CommitRef] = []
        while heap:
            _, sha = heapq.heappop(heap)
            ref = members[sha]
            order.append(ref)
            for p in set(ref.parents):
                pending[p] -= 1
                if pending[p] == 0:
                    heapq.heappush(heap, (-members[p].timestamp, p))
        return order

    def iter_messages(self, until: "str | CommitRef | None" = None) -> Iterator[tuple[CommitRef, str]]:
        """Yield (commit, full message) for every ancestor of ``until``."""
        top = self.commit(until if until is not None else self.head)
        self._ensure_ancestry(top.id)
        proc = subprocess.Popen(
            self._cmd + ["log", "--format=%x1e%H%x1f%B", top.id, "--"],
            cwd=self.path, env=git_env(), stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
        )
        buf = b""
        try:
            while True:
                chunk = proc.stdout.read(1 << 16)
                if not chunk:
                    break
                buf += chunk
                *records, buf = buf.split(b"\x1e")
                for rec in records:
                    if rec:
                        yield self._message_record(rec)
            if buf:
                yield self._message_record(buf)
        finally:
            proc.stdout.close()
            proc.wait()

    def _message_record(self, rec: bytes) -> tuple[CommitRef, str]:
        sha, _, body = _decode(rec).partition("\x1f")
        return self.lookup(sha), body.rstrip("\n") + "\n" if body.strip() else ""

    def message(self, rev: "str | CommitRef") -> str:
        c = self.commit(rev)
        return self._run("log", "-1", "--format=%B", c.id, "--").rstrip("\n") + "\n"

    # -- partial ids
    def resolve_partial_id(self, partial: str) -> list[CommitRef]:
        """Every commit whose full id contains ``partial`` anywhere.

        Deliberately a substring search rather than a prefix lookup so that
        ids missing leading characters still resolve.
        """
        if not isinstance(partial, str) or not PARTIAL_RE.match(partial):
            raise MalformedPartial(f"not a 7-40 digit lowercase hex string: {partial!r}")
        if self._id_blob is None:
            self._id_blob = "\n".join(sorted(c.id for c in self.list_commits(self.head))) + "\n"
        blob = self._id_blob
        found: set[str] = set()
        pos = blob.find(partial)
        while pos != -1:
            start = blob.rfind("\n", 0, pos) + 1
            found.add(blob[start:start + 40])
            pos = blob.find(partial, pos + 1)
        return [self.lookup(sha) for sha in sorted(found)]

    # -- file contents
    def _cat(self) -> _CatFile:
        if self._catfile is None:
            self._catfile = _CatFile(self._cmd, self.path)
        return self._catfile

    def file_text(self, rev: "str | CommitRef", path: str) -> str | None:
        """Contents of ``path`` at ``rev`` or None when absent."""
        c = self.commit(rev)
        key = (c.id, path)
        if key in self._blobs:
            self._blobs.move_to_end(key)
            return self._blobs[key]
        data = self._cat().read(f"{c.id}:{path}")
        text = None if data is None else _decode(data)
        self._blobs[key] = text
        if len(self._blobs) > self.BLAME_CACHE:
            self._blobs.popitem(last=False)
        return text

    def file_lines(self, rev: "str | CommitRef", path: str) -> list[str]:
        text = self.file_text(rev, path)
        if text is None:
            raise NoSuchPathAtCommit(f"{path} does not exist at {self.commit(rev).short}")
        return split_lines(text)

    # -- diffs
    def commit_diff(self, rev: "str | CommitRef") -> DiffSet:
        """Diff of a commit against its first parent (empty tree for roots).

        Merge commits yield an empty DiffSet.
        """
        c = self.commit(rev)
        cached = self._diffs.get(c.id)
        if cached is not None:
            self._diffs.move_to_end(c.id)
            return cached
        if c.is_merge:
            ds = DiffSet(c)
        else:
            out = self._run("diff-tree", *_DIFF_OPTS, "--root", "--no-commit-id", c.id)
            ds = DiffSet(c, tuple(parse_unified_diff(out)))
        self._store_diff(ds)
        return ds

    def _store_diff(self, ds: DiffSet) -> None:
        self._diffs[ds.commit.id] = ds
        if len(self._diffs) > self.DIFF_CACHE:
            self._diffs.popitem(last=False)

    def prefetch_diffs(self, commits: Iterable["str | CommitRef"]) -> None:
        """Load many diffs with a single git process."""
        todo = []
        for rev in commits:
            c = self.commit(rev)
            if c.id in self._diffs:
                continue
            if c.is_merge:
                self._store_diff(DiffSet(c))
            else:
                todo.append(c)
        if not todo:
            return
        out = self._run("diff-tree", *_DIFF_OPTS, "--root", "--stdin",
                        input="".join(c.id + "\n" for c in todo).encode())
        chunks: dict[str, list[str]] = {}
        current = None
        for raw in out.split("\n"):
            if SHA_RE.match(raw):
                current = raw
                chunks[current] = []
            elif current is not None:
                chunks[current].append(raw)
        for c in todo:
            files = parse_unified_diff("\n".join(chunks.get(c.id, [])))
            self._store_diff(DiffSet(c, tuple(files)))

    def diff_between(self, old: "str | CommitRef", new: "str | CommitRef") -> list[FileDiff]:
        """Tree diff between two arbitrary commits (rename detection on)."""
        a, b = self.commit(old), self.commit(new)
        return parse_unified_diff(self._run("diff-tree", *_DIFF_OPTS, a.id, b.id))

    # -- blame
    def blame_file(self, rev: "str | CommitRef", path: str) -> list[BlameEntry]:
        """Blame every line of ``path`` as of ``rev`` itself (renames followed)."""
        c = self.commit(rev)
        key = (c.id, path)
        cached = self._blames.get(key)
        if cached is not None:
            self._blames.move_to_end(key)
            return cached
        if self.file_text(c, path) is None:
            raise NoSuchPathAtCommit(f"{path} does not exist at {c.short}")
        out = self._run("blame", "--line-porcelain", c.id, "--", path)
        entries = parse_line_porcelain(out, self.lookup)
        self._blames[key] = entries
        if len(self._blames) > self.BLAME_CACHE:
            self._blames.popitem(last=False)
        return entries

    def blame_at(self, rev: "str | CommitRef", path: str, line: int) -> BlameEntry:
        entries = self.blame_file(rev, path)
        if not 1 <= line <= len(entries):
            raise LineOutOfRange(f"{path}:{line} outside 1..{len(entries)}")
        return entries[line - 1]

    def blame_line(self, at: "str | CommitRef", path: str, line: int) -> BlameEntry:
        """Last commit before ``at`` that introduced or modified the line.

        ``path`` and ``line`` address the file as of ``at``'s first parent,
        which is how removed lines of ``at`` are numbered.
        """
        c = self.commit(at)
        parent = self.first_parent(c)
        if parent is None:
            raise NoSuchPathAtCommit(f"{c.short} is a root commit; nothing to blame")
        return self.blame_at(parent, path, line)

    # -- logs
    def log_line_range(self, path: str, start: int, end: int,
                       from_rev: "str | CommitRef | None" = None) -> list[CommitRef]:
        """Commits that touched an evolving line range, newest first.

        Same semantics as ``git log -L<start>,<end>:<path> <from>``.
        """
        c = self.commit(from_rev if from_rev is not None else self.head)
        n = len(self.file_lines(c, path))
        if start < 1 or end < start or end > n:
            raise RangeInvalid(f"{path}:{start},{end} invalid for a {n}-line file")
        out = self._run("log", f"-L{start},{end}:{path}", "--format=%x1eC %H", c.id)
        return [self.lookup(m) for m in re.findall(r"^\x1eC ([0-9a-f]{40})$", out, re.M)]

    def file_history(self, path: str, from_rev: "str | CommitRef | None" = None) -> list[CommitRef]:
        """Commits touching ``path`` (following renames), newest first."""
        c = self.commit(from_rev if from_rev is not None else self.head)
        if self.file_text(c, path) is None:
            raise NoSuchPathAtCommit(f"{path} does not exist at {c.short}")
        out = self._run("log", "--follow", "--format=%H", c.id, "--", path)
        return [self.lookup(s) for s in out.split() if SHA_RE.match(s)]

    def line_counts(self, until: "str | CommitRef | None" = None) -> dict[str, tuple[int, int]]:
        """(added, removed) text-line counts for every ancestor of ``until``.

        One ``log --numstat`` pass; merges report (0, 0) like commit_diff.
        """
        top = self.commit(until if until is not None else self.head)
        out = self._run("-c", "log.showRoot=true", "log", "--numstat", "-M50%", "--no-color",
                        "--format=%x1e%H", top.id, "--")
        counts: dict[str, tuple[int, int]] = {}
        for rec in out.split("\x1e"):
            rows = rec.strip("\n").split("\n")
            if not rows or not SHA_RE.match(rows[0]):
                continue
            added = removed = 0
            for row in rows[1:]:
                a, _, rest = row.partition("\t")
                r, _, _ = rest.partition("\t")
                if a.isdigit() and r.isdigit():
                    added += int(a)
                    removed += int(r)
            counts[rows[0]] = (added, removed)
        return counts

    def path_exists(self, rev: "str | CommitRef", path: str) -> bool:
        return self.file_text(rev, path) is not None


def map_new_to_old(fdiff: FileDiff, line: int) -> tuple[int | None, Hunk | None]:
    """Map a new-side line number through a diff.

    Returns (old line, None) for an unchanged line, or (None, hunk) when the
    line was added by ``hunk``.
    """
    delta = 0
    for h in fdiff.hunks:
        if h.added:
            first, last = h.added[0].line, h.added[-1].line
            if line < first:
                break
            if line <= last:
                return None, h
            delta += len(h.removed) - len(h.added)
        else:
            if line < h.new_start:
                break
            delta += len(h.removed)
    return line + delta, None


def split_lines(text: str) -> list[str]:
    """Split file text the way diff and blame number lines."""
    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    return lines


def open_repo(path: str | os.PathLike, rev: str = "HEAD") -> Repository:
    return Repository(path, rev)


def ids(commits: Iterable[CommitRef]) -> list[str]:
    return sorted(c.id for c in commits)


def canonical(commits: Iterable[CommitRef]) -> tuple[CommitRef, ...]:
    """Sort commits into the canonical (by id) serialization order."""
    return tuple(sorted(set(commits), key=lambda c: c.id))


__all__: Sequence[str] = (
    "BlameEntry", "CommitRef", "DiffSet", "FileDiff", "Hunk", "LineChange",
    "Repository", "canonical", "open_repo", "parse_unified_diff", "split_lines",
)
