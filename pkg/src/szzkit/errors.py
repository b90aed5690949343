"""Exception hierarchy shared by every szzkit module."""


class SZZError(Exception):
    """Base class for all szzkit errors."""


# git facade
class GitError(SZZError):
    pass


class NotARepo(GitError):
    pass


class EmptyRepo(GitError):
    pass


class UnknownCommit(GitError):
    pass


class NoSuchPathAtCommit(GitError):
    pass


class LineOutOfRange(GitError):
    pass


class RangeInvalid(GitError):
    pass


class MalformedPartial(GitError, ValueError):
    pass


# fixtures
class ScriptInvalid(SZZError, ValueError):
    pass


class IoFailure(SZZError, OSError):
    pass


# mining
class Ambiguous(SZZError):
    def __init__(self, partial, candidates):
        self.partial = partial
        self.candidates = list(candidates)
        ids = ", ".join(c.id[:12] for c in self.candidates)
        super().__init__(f"partial id {partial!r} matches several commits: {ids}")


# algorithms / classification / metrics
class LineNotRemovedByFix(SZZError, ValueError):
    pass


class MismatchedFix(SZZError, ValueError):
    pass


class PreconditionViolated(SZZError):
    pass


class UnparsableFile(SZZError):
    pass


class MissingContext(SZZError, ValueError):
    pass


class DegenerateVariance(SZZError, ArithmeticError):
    pass
