"""Exception types raised across the package.

Every error derives from :class:`CbeError` so callers (and the CLI) can catch
one base class. Most also subclass ``ValueError`` since they signal bad input.
"""


class CbeError(Exception):
    """Base class for all package errors."""


# corpus


class MalformedRow(CbeError, ValueError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        self.reason = reason
        msg = f"malformed row at line {line_no}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class DuplicateId(CbeError, ValueError):
    def __init__(self, post_id: str):
        self.post_id = post_id
        super().__init__(f"duplicate post id {post_id!r}")


class EmptyCorpus(CbeError, ValueError):
    pass


class UnknownTask(CbeError, KeyError):
    def __init__(self, task: str):
        self.task = task
        super().__init__(f"unknown or absent task {task!r}")

    def __str__(self) -> str:
        return self.args[0]


class BothEmpty(CbeError, ValueError):
    pass


# knowledge graph


class ParseError(CbeError, ValueError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class InvalidQid(CbeError, ValueError):
    def __init__(self, qid: str):
        self.qid = qid
        super().__init__(f"invalid Wikidata identifier {qid!r}")


# linking


class RemoteLinkerError(CbeError):
    """Any remote-linker failure. Callers should fall back to the gazetteer."""


class NetworkError(RemoteLinkerError):
    pass


class BadResponse(RemoteLinkerError):
    pass


class LinkerTimeout(RemoteLinkerError):
    pass


# embeddings


class EmptyAfterFiltering(CbeError, ValueError):
    pass


class DimensionMismatch(CbeError, ValueError):
    pass


class NoSentences(CbeError, ValueError):
    pass


# learning and evaluation


class SingleClass(CbeError, ValueError):
    pass


class NonFiniteFeatures(CbeError, ValueError):
    pass


class TooFewMinority(CbeError, ValueError):
    pass


class EmptyMatrix(CbeError, ValueError):
    pass


class LengthMismatch(CbeError, ValueError):
    pass


class TooShort(CbeError, ValueError):
    pass


class ZeroVariance(CbeError, ValueError):
    pass


class EmptyGrid(CbeError, ValueError):
    pass


class UnknownSeed(UserWarning):
    """Issued when a walk seed does not occur in the graph; the seed gets no walks."""

    def __init__(self, iri: str):
        self.iri = iri
        super().__init__(f"seed {iri!r} not present in graph")
