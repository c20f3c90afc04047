"""Exception hierarchy shared by every cookir module."""


class CookirError(Exception):
    """Base class for domain errors (CLI exit status 1)."""


class UncanonicalizedEntity(CookirError):
    def __init__(self, kind, value):
        super().__init__(f"{kind.value} term {value!r} is not in the vocabulary")
        self.kind = kind
        self.value = value


class MalformedSequence(CookirError):
    def __init__(self, position, message):
        super().__init__(f"malformed token sequence at position {position}: {message}")
        self.position = position


class VocabularyError(CookirError):
    pass


class InvalidProgram(CookirError):
    def __init__(self, report):
        lines = "; ".join(str(d) for d in report.diagnostics)
        super().__init__(f"invalid program: {lines}")
        self.report = report


class GraphError(CookirError):
    pass


class CyclicGraph(GraphError):
    pass


class MultipleSinks(GraphError):
    pass


class CapExceeded(CookirError):
    def __init__(self, cap, total_estimate):
        msg = f"more than {cap} linear extensions"
        if total_estimate is not None:
            msg += f" (exact count {total_estimate})"
        super().__init__(msg)
        self.cap = cap
        self.total_estimate = total_estimate


class TooLarge(CookirError):
    pass


class NotAPermutation(CookirError):
    pass


class AnnotationError(CookirError):
    pass


class CyclicConnections(AnnotationError):
    pass


class ForwardConnection(AnnotationError):
    pass


class AmbiguousConnection(AnnotationError):
    pass


class DimensionMismatch(CookirError):
    pass


class TooLargeForExact(CookirError):
    pass


class PoolTooLarge(CookirError):
    pass


class ZeroVector(CookirError):
    pass


class LengthMismatch(CookirError):
    pass


class EmptyCandidateSet(CookirError):
    pass


class InvalidDistribution(CookirError):
    pass
