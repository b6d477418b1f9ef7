"""Exception hierarchy.

Every library error is either a :class:`DataError` (bad input, broken
invariants) or a :class:`TransportError` (remote judge unreachable). The CLI
maps the two families to distinct exit codes.
"""


class TraceXAIError(Exception):
    pass


class DataError(TraceXAIError):
    pass


class TransportError(TraceXAIError):
    pass


class MalformedRecord(DataError):
    def __init__(self, line_no, reason):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class DuplicateRunId(DataError):
    def __init__(self, run_id):
        self.run_id = run_id
        super().__init__(f"duplicate run_id {run_id!r}")


class MissingOutcome(DataError):
    def __init__(self, run_id):
        self.run_id = run_id
        super().__init__(f"no outcome for run_id {run_id!r}")


class EmptyMatrix(DataError):
    pass


class DegenerateOutcomeClass(DataError):
    pass


class CorpusMismatch(DataError):
    pass


class InvalidFaultSpec(DataError):
    pass


class OrdinalOutOfRange(DataError):
    pass


class JudgeParse(DataError):
    def __init__(self, reason):
        self.reason = reason
        super().__init__(f"judge reply rejected: {reason}")


class JudgeTransport(TransportError):
    def __init__(self, status, detail=""):
        self.status = status
        super().__init__(f"judge endpoint failed (status={status}) {detail}".rstrip())


class DimensionMismatch(DataError):
    pass


class EmptyVocabulary(DataError):
    pass


class SingleClassInput(DataError):
    pass


class DegenerateInstance(DataError):
    pass


class LengthMismatch(DataError):
    pass


class UndefinedCorrelation(DataError):
    """Spearman correlation is undefined when either ranking is constant."""


class InvariantViolation(DataError):
    pass


class DanglingStepReference(DataError):
    pass


class SchemaVersionMismatch(DataError):
    pass


class MalformedPacket(DataError):
    pass
