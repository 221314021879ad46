"""Exception hierarchy shared by every stage of the pipeline."""


class AmthaError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(AmthaError):
    """A document could not be decoded or does not follow its schema."""


class GraphError(AmthaError):
    pass


class DanglingReferenceError(GraphError):
    def __init__(self, ref: str, context: str = ""):
        self.ref = ref
        msg = f"unknown subtask {ref!r}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class CycleError(GraphError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("precedence cycle: " + " -> ".join(self.cycle))


class MissingTimeError(GraphError):
    def __init__(self, subtask: str, processor_type: str):
        self.subtask = subtask
        self.processor_type = processor_type
        super().__init__(
            f"subtask {subtask!r} has no execution time for processor type {processor_type!r}"
        )


class TopologyError(AmthaError):
    pass


class ScheduleError(AmthaError):
    """A schedule is incomplete or violates a validity rule."""


class SimulationError(AmthaError):
    pass


class OracleCapError(AmthaError):
    """Instance too large for exhaustive enumeration."""


class SpecError(AmthaError):
    """Invalid workload specification."""
