"""Exception hierarchy shared by every module.

Each error carries the CLI exit code it maps to.
"""


class CflError(Exception):
    exit_code = 1


class ParseError(CflError):
    exit_code = 2

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


class ValidationError(CflError):
    exit_code = 2


class CycleError(ValidationError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("dependency cycle: " + " -> ".join(self.cycle))


class InterventionError(CflError):
    exit_code = 3


class ZeroEvidenceError(CflError):
    exit_code = 4

    def __init__(self, probability=0.0):
        self.probability = probability
        super().__init__(f"evidence has probability {probability}")


class EvidenceOnDescendant(CflError):
    """Evidence on an atom downstream of an intervened atom (single-world guard)."""

    exit_code = 5

    def __init__(self, atom, ancestor):
        self.atom = atom
        self.ancestor = ancestor
        super().__init__(
            f"evidence atom {atom} is a descendant of intervened atom {ancestor}; "
            "use the twin evaluator for this query"
        )


class ResourceLimitError(CflError):
    exit_code = 6
