"""Exception hierarchy shared by all saccadic modules."""


class SaccadicError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SaccadicError, ValueError):
    """Input data violates a documented precondition."""


class ParseError(ValidationError):
    """A fixation log line could not be parsed.

    Parameters
    ----------
    message : str
        Human-readable reason.
    line : int
        1-based line number in the source text (header is line 1).
    """

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigurationError(ValidationError):
    """A numeric parameter is out of its admissible range."""


class EstimationError(SaccadicError):
    """Not enough usable data to estimate a distribution."""


class StarvedCellError(EstimationError):
    """One or more cells of the spatial grid received too few saccades.

    ``counts`` maps ``(row, col)`` to the number of usable saccades found.
    """

    def __init__(self, starved, counts, minimum):
        self.starved = list(starved)
        self.counts = dict(counts)
        self.minimum = minimum
        cells = ", ".join(f"({i},{j})={counts[(i, j)]}" for i, j in self.starved)
        super().__init__(
            f"{len(self.starved)} starved cell(s) with fewer than {minimum} usable saccades: {cells}"
        )


class DegenerateMapError(SaccadicError):
    """The transition probability vanished over the whole image."""


class MetricError(SaccadicError, ValueError):
    """A metric is undefined for the given inputs (constant or empty map)."""
