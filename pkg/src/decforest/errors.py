"""Exception hierarchy shared by all decforest structures."""


class DecforestError(Exception):
    """Base class for all errors raised by this package."""


class CycleDetected(DecforestError):
    """The given parent relation contains a cycle."""


class IndexOutOfRange(DecforestError):
    """A vertex id is outside 0..n-1."""


class IllegalOperation(DecforestError):
    """An operation violates trace legality for the current forest."""


class NoParent(DecforestError):
    """cut(v) was called on a vertex without a live parent edge."""


class AuxiliaryVertex(DecforestError):
    """An operation targeted an auxiliary vertex."""


class NotBinary(DecforestError):
    """A structure requiring a binary forest was given a vertex with >2 children."""


class NotATree(DecforestError):
    """A single tree was required but the input has several roots."""


class WordOverflow(DecforestError):
    """A packed encoding does not fit the configured word budget."""


class NonBinaryWeight(DecforestError):
    """A 0-1-weighted structure was given a weight outside {0, 1}."""


class CapExceeded(DecforestError):
    """A configured size cap (table entries, search bounds) was exceeded."""


class NegativeWeight(DecforestError):
    """decrement_weight(v) was called while w(v) is already zero."""


class TooLarge(DecforestError):
    """The input exceeds the structure's capacity for its parameters."""


class ValueOutOfRange(DecforestError):
    """A workload array value lies outside its admissible range."""


class InvariantBroken(DecforestError):
    """An internal invariant failed; indicates a bug, not bad input."""


class DoubleFlip(DecforestError):
    """A parity workload index was flipped more than once."""


class OutOfOrderUpdate(DecforestError):
    """Block partial-sum updates must arrive in position order 1..s."""


class TraceParseError(DecforestError):
    """A trace file line could not be parsed."""

    def __init__(self, message, line_no=None):
        super().__init__(f"line {line_no}: {message}" if line_no else message)
        self.line_no = line_no


class IllegalSequence(DecforestError):
    """An operation sequence is not playable on the given computation tree."""


class NondeterministicStructure(DecforestError):
    """A structure produced different op traces across replays of one prefix."""
