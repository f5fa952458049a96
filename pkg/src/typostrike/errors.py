"""Exception types shared across the package."""


class TypostrikeError(Exception):
    """Base class for every error raised by this package."""


class CorpusError(TypostrikeError):
    """A corpus file or in-memory corpus is malformed or unusable."""


class EmptyClassError(CorpusError):
    """A class ended up with zero retained word tokens after filtering."""


class UnknownWordError(TypostrikeError):
    """A score lookup was made for a word outside the table vocabulary."""


class IllegalPerturbationError(TypostrikeError):
    """A perturbation does not satisfy its preconditions for the given text."""


class BudgetExhaustedError(TypostrikeError):
    """A query ledger refused a call that would exceed its hard limit."""


class TransportError(TypostrikeError):
    """The remote victim could not be reached, or answered with an error."""


class MalformedResponseError(TransportError):
    """The remote victim answered with a payload we cannot interpret."""
