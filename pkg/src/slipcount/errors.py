"""Exception hierarchy shared by every pipeline stage.

All domain errors derive from :class:`SlipCountError` so callers (and the
CLI) can distinguish data/validation failures from genuine bugs.
"""


class SlipCountError(Exception):
    """Base class for all domain errors raised by this package."""


# registry / dataset
class InvalidImage(SlipCountError):
    """Image is empty, undecodable, or has the wrong dimensions."""


class DuplicateParty(SlipCountError):
    """A party with this name is already registered."""


class EmptyRegistry(SlipCountError):
    """Operation requires at least one registered party."""


class InvalidFraction(SlipCountError):
    """Train fraction must lie strictly between 0 and 1."""


# classifier
class EmptyTrainingSet(SlipCountError):
    """Cannot fit a model on zero training items."""


class EmptyModel(SlipCountError):
    """Model has no classes."""


class UnknownLabel(SlipCountError):
    """A test label is absent from the model's class set."""


# tally / audit
class BatchTooLarge(SlipCountError):
    """A per-machine batch may hold at most 1500 slips."""


class MixedEvm(SlipCountError):
    """All slips in one batch must share a single evm_id."""


class UnknownSlip(SlipCountError):
    """slip_id not present in the review queue."""


class AlreadyAdjudicated(SlipCountError):
    """Each queued slip can be decided exactly once."""


class UnresolvedQueue(SlipCountError):
    """Reconciliation requires an empty review queue."""


class UnsortedInput(SlipCountError):
    """Timestamps must be sorted non-decreasing."""


class MissingTimestamp(SlipCountError):
    """Operation requires a timestamp on every slip."""


class ManifestError(SlipCountError):
    """A manifest file is malformed or violates its invariants."""


# throughput simulation
class TooFewUnits(SlipCountError):
    """Fewer counting units than counting centers."""


# adjudication service
class DuplicateBatch(SlipCountError):
    """This manifest (by content digest) was already loaded."""


class UnknownTask(SlipCountError):
    """task_id does not exist."""


class NotClaimant(SlipCountError):
    """Decision submitted by a worker that does not hold the claim."""


class AlreadyDecided(SlipCountError):
    """Task already carries a terminal decision."""
