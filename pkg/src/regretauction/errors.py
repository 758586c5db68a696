"""Exception hierarchy for the toolkit.

All input-contract violations derive from :class:`InputError` (a ValueError),
so callers can catch one type at API boundaries; numerical breakdowns in the
LP solver derive from :class:`NumericalFailure`.
"""


class RegretAuctionError(Exception):
    """Base class for all toolkit errors."""


class InputError(RegretAuctionError, ValueError):
    """An argument violates a documented precondition."""


class NegativeBoundError(InputError):
    """An upper-bound matrix entry is negative."""


class NonFiniteBoundError(InputError):
    """An upper-bound matrix entry is NaN or infinite."""


class AllZeroBoundsError(InputError):
    """Every upper bound is zero; the market is trivial."""


class ProfileOutOfBoundsError(InputError):
    """A value profile entry lies outside [0, upper bound]."""


class NonPositiveScaleError(InputError):
    """Scale factor must be a positive finite real."""


class NotSingleBidderError(InputError):
    """Mechanism requires a single-bidder market."""


class ShapeMismatchError(InputError):
    """Config shape incompatible with the requested mechanism."""


class QuantileRangeError(InputError):
    """Quantile argument outside [0, 1] or non-positive upper bound."""


class DimensionTooLargeError(InputError):
    """Tensor-grid quadrature limited to four effective dimensions."""


class TooFewCellsError(InputError):
    """Quantile discretization needs at least four continuous cells."""


class SymmetryRequiredError(InputError):
    """Operation requires identical bounds across bidders for every good."""


class NumericalFailure(RegretAuctionError):
    """The LP solver failed to converge or lost conditioning."""
