"""Exception types raised across the package."""


class ReplearnError(ValueError):
    """Base class for domain errors (bad instances, unsupported inputs)."""


class InvalidInstance(ReplearnError):
    pass


class NonUniqueOptimum(ReplearnError):
    pass


class OptimalArmConstraint(ReplearnError):
    """A constraint was requested for an optimal context-arm pair."""


class Unrealizable(ReplearnError):
    """No representation in the set realizes the reward table."""


class NotFullyRealizable(ReplearnError):
    """Some representation in a set assumed fully realizable is misspecified."""


class InfeasibleAtCap(ReplearnError):
    """The allocation program has no solution with optimal-arm mass bounded by M."""


class OracleTooLarge(ReplearnError):
    pass


class TooFewPolicies(ReplearnError):
    pass
