"""Exception types raised by the analytic model, numerics and simulator."""


class DomainError(ValueError):
    """A parameter lies outside the domain of the model."""


class NotPositiveRecurrent(DomainError):
    """The HOL-packet chain is not positive recurrent (p + q <= 1 with an unbounded phase)."""


class Divergent(ArithmeticError):
    """A quantity that depends on a divergent geometric sum was requested."""


class Unstable(ArithmeticError):
    """The Geo/G/1 input queue is saturated (lambda * E[X] >= 1)."""


class WalkCapExceeded(RuntimeError):
    """A Monte-Carlo service-time walk ran past its mini-slot cap."""


class NoBracket(ValueError):
    """The supplied interval does not bracket a sign change."""


class Infeasible(ValueError):
    """The requested throughput exceeds the maximum of the throughput curve."""


class NoSolution(ValueError):
    """No retransmission factor in (0, 1) satisfies the attempt-rate equation."""
