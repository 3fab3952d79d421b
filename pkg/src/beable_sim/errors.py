"""Exception hierarchy shared by all beable_sim modules.

The CLI maps these onto its exit-code contract: validation problems exit
with 1, numeric/node failures with 2 (verification check failures, which
are reported rather than raised, exit with 3).
"""

from __future__ import annotations


class BeableSimError(Exception):
    """Base class for all errors raised by this package."""


class InputError(BeableSimError):
    """Invalid input: dimension mismatch, broken invariant, bad config."""

    exit_code = 1


class ConfigError(InputError):
    """One or more model-config validation failures, reported together."""

    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class NumericError(BeableSimError):
    """Numerical failure: integrator escape, step underflow, non-convergence."""

    exit_code = 2


class NodeError(NumericError):
    """Velocity evaluation hit a (near-)node where P <= node_floor.

    Carries the offending cell tuple, the probability value, and the time
    so node aborts stay diagnosable.
    """

    def __init__(self, cells, probability, time):
        self.cells = tuple(int(c) for c in cells)
        self.probability = float(probability)
        self.time = float(time)
        super().__init__(
            f"probability {self.probability:.3e} at cells {self.cells} "
            f"(t={self.time:.6g}) is at or below the node floor"
        )
