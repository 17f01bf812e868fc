"""Exception hierarchy for the rpotent package.

Errors are split into three severities: plain precondition/usage errors
(``ValueError`` family), structural violations that indicate the input
operator does not have the promised algebraic structure, and
``ConsistencyFault``, raised only when two independent computations
contradict each other.
"""

from __future__ import annotations


class RPotentError(Exception):
    """Base class for all package-specific errors."""


class SpaceMismatchError(RPotentError, ValueError):
    """Two objects that must live on the same measure space do not."""


class ZeroFunctionError(RPotentError, ValueError):
    """An operation received a numerically zero function it cannot handle."""


class DependenceError(RPotentError, ValueError):
    """Two functions required to be linearly independent are proportional."""


class InvalidOperatorError(RPotentError, ValueError):
    """Operator failed validation (nonnegativity or potency) where a
    validated operator is required."""


class RangeSplitError(RPotentError):
    """A positive/negative part of a range element is not itself fixed by
    the range projector.  Signals that the kernel contains a nonnegative
    element, so the kernel-witness route applies instead."""


class BasisLossError(RPotentError):
    """A candidate set that must span the range space does not."""


class BudgetExceededError(RPotentError):
    """The orthogonalization loop exceeded its step budget."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class SingleImageError(RPotentError):
    """The image of a basis function has more than one significant
    coefficient on a disjoint-support nonnegative basis."""


class KernelRouteError(RPotentError):
    """A basis image vanished; the kernel contains a nonnegative element
    and the caller should use the kernel-witness route."""


class PotencyStructureError(RPotentError):
    """The cycle structure of the transition permutation is incompatible
    with the declared potency."""


class DegenerateWitnessError(RPotentError):
    """A constructed candidate set is empty or the whole space and thus
    cannot witness a decomposition."""


class OracleLimitError(RPotentError):
    """The exhaustive oracle was asked to enumerate more atoms than its
    configured limit allows."""


class ConfigError(RPotentError, ValueError):
    """Invalid generator or tolerance configuration."""


class ConsistencyFault(RPotentError):
    """Two routes that must agree (e.g. a constructive certificate and the
    exhaustive oracle) disagree.  Highest-severity error in the package."""
