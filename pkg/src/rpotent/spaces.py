"""Finite discrete measure spaces and real functions on them.

A space is a finite set of atoms with strictly positive weights; a function
is a real coordinate vector over the atoms.  The weighted inner product
``<f, g> = sum_i f_i g_i mu_i`` makes two nonnegative functions orthogonal
exactly when their supports are disjoint, which is the property everything
downstream is built on.

Supports are tolerance-relative: atom ``i`` belongs to the support of ``f``
when ``|f_i| > tol_support * max_j |f_j|``.  Scaling a function therefore
never changes its support.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SpaceMismatchError, ZeroFunctionError


@dataclass(frozen=True)
class ToleranceConfig:
    """Thresholds for the four kinds of numerical decisions the package makes.

    tol_support: relative cut below which a coordinate counts as zero.
    tol_potency: residual bound for ``A^r = A`` style identities.
    tol_rank:    singular-value / pivot threshold for rank decisions.
    tol_orth:    inner-product bound for declared orthogonality.
    """

    tol_support: float = 1e-9
    tol_potency: float = 1e-8
    tol_rank: float = 1e-10
    tol_orth: float = 1e-9

    def __post_init__(self):
        for name in ("tol_support", "tol_potency", "tol_rank", "tol_orth"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise ConfigError(f"{name} must lie strictly between 0 and 1, got {value}")


DEFAULT_TOLERANCES = ToleranceConfig()


@dataclass(frozen=True)
class DiscreteMeasureSpace:
    """Finite atom set with strictly positive weights.

    Zero or negative atom weights are rejected outright: with every atom
    carrying positive measure, "almost everywhere" statements become
    pointwise statements and no measure-zero bookkeeping is needed.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ConfigError("weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(w)):
            raise ConfigError("weights must be finite")
        if np.any(w <= 0.0):
            raise ConfigError("all atom weights must be strictly positive")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def atom_count(self) -> int:
        return int(self.weights.size)

    @property
    def total_measure(self) -> float:
        return float(self.weights.sum())

    def measure(self, atoms) -> float:
        """Total weight of a set of atom indices."""
        idx = sorted(atoms)
        return float(self.weights[idx].sum()) if idx else 0.0

    def function(self, coords) -> "MeasurableFunction":
        return MeasurableFunction(np.asarray(coords, dtype=float), self)

    def indicator(self, atoms) -> "MeasurableFunction":
        coords = np.zeros(self.atom_count)
        coords[sorted(atoms)] = 1.0
        return self.function(coords)

    def __eq__(self, other):
        return isinstance(other, DiscreteMeasureSpace) and np.array_equal(
            self.weights, other.weights
        )

    def __hash__(self):
        return hash(self.weights.tobytes())


@dataclass(frozen=True)
class MeasurableFunction:
    """Real-valued function on a discrete measure space."""

    coords: np.ndarray
    space: DiscreteMeasureSpace

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 1:
            raise ConfigError("coordinates must form a 1-d array")
        if c.size != self.space.atom_count:
            raise SpaceMismatchError(
                f"function has {c.size} coordinates but the space has "
                f"{self.space.atom_count} atoms"
            )
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    # -- vector-space arithmetic ------------------------------------------

    def _check_same_space(self, other: "MeasurableFunction") -> None:
        if self.space != other.space:
            raise SpaceMismatchError("functions live on different measure spaces")

    def __add__(self, other: "MeasurableFunction") -> "MeasurableFunction":
        self._check_same_space(other)
        return MeasurableFunction(self.coords + other.coords, self.space)

    def __sub__(self, other: "MeasurableFunction") -> "MeasurableFunction":
        self._check_same_space(other)
        return MeasurableFunction(self.coords - other.coords, self.space)

    def __mul__(self, scalar: float) -> "MeasurableFunction":
        return MeasurableFunction(self.coords * float(scalar), self.space)

    __rmul__ = __mul__

    def __neg__(self) -> "MeasurableFunction":
        return MeasurableFunction(-self.coords, self.space)

    # -- metric structure --------------------------------------------------

    def norm(self) -> float:
        """Weighted L2 norm."""
        return float(np.sqrt(inner_product(self, self)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.coords))) if self.coords.size else 0.0

    def normalized(self) -> "MeasurableFunction":
        n = self.norm()
        if n == 0.0:
            raise ZeroFunctionError("cannot normalize the zero function")
        return self * (1.0 / n)

    def restrict(self, atoms: "AtomSet") -> "MeasurableFunction":
        """Zero out every coordinate outside the given atom set."""
        coords = np.zeros_like(self.coords)
        idx = sorted(atoms.members)
        coords[idx] = self.coords[idx]
        return MeasurableFunction(coords, self.space)

    def is_zero(self, cfg: ToleranceConfig = DEFAULT_TOLERANCES) -> bool:
        return len(support(self, cfg).members) == 0


@dataclass(frozen=True)
class AtomSet:
    """Subset of the atoms of a measure space, with set algebra."""

    members: frozenset
    space: DiscreteMeasureSpace

    def __post_init__(self):
        members = frozenset(int(i) for i in self.members)
        n = self.space.atom_count
        if any(i < 0 or i >= n for i in members):
            raise ConfigError(f"atom indices must lie in [0, {n})")
        object.__setattr__(self, "members", members)

    @property
    def measure(self) -> float:
        return self.space.measure(self.members)

    def __len__(self):
        return len(self.members)

    def __contains__(self, i):
        return int(i) in self.members

    def __and__(self, other: "AtomSet") -> "AtomSet":
        return AtomSet(self.members & other.members, self.space)

    def __or__(self, other: "AtomSet") -> "AtomSet":
        return AtomSet(self.members | other.members, self.space)

    def __sub__(self, other: "AtomSet") -> "AtomSet":
        return AtomSet(self.members - other.members, self.space)

    def complement(self) -> "AtomSet":
        full = frozenset(range(self.space.atom_count))
        return AtomSet(full - self.members, self.space)

    def is_empty(self) -> bool:
        return not self.members

    def is_full(self) -> bool:
        return len(self.members) == self.space.atom_count

    def indicator(self) -> MeasurableFunction:
        return self.space.indicator(self.members)

    def sorted(self) -> list:
        return sorted(self.members)


class OverlapClass(enum.Enum):
    """How the supports of two nonzero nonnegative functions relate."""

    DISJOINT = "disjoint"
    EQUAL = "equal"
    FIRST_INSIDE_SECOND = "first-inside-second"
    SECOND_INSIDE_FIRST = "second-inside-first"
    PARTIAL = "partial"


# ---------------------------------------------------------------------------
# operations


def inner_product(f: MeasurableFunction, g: MeasurableFunction) -> float:
    """Weighted inner product ``sum_i f_i g_i mu_i``."""
    f._check_same_space(g)
    return float(np.sum(f.coords * g.coords * f.space.weights))


def support(f: MeasurableFunction, cfg: ToleranceConfig = DEFAULT_TOLERANCES) -> AtomSet:
    """Atoms where ``|f_i|`` exceeds ``tol_support`` times the sup norm."""
    amax = f.sup_norm()
    if amax == 0.0:
        return AtomSet(frozenset(), f.space)
    mask = np.abs(f.coords) > cfg.tol_support * amax
    return AtomSet(frozenset(np.flatnonzero(mask).tolist()), f.space)


def positive_negative_parts(f: MeasurableFunction):
    """Split ``f = f_plus - f_minus`` with exactly disjoint supports."""
    plus = MeasurableFunction(np.maximum(f.coords, 0.0), f.space)
    minus = MeasurableFunction(np.maximum(-f.coords, 0.0), f.space)
    return plus, minus


def is_mixed(f: MeasurableFunction, cfg: ToleranceConfig = DEFAULT_TOLERANCES) -> bool:
    """True when both the positive and the negative part carry support."""
    plus, minus = positive_negative_parts(f)
    return not support(plus, cfg).is_empty() and not support(minus, cfg).is_empty()


def overlap_class(
    f: MeasurableFunction,
    g: MeasurableFunction,
    cfg: ToleranceConfig = DEFAULT_TOLERANCES,
) -> OverlapClass:
    """Classify the support relation of two nonzero nonnegative functions.

    PARTIAL requires all three regions (common, f-only, g-only) to be
    nonempty; containments and equality are reported as such.
    """
    sf = support(f, cfg)
    sg = support(g, cfg)
    if sf.is_empty() or sg.is_empty():
        raise ZeroFunctionError("overlap classification needs nonzero functions")
    return classify_supports(sf, sg)


def classify_supports(sf: AtomSet, sg: AtomSet) -> OverlapClass:
    common = sf & sg
    if common.is_empty():
        return OverlapClass.DISJOINT
    f_only = sf - sg
    g_only = sg - sf
    if f_only.is_empty() and g_only.is_empty():
        return OverlapClass.EQUAL
    if f_only.is_empty():
        return OverlapClass.FIRST_INSIDE_SECOND
    if g_only.is_empty():
        return OverlapClass.SECOND_INSIDE_FIRST
    return OverlapClass.PARTIAL
