"""Turn any range-space basis into an all-nonnegative, support-disjoint one.

The machinery rests on one structural fact about a nonnegative r-potent
operator whose kernel holds no nonzero nonnegative function: the positive
and negative parts of any range element are themselves range elements.
Splitting mixed functions makes a basis nonnegative; resolving overlapping
supports pairwise (by subtracting a multiple chosen so the difference is
mixed, then splitting) makes it support-disjoint.

The main loop keeps two groups: an orthogonal group of pairwise
support-disjoint functions and a non-orthogonal remainder.  Each draw from
the remainder is resolved against the orthogonal group until its overlaps
are gone; the group grows by at least one function per draw, so the loop
finishes after at most ``N - 1`` draws.

Every function produced along the way is verified to be fixed by
``A^(r-1)``; a verification failure means the kernel does contain a
nonnegative element and is reported as :class:`RangeSplitError` so the
caller can switch to the kernel-witness route.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BasisLossError,
    BudgetExceededError,
    ConsistencyFault,
    DependenceError,
    InvalidOperatorError,
    RangeSplitError,
    ZeroFunctionError,
)
from .operators import NonnegativeOperator, range_basis, validate
from .spaces import (
    DEFAULT_TOLERANCES,
    AtomSet,
    MeasurableFunction,
    OverlapClass,
    ToleranceConfig,
    classify_supports,
    is_mixed,
    positive_negative_parts,
    support,
)


class BasisOrigin(enum.Enum):
    ORIGINAL = "original"
    SPLIT_POSITIVE = "split-positive"
    SPLIT_NEGATIVE = "split-negative"
    OVERLAP_RESOLVED = "overlap-resolved"


class ForgeRule(enum.Enum):
    SPLIT_MIXED = "SplitMixed"
    IDENTICAL_SUPPORTS = "IdenticalSupports"
    NESTED_SUPPORTS = "NestedSupports"
    PARTIAL_DEPENDENT = "PartialDependent"
    PARTIAL_INDEPENDENT = "PartialIndependent"
    PRUNE = "Prune"


@dataclass(frozen=True)
class ForgeStep:
    rule: ForgeRule
    indices: tuple
    produced: int


@dataclass
class ForgeTrace:
    """Step log plus the (orthogonal, non-orthogonal) counter history."""

    steps: list = field(default_factory=list)
    counter_history: list = field(default_factory=list)

    def record(self, rule: ForgeRule, indices, produced: int) -> None:
        self.steps.append(ForgeStep(rule, tuple(int(i) for i in indices), int(produced)))

    def checkpoint(self, orth_count: int, nonorth_count: int) -> None:
        self.counter_history.append((int(orth_count), int(nonorth_count)))

    def rule_counts(self) -> dict:
        counts = {}
        for step in self.steps:
            counts[step.rule.value] = counts.get(step.rule.value, 0) + 1
        return counts

    def to_json_dict(self) -> dict:
        return {
            "steps": [
                {"rule": s.rule.value, "indices": list(s.indices), "produced": s.produced}
                for s in self.steps
            ],
            "counters": [list(pair) for pair in self.counter_history],
        }


@dataclass(frozen=True)
class BasisSet:
    """Ordered basis candidates with cached supports and origin tags."""

    functions: tuple
    origins: tuple
    supports: tuple
    space: object

    @classmethod
    def build(cls, functions, origins=None, cfg: ToleranceConfig = DEFAULT_TOLERANCES, space=None):
        functions = tuple(functions)
        if origins is None:
            origins = tuple(BasisOrigin.ORIGINAL for _ in functions)
        else:
            origins = tuple(origins)
        if len(origins) != len(functions):
            raise ValueError("one origin tag per function is required")
        if space is None:
            if not functions:
                raise ValueError("an empty basis needs an explicit space")
            space = functions[0].space
        supports = tuple(support(f, cfg) for f in functions)
        return cls(functions=functions, origins=origins, supports=supports, space=space)

    def __len__(self):
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def __getitem__(self, i):
        return self.functions[i]

    def coord_matrix(self) -> np.ndarray:
        """Atom-by-function coordinate matrix."""
        if not self.functions:
            return np.zeros((self.space.atom_count, 0))
        return np.column_stack([f.coords for f in self.functions])

    def support_partition(self) -> frozenset:
        """The supports as a set of atom-index frozensets (order-free)."""
        return frozenset(s.members for s in self.supports)


# ---------------------------------------------------------------------------
# elementary constructions


def _require_range_member(
    A: NonnegativeOperator,
    f: MeasurableFunction,
    cfg: ToleranceConfig,
    reference_norm: float,
    what: str,
) -> None:
    residual = MeasurableFunction(A.range_projector() @ f.coords - f.coords, A.space)
    if residual.norm() > cfg.tol_potency * max(reference_norm, 1e-300):
        raise RangeSplitError(
            f"{what} is not fixed by the range projector "
            f"(residual {residual.norm():.3e}); the kernel contains a "
            "nonnegative element, use the kernel-witness route"
        )


def split_mixed_in_range(
    A: NonnegativeOperator,
    f: MeasurableFunction,
    cfg: ToleranceConfig = DEFAULT_TOLERANCES,
):
    """Split a mixed range element into its positive and negative parts.

    Both parts are themselves range elements whenever the kernel holds no
    nonzero nonnegative function; that is verified here and a failure is
    raised as :class:`RangeSplitError`.
    """
    if not is_mixed(f, cfg):
        raise ValueError("function is not mixed; nothing to split")
    if not A.fixes(f, cfg):
        raise ValueError("function is not a range member of the operator")
    plus, minus = positive_negative_parts(f)
    ref = f.norm()
    _require_range_member(A, plus, cfg, ref, "positive part")
    _require_range_member(A, minus, cfg, ref, "negative part")
    return plus, minus


def construct_mixed(
    f: MeasurableFunction,
    g: MeasurableFunction,
    cfg: ToleranceConfig = DEFAULT_TOLERANCES,
):
    """Pick ``p`` so that ``f - p g`` is mixed with exactly disjoint parts.

    With ``R`` the coordinate ratios ``f_i / g_i`` over the common support:
    the midpoint ``(min R + max R) / 2`` works when the ratios spread out;
    for constant ratios the scalar is pushed past the ratio range on the
    side where one function out-supports the other.  Disjoint supports admit
    any positive scalar and use ``p = 1``.

    Returns ``(p, u_plus, u_minus)`` with ``f - p g = u_plus - u_minus``.
    """
    sf = support(f, cfg)
    sg = support(g, cfg)
    if sf.is_empty() or sg.is_empty():
        raise ZeroFunctionError("cannot build a mixed function from a zero function")
    pair = np.column_stack([f.coords, g.coords])
    sv = np.linalg.svd(pair, compute_uv=False)
    if sv[1] <= cfg.tol_rank * sv[0]:
        raise DependenceError("functions are numerically proportional")
    common = sf & sg
    if common.is_empty():
        p = 1.0
    else:
        idx = common.sorted()
        ratios = f.coords[idx] / g.coords[idx]
        rmin = float(ratios.min())
        rmax = float(ratios.max())
        if rmax - rmin > cfg.tol_rank * max(1.0, abs(rmax)):
            p = 0.5 * (rmin + rmax)
        elif not (sf - sg).is_empty():
            p = rmax + 1.0
        elif not (sg - sf).is_empty():
            p = 0.5 * rmin
        else:
            raise DependenceError("equal supports with constant ratio")
    u = f - p * g
    u_plus, u_minus = positive_negative_parts(u)
    if support(u_plus, cfg).is_empty() or support(u_minus, cfg).is_empty():
        raise ConsistencyFault(
            "scalar selection failed to produce a mixed function; "
            "inputs are too close to proportional for the configured tolerances"
        )
    return p, u_plus, u_minus


def _restricted_pair_dependent(
    f: MeasurableFunction,
    g: MeasurableFunction,
    common: AtomSet,
    cfg: ToleranceConfig,
) -> bool:
    """Proportionality of the two restrictions to the common support."""
    idx = common.sorted()
    pair = np.column_stack([f.coords[idx], g.coords[idx]])
    sv = np.linalg.svd(pair, compute_uv=False)
    if sv.size < 2 or sv[0] == 0.0:
        return True
    return bool(sv[1] <= cfg.tol_rank * sv[0])


def _nonzero(f: MeasurableFunction, cfg: ToleranceConfig, what: str) -> MeasurableFunction:
    if support(f, cfg).is_empty():
        raise ConsistencyFault(f"{what} collapsed to zero; overlap class was misjudged")
    return f


@dataclass
class _PairResolution:
    rule: ForgeRule
    settled: list        # pieces supported inside the retained side's support
    continuation: object # piece that may still overlap other group members
    fillers: list        # displaced originals, kept only as span completion
    removed_first: bool  # whether the first (retained-side) function was consumed


def _resolve_pair(
    A: NonnegativeOperator,
    first: MeasurableFunction,
    second: MeasurableFunction,
    cfg: ToleranceConfig,
) -> _PairResolution:
    """Resolve one overlapping pair of nonnegative range-basis functions.

    ``first`` plays the role of the already-settled function: every piece
    in ``settled`` has support inside ``Supp first``, so it cannot overlap
    anything that was disjoint from ``first``.  ``continuation`` (if any)
    is supported in ``Supp second - Supp first`` and must still be checked
    against other functions.
    """
    s1 = support(first, cfg)
    s2 = support(second, cfg)
    cls = classify_supports(s1, s2)
    if cls is OverlapClass.DISJOINT:
        raise ValueError("functions have disjoint supports; nothing to resolve")
    ref = max(first.norm(), second.norm())

    if cls is OverlapClass.EQUAL:
        _, u_plus, u_minus = construct_mixed(first, second, cfg)
        _require_range_member(A, u_plus, cfg, ref, "positive part")
        _require_range_member(A, u_minus, cfg, ref, "negative part")
        return _PairResolution(
            rule=ForgeRule.IDENTICAL_SUPPORTS,
            settled=[u_plus, u_minus],
            continuation=None,
            fillers=[first, second],
            removed_first=True,
        )

    if cls in (OverlapClass.FIRST_INSIDE_SECOND, OverlapClass.SECOND_INSIDE_FIRST):
        if cls is OverlapClass.FIRST_INSIDE_SECOND:
            inner, outer, inner_set = first, second, s1
            outer_only = s2 - s1
        else:
            inner, outer, inner_set = second, first, s2
            outer_only = s1 - s2
        dependent = _restricted_pair_dependent(inner, outer, inner_set, cfg)
        outside = _nonzero(outer.restrict(outer_only), cfg, "outer-only piece")
        _require_range_member(A, outside, cfg, ref, "outer-only piece")
        if dependent:
            # outer = alpha * inner + outside; stripping the inner support
            # leaves a nonnegative range member disjoint from inner
            if cls is OverlapClass.FIRST_INSIDE_SECOND:
                return _PairResolution(
                    rule=ForgeRule.NESTED_SUPPORTS,
                    settled=[],
                    continuation=outside,
                    fillers=[second],
                    removed_first=False,
                )
            return _PairResolution(
                rule=ForgeRule.NESTED_SUPPORTS,
                settled=[second, outside],
                continuation=None,
                fillers=[first],
                removed_first=True,
            )
        # independent restrictions: the overlap part of the outer function is
        # a range member in its own right, and mixing it against the inner
        # function splits the inner support into two disjoint pieces
        overlap_part = _nonzero(outer - outside, cfg, "overlap piece")
        _, u_plus, u_minus = construct_mixed(inner, overlap_part, cfg)
        _require_range_member(A, u_plus, cfg, ref, "positive part")
        _require_range_member(A, u_minus, cfg, ref, "negative part")
        if cls is OverlapClass.FIRST_INSIDE_SECOND:
            return _PairResolution(
                rule=ForgeRule.NESTED_SUPPORTS,
                settled=[u_plus, u_minus],
                continuation=outside,
                fillers=[first, second],
                removed_first=True,
            )
        return _PairResolution(
            rule=ForgeRule.NESTED_SUPPORTS,
            settled=[u_plus, u_minus, outside],
            continuation=None,
            fillers=[first, second],
            removed_first=True,
        )

    # partial overlap
    common = s1 & s2
    first_only = _nonzero(first.restrict(s1 - s2), cfg, "first-only piece")
    second_only = _nonzero(second.restrict(s2 - s1), cfg, "second-only piece")
    _require_range_member(A, first_only, cfg, ref, "first-only piece")
    _require_range_member(A, second_only, cfg, ref, "second-only piece")
    first_common = _nonzero(first - first_only, cfg, "first overlap piece")
    if _restricted_pair_dependent(first, second, common, cfg):
        _require_range_member(A, first_common, cfg, ref, "first overlap piece")
        return _PairResolution(
            rule=ForgeRule.PARTIAL_DEPENDENT,
            settled=[first_only, first_common],
            continuation=second_only,
            fillers=[first, second],
            removed_first=True,
        )
    second_common = _nonzero(second - second_only, cfg, "second overlap piece")
    _, x_plus, x_minus = construct_mixed(first_common, second_common, cfg)
    _require_range_member(A, x_plus, cfg, ref, "positive part")
    _require_range_member(A, x_minus, cfg, ref, "negative part")
    return _PairResolution(
        rule=ForgeRule.PARTIAL_INDEPENDENT,
        settled=[first_only, x_plus, x_minus],
        continuation=second_only,
        fillers=[first, second],
        removed_first=True,
    )


# ---------------------------------------------------------------------------
# basis-level operations


def _greedy_rank_extend(kept_coords, pool, tol_rank):
    """Indices into ``pool`` whose functions extend the span of ``kept``.

    Modified Gram-Schmidt greedy: a candidate joins when its residual
    against the span built so far exceeds ``tol_rank`` times its norm.
    """
    q_columns = []
    for col in kept_coords:
        v = col.astype(float).copy()
        for q in q_columns:
            v -= (q @ v) * q
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise BasisLossError("kept functions are not linearly independent")
        q_columns.append(v / norm)
    chosen = []
    for idx, f in enumerate(pool):
        v = f.coords.astype(float).copy()
        scale = np.linalg.norm(v)
        if scale == 0.0:
            continue
        for q in q_columns:
            v -= (q @ v) * q
        norm = np.linalg.norm(v)
        if norm > tol_rank * scale:
            q_columns.append(v / norm)
            chosen.append(idx)
    return chosen


def prune_to_basis(
    candidates: BasisSet,
    target_dim: int,
    cfg: ToleranceConfig = DEFAULT_TOLERANCES,
    trace: ForgeTrace | None = None,
) -> BasisSet:
    """Select exactly ``target_dim`` independent functions from a spanning set.

    Retention preference: functions produced by splitting or overlap
    resolution come first, then functions disjoint from more of the set,
    then larger weighted norm; ties fall back to input order.
    """
    if len(candidates) < target_dim:
        raise BasisLossError(
            f"only {len(candidates)} candidates for a {target_dim}-dimensional space"
        )
    disjoint_counts = []
    for i, si in enumerate(candidates.supports):
        count = sum(
            1
            for j, sj in enumerate(candidates.supports)
            if j != i and (si & sj).is_empty()
        )
        disjoint_counts.append(count)
    order = sorted(
        range(len(candidates)),
        key=lambda i: (
            candidates.origins[i] is BasisOrigin.ORIGINAL,
            -disjoint_counts[i],
            -candidates.functions[i].norm(),
            i,
        ),
    )
    pool = [candidates.functions[i] for i in order]
    chosen = _greedy_rank_extend([], pool, cfg.tol_rank)
    if len(chosen) < target_dim:
        raise BasisLossError(
            f"candidates span only {len(chosen)} dimensions, need {target_dim}"
        )
    kept = sorted(order[i] for i in chosen[:target_dim])
    if trace is not None:
        trace.record(ForgeRule.PRUNE, kept, len(kept))
    return BasisSet.build(
        [candidates.functions[i] for i in kept],
        [candidates.origins[i] for i in kept],
        cfg,
        space=candidates.space,
    )


def nonnegative_basis(
    A: NonnegativeOperator,
    basis,
    cfg: ToleranceConfig = DEFAULT_TOLERANCES,
    trace: ForgeTrace | None = None,
) -> BasisSet:
    """Replace every mixed basis function by its two parts, then prune.

    Nonpositive functions are sign-flipped; functions nonnegative up to
    sub-threshold dust are clamped.  The output spans the same space with
    the same dimension and every member is entrywise nonnegative.
    """
    functions = list(basis)
    n_target = len(functions)
    if n_target == 0:
        raise ValueError("cannot make a nonnegative basis out of nothing")
    space = functions[0].space
    pieces = []
    origins = []
    for position, f in enumerate(functions):
        cutoff = cfg.tol_support * f.sup_norm()
        if np.all(f.coords >= -cutoff):
            pieces.append(MeasurableFunction(np.maximum(f.coords, 0.0), space))
            origins.append(BasisOrigin.ORIGINAL)
        elif np.all(f.coords <= cutoff):
            pieces.append(MeasurableFunction(np.maximum(-f.coords, 0.0), space))
            origins.append(BasisOrigin.ORIGINAL)
        else:
            plus, minus = split_mixed_in_range(A, f, cfg)
            pieces.extend([plus, minus])
            origins.extend([BasisOrigin.SPLIT_POSITIVE, BasisOrigin.SPLIT_NEGATIVE])
            if trace is not None:
                trace.record(ForgeRule.SPLIT_MIXED, (position,), 2)
    candidates = BasisSet.build(pieces, origins, cfg, space=space)
    return prune_to_basis(candidates, n_target, cfg, trace)


def resolve_overlap(
    A: NonnegativeOperator,
    basis: BasisSet,
    i: int,
    j: int,
    cfg: ToleranceConfig = DEFAULT_TOLERANCES,
) -> BasisSet:
    """Replace the overlapping pair ``(i, j)`` by support-disjoint pieces.

    Function ``i`` plays the retained-side role.  The returned set spans
    the same space, has the same dimension, and the replacement pieces are
    pairwise disjoint; the originals survive only if span completion needs
    them.
    """
    resolution = _resolve_pair(A, basis[i], basis[j], cfg)
    replacements = list(resolution.settled)
    if resolution.continuation is not None:
        replacements.append(resolution.continuation)
    if not resolution.removed_first:
        replacements.insert(0, basis[i])
    pieces = [f.normalized() for f in replacements]
    origins = [BasisOrigin.OVERLAP_RESOLVED] * len(pieces)
    for k, f in enumerate(basis):
        if k in (i, j):
            continue
        pieces.append(f)
        origins.append(basis.origins[k])
    pieces.extend(resolution.fillers)
    origins.extend([BasisOrigin.ORIGINAL] * len(resolution.fillers))
    candidates = BasisSet.build(pieces, origins, cfg, space=basis.space)
    return prune_to_basis(candidates, len(basis), cfg)


def orthogonalize(
    A: NonnegativeOperator,
    cfg: ToleranceConfig = DEFAULT_TOLERANCES,
    basis=None,
    seed=None,
    step_budget: int | None = None,
):
    """Produce a nonnegative, support-disjoint basis of the range space.

    Starts from ``basis`` (any spanning set of range members; defaults to
    the operator's own pivot columns), makes it nonnegative, then resolves
    overlaps draw by draw.  Draws are taken in index order unless ``seed``
    randomizes them.

    Returns ``(BasisSet, ForgeTrace)``.  Requires that the kernel holds no
    nonzero nonnegative function; when that assumption is wrong the range
    verification of some split fails as :class:`RangeSplitError`.
    """
    report = validate(A, cfg)
    if not report.ok:
        raise InvalidOperatorError(
            f"operator failed validation (nonnegative={report.nonnegative}, "
            f"potency residual={report.potency_residual:.3e})"
        )
    trace = ForgeTrace()
    base = range_basis(A, cfg)
    n_dim = base.dimension
    if n_dim == 0:
        trace.checkpoint(0, 0)
        return BasisSet.build([], [], cfg, space=A.space), trace

    if basis is None:
        starting = list(base.functions)
    else:
        starting = list(basis)
        if len(starting) != n_dim:
            raise BasisLossError(
                f"starting basis has {len(starting)} functions, range dimension is {n_dim}"
            )
        coords = np.column_stack([f.coords for f in starting])
        sv = np.linalg.svd(coords, compute_uv=False)
        if sv[-1] <= cfg.tol_rank * sv[0]:
            raise BasisLossError("starting basis is numerically rank-deficient")
        for f in starting:
            if not A.fixes(f, cfg):
                raise BasisLossError("starting basis contains a non-range function")

    nonneg = nonnegative_basis(A, starting, cfg, trace)
    budget = step_budget if step_budget is not None else 50 * n_dim * n_dim
    rng = np.random.default_rng(seed) if seed is not None else None

    orth = [(nonneg.functions[0].normalized(), nonneg.origins[0])]
    nonorth = [
        (nonneg.functions[k].normalized(), nonneg.origins[k]) for k in range(1, n_dim)
    ]
    trace.checkpoint(len(orth), len(nonorth))
    steps_used = 0

    while nonorth:
        draw_at = int(rng.integers(len(nonorth))) if rng is not None else 0
        work, work_origin = nonorth.pop(draw_at)
        fillers = []
        orth_before = len(orth)

        while work is not None:
            work_support = support(work, cfg)
            clash = None
            for slot, (member, _) in enumerate(orth):
                if not (support(member, cfg) & work_support).is_empty():
                    clash = slot
                    break
            if clash is None:
                orth.append((work, work_origin))
                work = None
                break
            steps_used += 1
            if steps_used > budget:
                raise BudgetExceededError(
                    f"overlap resolution exceeded the step budget of {budget}",
                    trace=trace,
                )
            member, member_origin = orth[clash]
            resolution = _resolve_pair(A, member, work, cfg)
            if resolution.removed_first:
                del orth[clash]
                fillers.append((member, member_origin))
            for piece in resolution.settled:
                orth.append((piece.normalized(), BasisOrigin.OVERLAP_RESOLVED))
            if resolution.continuation is not None:
                work = resolution.continuation.normalized()
                work_origin = BasisOrigin.OVERLAP_RESOLVED
            else:
                fillers.append((work, work_origin))
                work = None
            trace.record(
                resolution.rule,
                (clash, draw_at),
                len(resolution.settled) + (0 if resolution.continuation is None else 1),
            )

        if len(orth) <= orth_before:
            raise ConsistencyFault(
                "a draw finished without enlarging the orthogonal group"
            )
        pool = fillers + nonorth
        kept_coords = [f.coords for f, _ in orth]
        chosen = _greedy_rank_extend(kept_coords, [f for f, _ in pool], cfg.tol_rank)
        if len(orth) + len(chosen) < n_dim:
            raise BasisLossError("span was lost during overlap resolution")
        nonorth = [pool[i] for i in chosen[: n_dim - len(orth)]]
        trace.record(ForgeRule.PRUNE, (len(orth), len(nonorth)), len(nonorth))
        trace.checkpoint(len(orth), len(nonorth))

    functions = [f for f, _ in orth]
    origins = [origin for _, origin in orth]
    result = BasisSet.build(functions, origins, cfg, space=A.space)
    for a in range(len(result)):
        for b in range(a + 1, len(result)):
            if not (result.supports[a] & result.supports[b]).is_empty():
                raise ConsistencyFault(
                    "orthogonalization finished with overlapping supports"
                )
    return result, trace
