"""Nonnegative operators with a declared potency on a discrete space.

An operator is an ``n x n`` real matrix acting on coordinate vectors; entry
``(i, j)`` maps coordinate ``j`` into coordinate ``i``.  On a space with
strictly positive atom weights, mapping nonnegative functions to nonnegative
functions is exactly entrywise nonnegativity of the matrix, so validation
never needs sampling.

The declared potency ``r >= 2`` means ``A^r = A``.  For such an operator
``A^(r-1)`` is the identity on the range space, which is the single fact the
basis construction machinery leans on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import ConfigError, ConsistencyFault, SpaceMismatchError
from .spaces import (
    DEFAULT_TOLERANCES,
    DiscreteMeasureSpace,
    MeasurableFunction,
    ToleranceConfig,
)


class NonnegativeOperator:
    """Matrix operator with declared potency ``r``.

    Construction is permissive: entries below ``-tol_support`` relative dust
    are clamped to zero, anything worse is kept and reported by
    :func:`validate` (so that invalid inputs produce a report, not a crash).
    """

    def __init__(
        self,
        matrix,
        space: DiscreteMeasureSpace,
        potency: int,
        cfg: ToleranceConfig = DEFAULT_TOLERANCES,
    ):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError("operator matrix must be square")
        if m.shape[0] != space.atom_count:
            raise SpaceMismatchError(
                f"matrix is {m.shape[0]}x{m.shape[1]} but the space has "
                f"{space.atom_count} atoms"
            )
        if int(potency) < 2:
            raise ConfigError("potency must be an integer >= 2")
        scale = max(1.0, float(np.max(np.abs(m))) if m.size else 0.0)
        dust = cfg.tol_support * scale
        m[(m < 0.0) & (m >= -dust)] = 0.0
        m.setflags(write=False)
        self.matrix = m
        self.space = space
        self.potency = int(potency)
        self._range_projector = None

    @property
    def dim(self) -> int:
        return self.space.atom_count

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.matrix))

    def apply(self, f: MeasurableFunction) -> MeasurableFunction:
        if f.space != self.space:
            raise SpaceMismatchError("function does not live on the operator's space")
        return MeasurableFunction(self.matrix @ f.coords, self.space)

    def range_projector(self) -> np.ndarray:
        """``A^(r-1)``, the identity on the range space (cached)."""
        if self._range_projector is None:
            self._range_projector = np.linalg.matrix_power(self.matrix, self.potency - 1)
        return self._range_projector

    def fixes(self, f: MeasurableFunction, cfg: ToleranceConfig = DEFAULT_TOLERANCES) -> bool:
        """Whether ``A^(r-1) f = f`` within ``tol_potency``, i.e. f is a
        range member."""
        residual = MeasurableFunction(
            self.range_projector() @ f.coords - f.coords, self.space
        )
        return residual.norm() <= cfg.tol_potency * max(1.0, f.norm())

    def __repr__(self):
        return f"NonnegativeOperator(n={self.dim}, r={self.potency})"


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking entrywise nonnegativity and potency."""

    nonnegative: bool
    min_entry: float
    potency_residual: float
    potent: bool
    rank: int

    @property
    def ok(self) -> bool:
        return self.nonnegative and self.potent


@dataclass(frozen=True)
class RangeBasis:
    """Ordered list of functions spanning the range space."""

    functions: tuple
    dimension: int

    def __iter__(self):
        return iter(self.functions)

    def __len__(self):
        return self.dimension


def validate(A: NonnegativeOperator, cfg: ToleranceConfig = DEFAULT_TOLERANCES) -> ValidationReport:
    """Report nonnegativity, the residual of ``A^r = A``, and the rank."""
    m = A.matrix
    min_entry = float(m.min()) if m.size else 0.0
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 0.0)
    nonnegative = min_entry >= -cfg.tol_support * scale
    residual = float(np.linalg.norm(np.linalg.matrix_power(m, A.potency) - m))
    potent = residual <= cfg.tol_potency * max(1.0, A.frobenius_norm())
    return ValidationReport(
        nonnegative=nonnegative,
        min_entry=min_entry,
        potency_residual=residual,
        potent=potent,
        rank=matrix_rank(m, cfg),
    )


def matrix_rank(m: np.ndarray, cfg: ToleranceConfig = DEFAULT_TOLERANCES) -> int:
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > cfg.tol_rank * s[0]))


def minimal_potency(
    A: NonnegativeOperator,
    r_max: int,
    cfg: ToleranceConfig = DEFAULT_TOLERANCES,
):
    """Smallest ``s`` in ``[2, r_max]`` with ``A^s = A``, or None."""
    if r_max < 2:
        raise ConfigError("r_max must be at least 2")
    bound = cfg.tol_potency * max(1.0, A.frobenius_norm())
    power = A.matrix.copy()
    for s in range(2, r_max + 1):
        power = power @ A.matrix
        if float(np.linalg.norm(power - A.matrix)) <= bound:
            return s
    return None


def range_basis(A: NonnegativeOperator, cfg: ToleranceConfig = DEFAULT_TOLERANCES) -> RangeBasis:
    """Column-space basis taken from the columns of ``A`` itself.

    Every column of an r-potent ``A`` is fixed by ``A^(r-1)``, so picking
    pivot columns from a rank-revealing QR yields range members directly
    (and, entrywise nonnegative ones at that).
    """
    n = matrix_rank(A.matrix, cfg)
    if n == 0:
        return RangeBasis(functions=(), dimension=0)
    _, _, pivots = scipy.linalg.qr(A.matrix, pivoting=True, mode="economic")
    cols = sorted(pivots[:n])
    funcs = tuple(
        MeasurableFunction(A.matrix[:, j].copy(), A.space) for j in cols
    )
    return RangeBasis(functions=funcs, dimension=n)


def apply_adjoint(A: NonnegativeOperator, f: MeasurableFunction) -> MeasurableFunction:
    """Adjoint action under the weighted inner product.

    ``(A* f)_j = (1 / mu_j) * sum_i A_ij mu_i f_i`` so that
    ``<A f, g> = <f, A* g>`` holds exactly.
    """
    if f.space != A.space:
        raise SpaceMismatchError("function does not live on the operator's space")
    w = A.space.weights
    coords = (A.matrix.T @ (w * f.coords)) / w
    return MeasurableFunction(coords, A.space)


def kernel_nonnegative_witness(
    A: NonnegativeOperator,
    cfg: ToleranceConfig = DEFAULT_TOLERANCES,
):
    """Nonzero nonnegative ``f`` with ``A f = 0``, or None.

    Decided by a bounded linear program over the numerical null space:
    maximize the coordinate sum of ``V z`` subject to ``0 <= V z <= 1``,
    where the columns of ``V`` span the null space.  A positive optimum
    exhibits the witness; the zero optimum proves there is none (up to
    the rank tolerance defining the null space).
    """
    m = A.matrix
    n = A.dim
    s = np.linalg.svd(m, compute_uv=False)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        # zero operator: every atom indicator is annihilated
        return A.space.indicator([0]).normalized()
    _, sv, vt = np.linalg.svd(m)
    null_mask = np.zeros(n, dtype=bool)
    null_mask[: sv.size] = sv <= cfg.tol_rank * smax
    null_mask[sv.size :] = True
    V = vt.T[:, null_mask]
    if V.shape[1] == 0:
        return None
    c = -V.sum(axis=0)
    res = scipy.optimize.linprog(
        c,
        A_ub=np.vstack([V, -V]),
        b_ub=np.concatenate([np.ones(n), np.zeros(n)]),
        bounds=[(None, None)] * V.shape[1],
        method="highs",
    )
    if res.status != 0:
        raise ConsistencyFault(f"null-space feasibility LP failed: {res.message}")
    coords = V @ res.x
    if float(coords.sum()) <= cfg.tol_support:
        return None
    coords = np.maximum(coords, 0.0)
    witness = MeasurableFunction(coords, A.space).normalized()
    image_norm = A.apply(witness).norm()
    if image_norm > cfg.tol_potency * max(1.0, A.frobenius_norm()):
        raise ConsistencyFault(
            "LP produced a nonnegative null-space element that the operator "
            f"does not annihilate (|Af| = {image_norm:.3e})"
        )
    return witness


def annihilates_positive_check(
    A: NonnegativeOperator,
    f: MeasurableFunction,
    cfg: ToleranceConfig = DEFAULT_TOLERANCES,
) -> bool:
    """Check the zero-forcing property of strictly positive functions.

    For a nonnegative operator, ``A f = 0`` with ``f`` strictly positive on
    every atom forces ``A = 0``.  Returns True when ``A f = 0`` (and then
    asserts ``A`` vanishes), False when ``A f != 0``.  A nonzero ``A``
    annihilating a strictly positive ``f`` is a tolerance or input fault and
    raises :class:`ConsistencyFault`.
    """
    if f.space != A.space:
        raise SpaceMismatchError("function does not live on the operator's space")
    cutoff = cfg.tol_support * f.sup_norm()
    if f.sup_norm() == 0.0 or np.any(f.coords <= cutoff):
        raise ValueError("the probe function must be strictly positive on every atom")
    image = A.apply(f)
    if image.norm() > cfg.tol_potency * max(1.0, f.norm()):
        return False
    if A.frobenius_norm() > cfg.tol_potency:
        raise ConsistencyFault(
            "operator annihilates a strictly positive function but is not zero"
        )
    return True
