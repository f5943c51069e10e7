"""Fluid model definition: state space, rates, and the generator family.

A model is a finite state space with a nonzero fluid rate ``v(i)`` per state
(splitting the states into an up-drift class and a down-drift class) plus a
time-dependent family of generator matrices ``s -> L(s)``.  Three parametric
families are supported; all of them evaluate to an ``m x m`` matrix with
nonnegative off-diagonal entries, zero row sums, and entries bounded by a
declared constant ``bound_K``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidGenerator, InvalidRates

ROW_SUM_TOL = 1e-12

# Default time window over which validation samples the family; callers with a
# longer query horizon should pass their own.
DEFAULT_VALIDATION_HORIZON = 20.0


@dataclass(frozen=True)
class StateSpace:
    """State labels with their fluid rates and the induced sign partition."""

    labels: tuple[str, ...]
    v: np.ndarray  # shape (m,), fluid rate per state

    def __init__(self, labels: Sequence[str], v: Sequence[float]):
        labels = tuple(str(x) for x in labels)
        rates = np.asarray(v, dtype=float)
        if rates.shape != (len(labels),):
            raise DimensionMismatch(
                f"{len(labels)} labels but rate vector of shape {rates.shape}"
            )
        if len(labels) < 2:
            raise InvalidRates("need at least two states")
        if len(set(labels)) != len(labels):
            raise InvalidRates("state labels must be unique")
        if np.any(rates == 0.0):
            dead = [labels[i] for i in np.nonzero(rates == 0.0)[0]]
            raise InvalidRates(f"zero fluid rate for states {dead}")
        if not (np.any(rates > 0.0) and np.any(rates < 0.0)):
            raise InvalidRates("both sign classes must be non-empty")
        object.__setattr__(self, "labels", labels)
        rates.setflags(write=False)
        object.__setattr__(self, "v", rates)

    @property
    def m(self) -> int:
        return len(self.labels)

    @property
    def plus_indices(self) -> np.ndarray:
        return np.nonzero(self.v > 0.0)[0]

    @property
    def minus_indices(self) -> np.ndarray:
        return np.nonzero(self.v < 0.0)[0]

    @property
    def m_plus(self) -> int:
        return int(np.sum(self.v > 0.0))

    @property
    def m_minus(self) -> int:
        return int(np.sum(self.v < 0.0))

    @property
    def permutation(self) -> np.ndarray:
        """Index order putting the up-drift states first."""
        return np.concatenate([self.plus_indices, self.minus_indices])

    @property
    def v_max(self) -> float:
        return float(np.max(np.abs(self.v)))

    @property
    def v_min(self) -> float:
        return float(np.min(np.abs(self.v)))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown state {label!r}") from None


def _check_square(mat: np.ndarray, m: int, what: str) -> np.ndarray:
    arr = np.asarray(mat, dtype=float)
    if arr.shape != (m, m):
        raise DimensionMismatch(f"{what} must be {m}x{m}, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class FourierTerm:
    """One sinusoidal term ``sin(omega*s + phase) * coef``."""

    coef: np.ndarray
    omega: float
    phase: float = 0.0


@dataclass(frozen=True)
class PolyTerm:
    """One polynomial term ``s**degree * coef``."""

    coef: np.ndarray
    degree: int


@dataclass(frozen=True)
class GeneratorFamily:
    """Time-dependent generator family, one of three parametric kinds.

    ``constant``            a single matrix.
    ``piecewise_constant``  breakpoints ``b_1 < ... < b_k`` and ``k+1``
                            matrices; right-continuous at breakpoints.
    ``fourier_polynomial``  ``L(s) = base + sum_k sin(w_k s + p_k) C_k
                            + sum_j s**d_j P_j``.
    """

    kind: str
    m: int
    bound_K: float
    matrix: np.ndarray | None = None
    breakpoints: np.ndarray | None = None
    matrices: np.ndarray | None = None
    base: np.ndarray | None = None
    fourier_terms: tuple[FourierTerm, ...] = ()
    poly_terms: tuple[PolyTerm, ...] = ()

    @staticmethod
    def constant(matrix, bound_K: float | None = None) -> "GeneratorFamily":
        arr = np.asarray(matrix, dtype=float)
        m = arr.shape[0]
        arr = _check_square(arr, m, "generator matrix")
        if bound_K is None:
            bound_K = float(np.max(np.abs(arr))) if arr.size else 0.0
        return GeneratorFamily(kind="constant", m=m, bound_K=float(bound_K), matrix=arr)

    @staticmethod
    def piecewise_constant(
        breakpoints, matrices, bound_K: float | None = None
    ) -> "GeneratorFamily":
        bp = np.asarray(breakpoints, dtype=float)
        mats = np.asarray(matrices, dtype=float)
        if bp.ndim != 1 or np.any(np.diff(bp) <= 0) or (bp.size and bp[0] <= 0):
            raise InvalidGenerator("breakpoints must be positive and increasing")
        if mats.ndim != 3 or mats.shape[0] != bp.size + 1:
            raise InvalidGenerator(
                f"need {bp.size + 1} matrices for {bp.size} breakpoints"
            )
        m = mats.shape[1]
        if mats.shape[1:] != (m, m):
            raise DimensionMismatch("piecewise matrices must be square")
        if bound_K is None:
            bound_K = float(np.max(np.abs(mats)))
        return GeneratorFamily(
            kind="piecewise_constant",
            m=m,
            bound_K=float(bound_K),
            breakpoints=bp,
            matrices=mats,
        )

    @staticmethod
    def fourier_polynomial(
        base,
        fourier_terms: Sequence[tuple] = (),
        poly_terms: Sequence[tuple] = (),
        bound_K: float | None = None,
    ) -> "GeneratorFamily":
        arr = np.asarray(base, dtype=float)
        m = arr.shape[0]
        arr = _check_square(arr, m, "base matrix")
        fts = tuple(
            FourierTerm(_check_square(c, m, "fourier coef"), float(w), float(p))
            for (c, w, p) in fourier_terms
        )
        pts = tuple(
            PolyTerm(_check_square(c, m, "poly coef"), int(d)) for (c, d) in poly_terms
        )
        if any(t.degree < 0 for t in pts):
            raise InvalidGenerator("polynomial degrees must be nonnegative")
        if bound_K is None:
            # crude bound, only valid when there are no polynomial terms
            bound_K = float(np.max(np.abs(arr))) + sum(
                float(np.max(np.abs(t.coef))) for t in fts
            )
            if pts:
                raise InvalidGenerator(
                    "bound_K must be given explicitly for polynomial terms"
                )
        return GeneratorFamily(
            kind="fourier_polynomial",
            m=m,
            bound_K=float(bound_K),
            base=arr,
            fourier_terms=fts,
            poly_terms=pts,
        )

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def piece_index(self, s: float) -> int:
        """Index of the active piece at time ``s`` (right-continuous)."""
        return int(np.searchsorted(self.breakpoints, s, side="right"))

    def __call__(self, s: float) -> np.ndarray:
        return eval_generator(self, s)


def eval_generator(family: GeneratorFamily, s: float) -> np.ndarray:
    """Evaluate ``L(s)``, folding sub-tolerance row-sum dust onto the diagonal.

    Row sums larger than 1e-12 in magnitude are an InvalidGenerator error, not
    silently repaired.
    """
    if s < 0:
        raise ValueError(f"time must be nonnegative, got {s}")
    if family.kind == "constant":
        lam = family.matrix.copy()
    elif family.kind == "piecewise_constant":
        lam = family.matrices[family.piece_index(s)].copy()
    elif family.kind == "fourier_polynomial":
        lam = family.base.copy()
        for t in family.fourier_terms:
            lam += np.sin(t.omega * s + t.phase) * t.coef
        for t in family.poly_terms:
            lam += (s ** t.degree) * t.coef
    else:
        raise InvalidGenerator(f"unknown family kind {family.kind!r}")

    rowsums = lam.sum(axis=1)
    bad = np.abs(rowsums) > ROW_SUM_TOL
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0])
        raise InvalidGenerator(
            f"row sum {rowsums[i]:.3e} of state {i} at s={s:g} exceeds {ROW_SUM_TOL}"
        )
    lam[np.diag_indices_from(lam)] -= rowsums
    return lam


@dataclass(frozen=True)
class BlockDecomposition:
    """Blocks of a matrix under the (plus first, then minus) state order."""

    A: np.ndarray  # m+ x m+
    B: np.ndarray  # m+ x m-
    C: np.ndarray  # m- x m+
    D: np.ndarray  # m- x m-

    def reassemble(self, space: StateSpace) -> np.ndarray:
        """Invert :func:`block_decompose` back to the original state order."""
        perm = space.permutation
        full = np.block([[self.A, self.B], [self.C, self.D]])
        out = np.empty_like(full)
        out[np.ix_(perm, perm)] = full
        return out


def block_decompose(matrix, space: StateSpace) -> BlockDecomposition:
    """Split a matrix into A, B, C, D blocks along the sign partition."""
    arr = _check_square(matrix, space.m, "matrix")
    p, n = space.plus_indices, space.minus_indices
    return BlockDecomposition(
        A=arr[np.ix_(p, p)].copy(),
        B=arr[np.ix_(p, n)].copy(),
        C=arr[np.ix_(n, p)].copy(),
        D=arr[np.ix_(n, n)].copy(),
    )


@dataclass(frozen=True)
class Violation:
    kind: str
    s: float | None
    i: int | None
    j: int | None
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]
    notes: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            lines = ["model valid"]
        else:
            lines = [f"{len(self.violations)} violation(s):"] + [
                f"  [{v.kind}] s={v.s} i={v.i} j={v.j}: {v.detail}"
                for v in self.violations
            ]
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


@dataclass(frozen=True)
class FluidModel:
    """A state space paired with a generator family of matching dimension."""

    space: StateSpace
    generator: GeneratorFamily

    def __post_init__(self):
        if self.generator.m != self.space.m:
            raise DimensionMismatch(
                f"family is {self.generator.m}x{self.generator.m} "
                f"but the space has {self.space.m} states"
            )

    @property
    def m(self) -> int:
        return self.space.m

    @property
    def bound_K(self) -> float:
        return self.generator.bound_K

    def lam(self, s: float) -> np.ndarray:
        return eval_generator(self.generator, s)

    def blocks(self, s: float) -> BlockDecomposition:
        return block_decompose(self.lam(s), self.space)


def validate_model(
    space: StateSpace,
    family: GeneratorFamily,
    check_resolution: float = 1e-3,
    horizon: float = DEFAULT_VALIDATION_HORIZON,
) -> ValidationReport:
    """Sample the family on a dense time grid and collect every violation.

    Continuity of the parametric forms bounds the excursion between samples,
    so a clean grid pass is the computable stand-in for the pointwise
    constraints.  Piecewise-constant families break continuity at their
    breakpoints by construction; they are accepted but flagged in the notes.
    """
    if check_resolution <= 0:
        raise ValueError("check_resolution must be positive")
    violations: list[Violation] = []
    notes: list[str] = []

    if family.m != space.m:
        return ValidationReport(
            (Violation("dimension", None, None, None, "family/space size mismatch"),)
        )
    if family.kind == "piecewise_constant":
        notes.append(
            "assumption-relaxed: piecewise-constant family is discontinuous at "
            "its breakpoints (right-continuous evaluation)"
        )

    s_grid = np.arange(0.0, horizon + 0.5 * check_resolution, check_resolution)
    if family.kind == "piecewise_constant":
        s_grid = np.union1d(s_grid, family.breakpoints[family.breakpoints <= horizon])
    for s in s_grid:
        if family.kind == "constant":
            lam = family.matrix
        elif family.kind == "piecewise_constant":
            lam = family.matrices[family.piece_index(float(s))]
        else:
            lam = family.base.copy()
            for t in family.fourier_terms:
                lam += np.sin(t.omega * s + t.phase) * t.coef
            for t in family.poly_terms:
                lam += (s ** t.degree) * t.coef
        for i in range(space.m):
            row = lam[i]
            for j in range(space.m):
                if i != j and row[j] < 0:
                    violations.append(
                        Violation(
                            "negative_offdiag", float(s), i, j,
                            f"L(s)[{i},{j}]={row[j]:.3e} < 0",
                        )
                    )
                if abs(row[j]) > family.bound_K + 1e-12:
                    violations.append(
                        Violation(
                            "bound_exceeded", float(s), i, j,
                            f"|L(s)[{i},{j}]|={abs(row[j]):.3e} > K={family.bound_K}",
                        )
                    )
            rs = float(row.sum())
            if abs(rs) > ROW_SUM_TOL:
                violations.append(
                    Violation(
                        "row_sum", float(s), i, None,
                        f"row sum {rs:.3e} exceeds {ROW_SUM_TOL}",
                    )
                )
        if family.kind == "constant":
            break  # one sample tells all
    return ValidationReport(tuple(violations), tuple(notes))


def ensure_valid(
    model: FluidModel,
    check_resolution: float = 1e-3,
    horizon: float = DEFAULT_VALIDATION_HORIZON,
) -> None:
    """Raise InvalidGenerator if validation finds any violation."""
    report = validate_model(model.space, model.generator, check_resolution, horizon)
    if not report.ok:
        raise InvalidGenerator(str(report))
