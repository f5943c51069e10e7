"""Deterministic solver for time-inhomogeneous passage functionals.

The unknown is ``F(s, i, a)``: the expected boundary payoff collected when
the fluid level, started at ``a`` at time ``s`` in state ``i``, first exceeds
``level``.  In the interior it satisfies the space-time generator equation

    dF/ds + v(i) dF/da + sum_j L_s(i, j) F(s, j, a) = 0,        a < level,

with ``F(s, i, level) = g(s, i)`` on the up-drift boundary states, ``F = 0``
for ``s`` past the support of ``g``, and an exact zero cutoff below the
reachability line ``level - a > v_max (eta - s)+`` (from there the crossing
lands where ``g`` vanishes).  The scheme is a first-order semi-Lagrangian
backward march in ``s``: own-state values ride the characteristic with
linear interpolation in ``a``; the chain coupling is explicit and folded in
with nonnegative weights so positivity and the sup-norm contraction hold
exactly on the grid.

Column slices of the solution are the operator tables:
``F(s, i, level)`` on down-drift states is ``(Jg)(s, i)`` (first up-crossing
from below), and ``F(s, i, 0)`` is the level-``level`` passage table from
either start class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _backend
from .errors import DerivativeUnavailable, DomainError, GridError
from .model import FluidModel, StateSpace

DENSE_VALUES_MAX = 20_000_000  # elements; above this only the columns are kept


def smooth_cutoff(s, eta: float):
    """C1 taper: 1 on [0, eta-1], cubic smoothstep down to 0 at eta."""
    s = np.asarray(s, dtype=float)
    u = np.clip(s - (eta - 1.0), 0.0, 1.0)
    return (1.0 - u) ** 2 * (1.0 + 2.0 * u)


def smooth_cutoff_dds(s, eta: float):
    s = np.asarray(s, dtype=float)
    u = np.clip(s - (eta - 1.0), 0.0, 1.0)
    return -6.0 * u * (1.0 - u)


@dataclass(frozen=True)
class BoundaryFunction:
    """Payoff on the hit class: ``g(s, i)``, compactly supported in ``s``.

    ``evaluator(s_array, local_index)`` is vectorized over ``s``; the local
    index runs over the hit-class states in their state-space order.
    ``d_ds`` is required only by operations that differentiate ``g``.
    """

    evaluator: Callable[[np.ndarray, int], np.ndarray]
    eta: float
    n_class: int
    smooth: bool = False
    d_ds: Callable[[np.ndarray, int], np.ndarray] | None = None

    def __call__(self, s, local_index: int) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(s, dtype=float), local_index))

    def derivative(self, s, local_index: int) -> np.ndarray:
        if not self.smooth or self.d_ds is None:
            raise DerivativeUnavailable("boundary function has no derivative")
        return np.asarray(self.d_ds(np.asarray(s, dtype=float), local_index))

    def sup_norm(self, n_samples: int = 2001) -> float:
        s = np.linspace(0.0, self.eta, n_samples)
        return max(
            float(np.max(np.abs(self(s, li)))) for li in range(self.n_class)
        )


def exp_indicator_boundary(
    c: float, target_local: int, n_class: int, eta: float | None = None
) -> BoundaryFunction:
    """``g(s, i) = exp(-c s) 1{i = target}``, tapered to zero at ``eta``.

    The raw function has unbounded support; the taper is 1 on [0, eta-1], so
    the truncation bias of downstream passage values is at most
    ``exp(-c (eta - 1))``.
    """
    if c <= 0:
        raise ValueError("discount c must be positive")
    if eta is None:
        eta = 20.0 / c
    if eta <= 1.0:
        raise ValueError("eta must exceed 1 (the taper needs [eta-1, eta])")

    def ev(s, li):
        if li != target_local:
            return np.zeros_like(s)
        return np.exp(-c * s) * smooth_cutoff(s, eta)

    def dv(s, li):
        if li != target_local:
            return np.zeros_like(s)
        return np.exp(-c * s) * (
            -c * smooth_cutoff(s, eta) + smooth_cutoff_dds(s, eta)
        )

    return BoundaryFunction(ev, float(eta), n_class, smooth=True, d_ds=dv)


def table_boundary(
    s_nodes: np.ndarray, values: np.ndarray, eta: float | None = None
) -> BoundaryFunction:
    """Boundary data sampled on an s-grid, linearly interpolated between nodes.

    ``values`` has shape (n_s, n_class).  Not smooth: operations needing
    ``d/ds g`` refuse it.
    """
    s_nodes = np.asarray(s_nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] != s_nodes.shape[0]:
        raise ValueError("values must be (len(s_nodes), n_class)")
    if eta is None:
        nz = np.nonzero(np.any(values != 0.0, axis=1))[0]
        eta = float(s_nodes[nz[-1]] + (s_nodes[1] - s_nodes[0])) if nz.size else float(s_nodes[1])

    def ev(s, li):
        return np.interp(s, s_nodes, values[:, li], left=values[0, li], right=0.0)

    return BoundaryFunction(ev, float(eta), values.shape[1], smooth=False)


@dataclass(frozen=True)
class Grid2D:
    """Uniform (s, a) grid; ``a = 0`` and ``a = level`` are exact nodes."""

    level: float
    eta: float
    ds: float
    da: float
    s_nodes: np.ndarray
    a_nodes: np.ndarray
    zero_index: int

    @property
    def n_s(self) -> int:
        return self.s_nodes.shape[0]

    @property
    def n_a(self) -> int:
        return self.a_nodes.shape[0]

    @property
    def s_max(self) -> float:
        return float(self.s_nodes[-1])

    @property
    def a_min(self) -> float:
        return float(self.a_nodes[0])

    @staticmethod
    def build(
        level: float,
        eta: float,
        ds: float,
        da: float,
        v_max: float,
        s_max: float | None = None,
        a_min: float | None = None,
    ) -> "Grid2D":
        if ds <= 0 or da <= 0:
            raise GridError("ds and da must be positive")
        if level < 0:
            raise ValueError("level must be nonnegative")
        if s_max is None:
            s_max = eta
        if s_max < eta:
            raise GridError(f"s_max={s_max} must cover the support bound eta={eta}")
        n_steps = max(1, math.ceil(s_max / ds - 1e-9))
        s_nodes = np.arange(n_steps + 1) * ds

        # snap da so that both a=0 and a=level land on nodes
        if level > 0:
            n_up = max(1, math.ceil(level / da - 1e-9))
            da_eff = level / n_up
        else:
            n_up = 0
            da_eff = da
        cutoff_floor = min(0.0, level - v_max * eta)
        target_min = cutoff_floor - 2.0 * da_eff if a_min is None else a_min
        if target_min > level - v_max * eta:
            raise DomainError(
                "a_min does not reach the exact-zero cutoff "
                f"(need <= {level - v_max * eta:g}, got {target_min:g})"
            )
        n_down = max(0, math.ceil((0.0 - target_min) / da_eff - 1e-9))
        n_a = n_down + n_up + 1
        a_nodes = (np.arange(n_a) - n_down) * da_eff
        grid = Grid2D(
            level=float(level), eta=float(eta), ds=float(ds), da=float(da_eff),
            s_nodes=s_nodes, a_nodes=a_nodes, zero_index=n_down,
        )
        if v_max * grid.ds > (level - grid.a_min):
            raise GridError(
                "a single s-step jumps the whole a-domain: "
                f"v_max*ds={v_max * grid.ds:g} > {level - grid.a_min:g}"
            )
        return grid


@dataclass(frozen=True)
class SGridTable:
    """Values of an operator applied to g, tabulated on the s-grid."""

    s_nodes: np.ndarray
    labels: tuple[str, ...]
    values: np.ndarray  # (n_s, len(labels))

    @property
    def ds(self) -> float:
        return float(self.s_nodes[1] - self.s_nodes[0])

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.labels.index(label)]

    def at(self, s: float) -> np.ndarray:
        return np.array(
            [np.interp(s, self.s_nodes, self.values[:, k], right=0.0)
             for k in range(self.values.shape[1])]
        )

    def to_boundary(self, eta: float | None = None) -> BoundaryFunction:
        return table_boundary(self.s_nodes, self.values, eta=eta)


@dataclass(frozen=True)
class GridFunction:
    """Solution of one passage solve.

    ``top_col`` is ``F(s, :, a=level)`` and ``zero_col`` is ``F(s, :, a=0)``
    for every s-node (these carry all downstream tables); ``row0`` is the
    full ``a`` profile at ``s = 0``.  ``values`` holds the dense cube
    (s, state, a) only when the grid is small enough to store it.
    """

    grid: Grid2D
    space: StateSpace
    sign: str
    g_sup: float
    top_col: np.ndarray   # (n_s, m)
    zero_col: np.ndarray  # (n_s, m)
    row0: np.ndarray      # (m, n_a)
    values: np.ndarray | None = None
    hit_indices: np.ndarray = field(default=None)   # states of the hit class
    start_indices: np.ndarray = field(default=None)  # states of the other class


def _march(
    model: FluidModel,
    space_v: np.ndarray,
    hit_idx: np.ndarray,
    g: BoundaryFunction,
    grid: Grid2D,
    keep_values: bool | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray | None]:
    impl = _backend.get_backend()
    m = model.m
    n_s, n_a = grid.n_s, grid.n_a
    ds, da = grid.ds, grid.da
    level, eta = grid.level, grid.eta
    v = space_v
    v_max = float(np.max(np.abs(v)))
    a_nodes = grid.a_nodes
    s_nodes = grid.s_nodes

    if keep_values is None:
        keep_values = n_s * m * n_a <= DENSE_VALUES_MAX
    values = np.zeros((n_s, m, n_a)) if keep_values else None

    # constant-in-s geometry of the characteristics
    shift = v * ds / da
    shift_base = np.floor(shift).astype(np.int64)
    shift_frac = shift - shift_base

    # crossing nodes per hit state: a_k + v_i ds > level, excluding the
    # boundary node itself; the crossing times s + theta are s-independent
    cross: list[tuple[int, int, np.ndarray, np.ndarray]] = []
    for li, i in enumerate(hit_idx):
        ks = np.nonzero(a_nodes + v[i] * ds > level + 1e-15)[0]
        ks = ks[ks < n_a - 1]
        if ks.size:
            theta = (level - a_nodes[ks]) / v[i]
            cross.append((li, int(i), ks, theta))

    g_on_grid = np.stack([g(s_nodes, li) for li in range(len(hit_idx))], axis=1)

    top_col = np.zeros((n_s, m))
    zero_col = np.zeros((n_s, m))
    F_next = np.zeros((m, n_a))
    F_out = np.zeros((m, n_a))

    # top row: s_max >= eta, everything vanishes there
    for li, i in enumerate(hit_idx):
        F_next[i, n_a - 1] = g_on_grid[n_s - 1, li]
    top_col[n_s - 1] = F_next[:, n_a - 1]
    zero_col[n_s - 1] = F_next[:, grid.zero_index]
    if values is not None:
        values[n_s - 1] = F_next

    for k_s in range(n_s - 2, -1, -1):
        s = s_nodes[k_s]
        lam = model.lam(float(s))
        impl.march_step(F_next, F_out, lam, shift_base, shift_frac, ds)

        # boundary and characteristic crossings on the hit class
        for li, i, ks, theta in cross:
            gv = g(s + theta, li)
            coup = np.zeros(ks.shape[0])
            for j in range(m):
                if j != i:
                    coup += lam[i, j] * F_next[j, ks]
            F_out[i, ks] = (1.0 + theta * lam[i, i]) * gv + theta * coup
        for li, i in enumerate(hit_idx):
            F_out[i, n_a - 1] = g_on_grid[k_s, li]

        # exact zero below the reachability line
        cut = level - v_max * max(eta - s, 0.0)
        F_out[:, a_nodes < cut] = 0.0

        top_col[k_s] = F_out[:, n_a - 1]
        zero_col[k_s] = F_out[:, grid.zero_index]
        if values is not None:
            values[k_s] = F_out
        F_next, F_out = F_out, F_next

    row0 = F_next.copy()  # after the swap this is the s=0 row
    return top_col, zero_col, row0, values


def solve_passage(
    model: FluidModel,
    g: BoundaryFunction,
    level: float,
    ds: float | None = None,
    da: float | None = None,
    s_max: float | None = None,
    a_min: float | None = None,
    keep_values: bool | None = None,
) -> GridFunction:
    """Backward-march the generator equation for the up-passage payoff.

    ``g`` is defined on the up-drift states.  Default steps are
    ``1e-3 * max(1, eta)`` in both directions.
    """
    return _solve_signed(model, g, level, "plus", ds, da, s_max, a_min, keep_values)


def solve_passage_minus(
    model: FluidModel,
    g: BoundaryFunction,
    level: float,
    ds: float | None = None,
    da: float | None = None,
    s_max: float | None = None,
    a_min: float | None = None,
    keep_values: bool | None = None,
) -> GridFunction:
    """Down-passage mirror: the same march with ``v`` negated internally."""
    return _solve_signed(model, g, level, "minus", ds, da, s_max, a_min, keep_values)


def _solve_signed(
    model, g, level, sign, ds, da, s_max, a_min, keep_values
) -> GridFunction:
    space = model.space
    if g.n_class != (space.m_plus if sign == "plus" else space.m_minus):
        raise ValueError("boundary function size does not match the hit class")
    if level < 0:
        raise ValueError("level must be nonnegative")
    if ds is None:
        ds = 1e-3 * max(1.0, g.eta)
    if da is None:
        da = 1e-3 * max(1.0, g.eta)
    v = space.v if sign == "plus" else -space.v
    hit_idx = space.plus_indices if sign == "plus" else space.minus_indices
    start_idx = space.minus_indices if sign == "plus" else space.plus_indices
    grid = Grid2D.build(level, g.eta, ds, da, space.v_max, s_max, a_min)
    top_col, zero_col, row0, values = _march(model, v, hit_idx, g, grid, keep_values)
    return GridFunction(
        grid=grid, space=space, sign=sign, g_sup=g.sup_norm(),
        top_col=top_col, zero_col=zero_col, row0=row0, values=values,
        hit_indices=hit_idx, start_indices=start_idx,
    )


def extract_J(F: GridFunction) -> SGridTable:
    """``(Jg)(s, i)`` for the start class: the ``a = level`` column.

    Translation invariance in ``a`` makes the level column the zero-passage
    table regardless of the level the solve used.
    """
    labels = tuple(F.space.labels[i] for i in F.start_indices)
    return SGridTable(F.grid.s_nodes, labels, F.top_col[:, F.start_indices])


def extract_P(F: GridFunction) -> SGridTable:
    """``(P_level g)(s, i)`` for the hit class: the ``a = 0`` column."""
    labels = tuple(F.space.labels[i] for i in F.hit_indices)
    return SGridTable(F.grid.s_nodes, labels, F.zero_col[:, F.hit_indices])


def extract_start_passage(F: GridFunction) -> SGridTable:
    """Level passage from the other class: ``a = 0`` on the start states.

    Probabilistically this is ``J`` chained after ``P_level`` (the path must
    first reach level 0 of the shifted picture, then climb the rest).
    """
    labels = tuple(F.space.labels[i] for i in F.start_indices)
    return SGridTable(F.grid.s_nodes, labels, F.zero_col[:, F.start_indices])


def apply_G(model: FluidModel, g: BoundaryFunction, J_values: SGridTable,
            sign: str = "plus") -> SGridTable:
    """Generator of the level semigroup applied to ``g`` on the hit class:

    ``(Gg)(s,i) = (1/v(i)) (dg/ds + sum_{hit} L_s(i,j) g(s,j)
    + sum_{start} L_s(i,j) (Jg)(s,j))``.
    """
    if not g.smooth:
        raise DerivativeUnavailable("apply_G needs a continuously differentiable g")
    space = model.space
    v_eff = space.v if sign == "plus" else -space.v
    hit_idx = space.plus_indices if sign == "plus" else space.minus_indices
    start_idx = space.minus_indices if sign == "plus" else space.plus_indices
    s_nodes = J_values.s_nodes
    gv = np.stack([g(s_nodes, li) for li in range(len(hit_idx))], axis=1)
    dgv = np.stack([g.derivative(s_nodes, li) for li in range(len(hit_idx))], axis=1)
    out = np.zeros((s_nodes.shape[0], len(hit_idx)))
    for k, s in enumerate(s_nodes):
        lam = model.lam(float(s))
        for li, i in enumerate(hit_idx):
            acc = dgv[k, li]
            for lj, j in enumerate(hit_idx):
                acc += lam[i, j] * gv[k, lj]
            for lj, j in enumerate(start_idx):
                acc += lam[i, j] * J_values.values[k, lj]
            out[k, li] = acc / v_eff[i]
    labels = tuple(space.labels[i] for i in hit_idx)
    return SGridTable(s_nodes, labels, out)


def check_identity_whd(
    model: FluidModel,
    g: BoundaryFunction,
    J_values: SGridTable,
    G_values: SGridTable,
    ds: float | None = None,
    da: float | None = None,
    sign: str = "plus",
) -> tuple[float, SGridTable]:
    """Residual of the derivative identity for the crossing operator:

    ``d/ds (Jg) = -C g - D (Jg) + V_start J(Gg)``

    per start-class state, with a central difference on the left and a fresh
    level-0 solve supplying ``J(Gg)``.  Returns (max interior residual,
    residual table).
    """
    if not g.smooth:
        raise DerivativeUnavailable("the identity needs a differentiable g")
    space = model.space
    v_eff = space.v if sign == "plus" else -space.v
    hit_idx = space.plus_indices if sign == "plus" else space.minus_indices
    start_idx = space.minus_indices if sign == "plus" else space.plus_indices
    s_nodes = J_values.s_nodes
    h = J_values.ds
    if ds is None:
        ds = h
    if da is None:
        da = h

    gg = G_values.to_boundary(eta=g.eta)
    solver = solve_passage if sign == "plus" else solve_passage_minus
    JG = extract_J(solver(model, gg, 0.0, ds=ds, da=da, s_max=float(s_nodes[-1])))

    n_s = s_nodes.shape[0]
    res = np.zeros((n_s, len(start_idx)))
    gv = np.stack([g(s_nodes, li) for li in range(len(hit_idx))], axis=1)
    for k in range(1, n_s - 1):
        lam = model.lam(float(s_nodes[k]))
        for li, i in enumerate(start_idx):
            lhs = (J_values.values[k + 1, li] - J_values.values[k - 1, li]) / (2.0 * h)
            rhs = 0.0
            for lj, j in enumerate(hit_idx):
                rhs -= lam[i, j] * gv[k, lj]
            for lj, j in enumerate(start_idx):
                rhs -= lam[i, j] * J_values.values[k, lj]
            rhs += v_eff[i] * JG.values[k, li]
            res[k, li] = lhs - rhs
    labels = tuple(space.labels[i] for i in start_idx)
    interior = res[1:-1]
    max_res = float(np.max(np.abs(interior))) if interior.size else 0.0
    return max_res, SGridTable(s_nodes, labels, res)
