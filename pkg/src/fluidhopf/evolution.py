"""Evolution system of the time-inhomogeneous chain.

``U(s, t)`` is the matrix of transition probabilities from time ``s`` to time
``t``.  It solves the forward ODE ``dU/du = U L(u)`` with ``U(s, s) = I``;
that orientation is what makes the flow property ``U(s,t) = U(s,r) U(r,t)``
and the short-time derivative ``d/dh U(s, s+h)|_0 = L(s)`` come out right.
Integration is fixed-step RK4: the matrices are tiny, so determinism beats
adaptivity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError
from .model import FluidModel

ROW_SUM_DRIFT_MAX = 1e-6
ENTRY_TOL = 1e-10


@dataclass(frozen=True)
class EvolutionMatrix:
    """Transition matrix over a time window, rows summing to one."""

    s: float
    t: float
    P: np.ndarray

    def row(self, i: int) -> np.ndarray:
        return self.P[i]


def _rk4_step(U: np.ndarray, model: FluidModel, u: float, h: float) -> np.ndarray:
    k1 = U @ model.lam(u)
    k2 = (U + 0.5 * h * k1) @ model.lam(u + 0.5 * h)
    k3 = (U + 0.5 * h * k2) @ model.lam(u + 0.5 * h)
    k4 = (U + h * k3) @ model.lam(u + h)
    return U + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def evolution_matrix(
    model: FluidModel, s: float, t: float, step: float = 1e-3
) -> EvolutionMatrix:
    """Integrate ``dU/du = U L(u)`` from ``s`` to ``t`` at a fixed step.

    The final partial step is shortened to land exactly on ``t``.  Rows are
    renormalized to sum to one when the accumulated drift is below 1e-6;
    larger drift raises IntegrationError (too-coarse step or invalid family).
    """
    if not (0 <= s <= t):
        raise ValueError(f"require 0 <= s <= t, got s={s}, t={t}")
    if step <= 0:
        raise ValueError("step must be positive")
    m = model.m
    U = np.eye(m)
    span = t - s
    if span > 0:
        n_full = int(span // step)
        u = s
        for _ in range(n_full):
            U = _rk4_step(U, model, u, step)
            u += step
        rem = t - u
        if rem > 1e-15 * max(1.0, t):
            U = _rk4_step(U, model, u, rem)

    rowsums = U.sum(axis=1)
    drift = float(np.max(np.abs(rowsums - 1.0)))
    if drift > ROW_SUM_DRIFT_MAX:
        raise IntegrationError(
            f"row-sum drift {drift:.3e} exceeds {ROW_SUM_DRIFT_MAX}; "
            "reduce the step or check the generator family"
        )
    U = U / rowsums[:, None]
    if float(np.min(U)) < -ENTRY_TOL or float(np.max(U)) > 1.0 + ENTRY_TOL:
        raise IntegrationError(
            f"entries outside [{-ENTRY_TOL}, 1+{ENTRY_TOL}]; reduce the step"
        )
    return EvolutionMatrix(s=float(s), t=float(t), P=np.clip(U, 0.0, 1.0))


def chapman_kolmogorov_residual(
    model: FluidModel, s: float, r: float, t: float, step: float = 1e-3
) -> float:
    """Max-norm of ``U(s,t) - U(s,r) U(r,t)``, a numerical self-test."""
    if not (s <= r <= t):
        raise ValueError(f"require s <= r <= t, got {s}, {r}, {t}")
    full = evolution_matrix(model, s, t, step).P
    left = evolution_matrix(model, s, r, step).P
    right = evolution_matrix(model, r, t, step).P
    return float(np.max(np.abs(full - left @ right)))
