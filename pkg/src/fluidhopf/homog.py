"""Wiener-Hopf factorization of a constant-generator fluid model.

For a kill rate ``c > 0`` the matrix ``M = V^{-1}(L - c I)`` splits as

    M S = S diag(Qp, -Qm),      S = [[I, Pm], [Pp, I]]

with ``Pp, Pm`` strictly substochastic and ``Qp, Qm`` sub-Markovian
generators.  The sign on the minus block is forced by the probabilistic
contract: ``exp(l Qm)`` is the discounted down-passage matrix, so it must be
a contraction.  The factors are read off an ordered real Schur decomposition
of ``M`` (stable invariant subspace -> plus factors, unstable -> minus) and
polished by Newton steps on the matrix Riccati residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NoConvergence, SpectralSplitError, SubspaceDefect
from .model import StateSpace, block_decompose

RESIDUAL_TARGET = 1e-10
NEWTON_TOL = 1e-13
NEWTON_MAX_ITER = 50
AXIS_MARGIN = 1e-10
COND_MAX = 1e12


@dataclass(frozen=True)
class HomogFactorization:
    """Factorization output in the (plus first, minus second) state order."""

    c: float
    Pi_plus: np.ndarray   # m- x m+, up-passage from below
    Pi_minus: np.ndarray  # m+ x m-, down-passage from above
    Q_plus: np.ndarray    # m+ x m+
    Q_minus: np.ndarray   # m- x m-
    residual: float

    @property
    def S(self) -> np.ndarray:
        mp = self.Q_plus.shape[0]
        mn = self.Q_minus.shape[0]
        S = np.empty((mp + mn, mp + mn))
        S[:mp, :mp] = np.eye(mp)
        S[:mp, mp:] = self.Pi_minus
        S[mp:, :mp] = self.Pi_plus
        S[mp:, mp:] = np.eye(mn)
        return S


def _drift_matrix(lam: np.ndarray, space: StateSpace, c: float) -> np.ndarray:
    """``V^{-1}(L - c I)`` in the partition order."""
    perm = space.permutation
    lam_p = lam[np.ix_(perm, perm)]
    v_p = space.v[perm]
    return (lam_p - c * np.eye(space.m)) / v_p[:, None]


def _riccati_residual_plus(Pi, Ainv, Binv, Cinv, Dinv):
    """R(Pi) = Pi Ainv + Pi Binv Pi - Dinv Pi - Cinv with V-scaled blocks."""
    return Pi @ Ainv + Pi @ Binv @ Pi - Dinv @ Pi - Cinv


def _newton_refine_plus(Pi, Ainv, Binv, Cinv, Dinv):
    """Newton iteration on the plus Riccati, one Sylvester solve per step.

    Linearizing R at Pi gives  L dPi + dPi N = -R(Pi)  with
    N = Ainv + Binv Pi (which is Q+ in scaled form) and L = Pi Binv - Dinv.
    """
    for _ in range(NEWTON_MAX_ITER):
        R = _riccati_residual_plus(Pi, Ainv, Binv, Cinv, Dinv)
        if float(np.max(np.abs(R))) <= NEWTON_TOL:
            break
        L = Pi @ Binv - Dinv
        N = Ainv + Binv @ Pi
        Pi = Pi + scipy.linalg.solve_sylvester(L, N, -R)
    return Pi


def factorize(lam, space: StateSpace, c: float) -> HomogFactorization:
    """Compute the factorization of ``V^{-1}(L - c I)`` for ``c > 0``.

    Raises SpectralSplitError when the stable eigenvalue count differs from
    the up-drift class size or an eigenvalue sits on the imaginary axis,
    SubspaceDefect when an invariant-subspace basis is near singular, and
    NoConvergence when Newton cannot reach 1e-10.
    """
    if c <= 0:
        raise ValueError("kill rate c must be positive")
    lam = np.asarray(lam, dtype=float)
    M = _drift_matrix(lam, space, c)
    mp, mn = space.m_plus, space.m_minus

    eigvals = np.linalg.eigvals(M)
    if float(np.min(np.abs(eigvals.real))) < AXIS_MARGIN:
        raise SpectralSplitError(
            f"eigenvalue within {AXIS_MARGIN} of the imaginary axis"
        )
    n_stable = int(np.sum(eigvals.real < 0.0))
    if n_stable != mp:
        raise SpectralSplitError(
            f"{n_stable} stable eigenvalues but {mp} up-drift states"
        )

    # Ordered real Schur forms; complex pairs stay together in the 2x2 blocks.
    _, Z_s, sdim_s = scipy.linalg.schur(M, output="real", sort="lhp")
    if sdim_s != mp:
        raise SpectralSplitError("Schur reordering split does not match m+")
    W = Z_s[:, :mp]
    _, Z_u, sdim_u = scipy.linalg.schur(M, output="real", sort="rhp")
    if sdim_u != mn:
        raise SpectralSplitError("Schur reordering split does not match m-")
    U = Z_u[:, :mn]

    W1, W2 = W[:mp, :], W[mp:, :]
    U1, U2 = U[:mp, :], U[mp:, :]
    if np.linalg.cond(W1) > COND_MAX:
        raise SubspaceDefect("stable basis top block is numerically singular")
    if np.linalg.cond(U2) > COND_MAX:
        raise SubspaceDefect("unstable basis bottom block is numerically singular")
    Pi_plus = np.linalg.solve(W1.T, W2.T).T
    Pi_minus = np.linalg.solve(U2.T, U1.T).T

    # V-scaled blocks of M; the plus Riccati is
    #   Pi Ainv + Pi Binv Pi - Dinv Pi - Cinv = 0
    # and the minus one is its mirror under (+ <-> -).
    Ainv, Binv = M[:mp, :mp], M[:mp, mp:]
    Cinv, Dinv = M[mp:, :mp], M[mp:, mp:]
    Pi_plus = _newton_refine_plus(Pi_plus, Ainv, Binv, Cinv, Dinv)
    Pi_minus = _newton_refine_plus(Pi_minus, Dinv, Cinv, Binv, Ainv)

    Q_plus = Ainv + Binv @ Pi_plus
    Q_minus = -(Dinv + Cinv @ Pi_minus)

    fact = HomogFactorization(
        c=float(c),
        Pi_plus=Pi_plus,
        Pi_minus=Pi_minus,
        Q_plus=Q_plus,
        Q_minus=Q_minus,
        residual=0.0,
    )
    res = factorization_residual(fact, lam, space)
    if res > RESIDUAL_TARGET:
        raise NoConvergence(
            f"factorization residual {res:.3e} above {RESIDUAL_TARGET}"
        )
    return HomogFactorization(
        c=fact.c,
        Pi_plus=Pi_plus,
        Pi_minus=Pi_minus,
        Q_plus=Q_plus,
        Q_minus=Q_minus,
        residual=res,
    )


def factorization_residual(
    fact: HomogFactorization, lam, space: StateSpace
) -> float:
    """Max-norm of ``V^{-1}(L - c I) S - S diag(Q+, -Q-)``."""
    lam = np.asarray(lam, dtype=float)
    M = _drift_matrix(lam, space, fact.c)
    S = fact.S
    mp = fact.Q_plus.shape[0]
    mn = fact.Q_minus.shape[0]
    D = np.zeros((mp + mn, mp + mn))
    D[:mp, :mp] = fact.Q_plus
    D[mp:, mp:] = -fact.Q_minus
    return float(np.max(np.abs(M @ S - S @ D)))


def homog_passage_matrix(
    fact: HomogFactorization, level: float, sign: str, from_side: str
) -> np.ndarray:
    """Discounted passage matrix ``E[exp(-c tau) 1{X(tau)=j}]`` at a level.

    ``sign`` picks up- or down-passage; ``from_side`` picks the start class.
    Starting in the hit class gives ``exp(level Q)``; starting on the other
    side prepends the matching crossing matrix ``Pi``.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    if sign not in ("plus", "minus"):
        raise ValueError("sign must be 'plus' or 'minus'")
    if from_side not in ("plus", "minus"):
        raise ValueError("from_side must be 'plus' or 'minus'")
    if sign == "plus":
        core = scipy.linalg.expm(level * fact.Q_plus)
        return core if from_side == "plus" else fact.Pi_plus @ core
    core = scipy.linalg.expm(level * fact.Q_minus)
    return core if from_side == "minus" else fact.Pi_minus @ core


def permuted_generator(lam, space: StateSpace) -> np.ndarray:
    """The generator reordered so the up-drift states come first."""
    blocks = block_decompose(lam, space)
    return np.block([[blocks.A, blocks.B], [blocks.C, blocks.D]])
