"""Pure-Python/numpy kernels: the fallback backend.

The Cython module ``_kernels_cy`` mirrors every routine here operation for
operation; scalar math uses :mod:`math` (same libm calls as the C code) so
both backends produce identical floating-point results.  Keep the two files
in sync when touching either.
"""

from __future__ import annotations

import math

import numpy as np

from ._family import (
    KIND_CONSTANT,
    KIND_FOURIER_POLY,
    KIND_PIECEWISE,
    FamilyPack,
)

BACKEND_NAME = "python"

RATE_FLOOR = -1e-12
SIMPSON_REL_TOL = 1e-10
BISECT_REL_TOL = 1e-12
_INF = math.inf


# -- generator evaluation ----------------------------------------------------

def _rate(pack: FamilyPack, i: int, t: float) -> float:
    """Holding intensity ``-L_t(i, i)``."""
    if pack.kind == KIND_CONSTANT:
        return -pack.const_mat[i, i]
    if pack.kind == KIND_PIECEWISE:
        breaks = pack.pw_breaks
        p = 0
        while p < breaks.shape[0] and t >= breaks[p]:
            p += 1
        return -pack.pw_mats[p, i, i]
    val = pack.fp_base[i, i]
    for k in range(pack.fp_omega.shape[0]):
        val += math.sin(pack.fp_omega[k] * t + pack.fp_phase[k]) * pack.fp_coefs[k, i, i]
    for k in range(pack.pp_degs.shape[0]):
        val += (t ** pack.pp_degs[k]) * pack.pp_coefs[k, i, i]
    return -val


def _row(pack: FamilyPack, i: int, t: float, out: np.ndarray) -> None:
    """Generator row ``L_t(i, :)`` written into ``out``."""
    m = pack.m
    if pack.kind == KIND_CONSTANT:
        for j in range(m):
            out[j] = pack.const_mat[i, j]
        return
    if pack.kind == KIND_PIECEWISE:
        breaks = pack.pw_breaks
        p = 0
        while p < breaks.shape[0] and t >= breaks[p]:
            p += 1
        for j in range(m):
            out[j] = pack.pw_mats[p, i, j]
        return
    for j in range(m):
        out[j] = pack.fp_base[i, j]
    for k in range(pack.fp_omega.shape[0]):
        w = math.sin(pack.fp_omega[k] * t + pack.fp_phase[k])
        for j in range(m):
            out[j] += w * pack.fp_coefs[k, i, j]
    for k in range(pack.pp_degs.shape[0]):
        w = t ** pack.pp_degs[k]
        for j in range(m):
            out[j] += w * pack.pp_coefs[k, i, j]


# -- cumulative hazard -------------------------------------------------------

def _simpson_smooth(pack: FamilyPack, i: int, t0: float, t1: float) -> float:
    """Adaptive Simpson integral of the rate over [t0, t1] (smooth kinds).

    Returns NaN when a rate below the -1e-12 floor is evaluated.
    """
    f0 = _rate(pack, i, t0)
    f1 = _rate(pack, i, t1)
    fm = _rate(pack, i, 0.5 * (t0 + t1))
    if f0 < RATE_FLOOR or f1 < RATE_FLOOR or fm < RATE_FLOOR:
        return math.nan
    whole = (t1 - t0) / 6.0 * (f0 + 4.0 * fm + f1)
    tol = SIMPSON_REL_TOL * max(abs(whole), 1e-4)
    # explicit stack of (a, b, fa, fm, fb, S, tol); capped at the same depth
    # as the compiled kernel so both backends agree bitwise
    stack = [(t0, t1, f0, fm, f1, whole, tol)]
    total = 0.0
    while stack:
        a, b, fa, fmid, fb, S, tl = stack.pop()
        m_ = 0.5 * (a + b)
        lm = _rate(pack, i, 0.5 * (a + m_))
        rm = _rate(pack, i, 0.5 * (m_ + b))
        if lm < RATE_FLOOR or rm < RATE_FLOOR:
            return math.nan
        Sl = (m_ - a) / 6.0 * (fa + 4.0 * lm + fmid)
        Sr = (b - m_) / 6.0 * (fmid + 4.0 * rm + fb)
        err = Sl + Sr - S
        if abs(err) <= 15.0 * tl or (b - a) < 1e-12 or len(stack) + 2 > 256:
            total += Sl + Sr + err / 15.0
        else:
            stack.append((a, m_, fa, lm, fmid, Sl, 0.5 * tl))
            stack.append((m_, b, fmid, rm, fb, Sr, 0.5 * tl))
    return total


def hazard_integral(pack: FamilyPack, i: int, t0: float, t1: float) -> float:
    """Integral of the holding intensity of state ``i`` over [t0, t1]."""
    if t1 <= t0:
        return 0.0
    if pack.kind == KIND_CONSTANT:
        r = _rate(pack, i, t0)
        if r < RATE_FLOOR:
            return math.nan
        return r * (t1 - t0)
    if pack.kind == KIND_PIECEWISE:
        breaks = pack.pw_breaks
        total = 0.0
        lo = t0
        for p in range(breaks.shape[0] + 1):
            hi_piece = breaks[p] if p < breaks.shape[0] else _INF
            if lo >= hi_piece:
                continue
            hi = min(t1, hi_piece)
            if hi > lo:
                r = -pack.pw_mats[p, i, i]
                if r < RATE_FLOOR:
                    return math.nan
                total += r * (hi - lo)
                lo = hi
            if lo >= t1:
                break
        return total
    return _simpson_smooth(pack, i, t0, t1)


def next_holding(gen, pack: FamilyPack, i: int, u: float, remaining: float) -> float:
    """Holding time in state ``i`` from time ``u``, capped at ``remaining``.

    Inverts the cumulative hazard against an Exp(1) draw: windows bounded by
    the declared rate cap locate the root interval, bisection with
    incremental hazard evaluation pins it down.  Returns +inf when the hazard
    over the window never reaches the draw (no jump before the cap), NaN on a
    negative-rate detection.
    """
    E = -math.log1p(-gen.random())
    Kp = max(pack.bound_K, 1e-12)
    pos = 0.0
    acc = 0.0
    while pos < remaining:
        guaranteed = (E - acc) / Kp
        wlen = max(guaranteed, 0.5 / Kp)
        if wlen > remaining - pos:
            wlen = remaining - pos
        dH = hazard_integral(pack, i, u + pos, u + pos + wlen)
        if math.isnan(dH):
            return math.nan
        if acc + dH >= E and dH > 0.0:
            lo = pos
            hi = pos + wlen
            Hlo = acc
            while hi - lo > BISECT_REL_TOL * max(1.0, hi):
                mid = 0.5 * (lo + hi)
                dHm = hazard_integral(pack, i, u + lo, u + mid)
                if math.isnan(dHm):
                    return math.nan
                Hmid = Hlo + dHm
                if Hmid >= E:
                    hi = mid
                else:
                    lo = mid
                    Hlo = Hmid
            return 0.5 * (lo + hi)
        acc += dH
        pos += wlen
    return _INF


def pick_destination(gen, pack: FamilyPack, i: int, t: float, row_buf: np.ndarray) -> int:
    """Jump destination j != i with probability L_t(i,j)/(-L_t(i,i))."""
    m = pack.m
    _row(pack, i, t, row_buf)
    total = 0.0
    for j in range(m):
        if j != i:
            w = row_buf[j]
            if w > 0.0:
                total += w
    if total <= 0.0:
        # cannot happen at a genuine jump time; deterministic fallback
        best = -1
        bestw = -_INF
        for j in range(m):
            if j != i and row_buf[j] > bestw:
                bestw = row_buf[j]
                best = j
        return best
    target = gen.random() * total
    cum = 0.0
    last = -1
    for j in range(m):
        if j != i:
            w = row_buf[j]
            if w > 0.0:
                cum += w
                last = j
                if target < cum:
                    return j
    return last


def run_passage_path(
    gen,
    pack: FamilyPack,
    v: np.ndarray,
    s0: float,
    i0: int,
    horizon: float,
    level: float,
    sign_plus: bool,
) -> tuple[float, int, bool]:
    """Simulate one path until the level crossing or the horizon.

    Returns ``(tau, hit_state, censored)``; raises nothing, signals a hazard
    violation with ``hit_state = -2``.
    """
    row_buf = np.empty(pack.m)
    u = s0
    i = i0
    phi = 0.0
    while True:
        r0 = _rate(pack, i, u)
        if math.isnan(r0) or r0 < RATE_FLOOR:
            return (math.nan, -2, True)
        hold = next_holding(gen, pack, i, u, horizon - u)
        if math.isnan(hold):
            return (math.nan, -2, True)
        jump_t = u + hold
        seg_end = jump_t if jump_t < horizon else horizon
        slope = v[i]
        dt = seg_end - u
        if sign_plus:
            if slope > 0.0 and phi + slope * dt > level:
                return (u + (level - phi) / slope, i, False)
        else:
            if slope < 0.0 and phi + slope * dt < -level:
                return (u + (-level - phi) / slope, i, False)
        phi += slope * dt
        if not (jump_t < horizon):
            return (_INF, -1, True)
        j = pick_destination(gen, pack, i, jump_t, row_buf)
        if j < 0:
            return (math.nan, -2, True)
        u = jump_t
        i = j


def run_jump_times(
    gen, pack: FamilyPack, s0: float, i0: int, horizon: float, n_jumps: int
) -> np.ndarray:
    """Times (elapsed since s0) of the first ``n_jumps`` jumps, inf-padded."""
    row_buf = np.empty(pack.m)
    out = np.full(n_jumps, _INF)
    u = s0
    i = i0
    for k in range(n_jumps):
        hold = next_holding(gen, pack, i, u, horizon - u)
        if math.isnan(hold):
            raise FloatingPointError("negative rate during jump sampling")
        if not (u + hold < horizon):
            break
        u = u + hold
        out[k] = u - s0
        j = pick_destination(gen, pack, i, u, row_buf)
        if j < 0:
            raise FloatingPointError("no destination available")
        i = j
    return out


# -- semi-Lagrangian march ---------------------------------------------------

def march_step(
    F_next: np.ndarray,   # (m, n_a) values at s + ds
    F_out: np.ndarray,    # (m, n_a) output, values at s
    lam: np.ndarray,      # (m, m) generator at time s
    shift_base: np.ndarray,  # (m,) int, floor(v_i * ds / da)
    shift_frac: np.ndarray,  # (m,) float in [0, 1)
    ds: float,
) -> None:
    """One backward transport step.

    ``F_out[i,k] = (1 + ds L_ii) * interp(F_next[i], k + shift_i)
    + ds * sum_{j != i} L_ij F_next[j,k]``; feet outside the grid read as
    zero below (the exact-zero region) and clamp above (those nodes are
    overwritten by the boundary-crossing patch).
    """
    m, n_a = F_next.shape
    ks = np.arange(n_a)
    for i in range(m):
        base = int(shift_base[i])
        w = float(shift_frac[i])
        idx0 = ks + base
        idx1 = idx0 + 1
        v0 = np.where(idx0 >= 0, F_next[i, np.clip(idx0, 0, n_a - 1)], 0.0)
        v1 = np.where(idx1 >= 0, F_next[i, np.clip(idx1, 0, n_a - 1)], 0.0)
        interp = (1.0 - w) * v0 + w * v1
        c0 = 1.0 + ds * lam[i, i]
        acc = c0 * interp
        for j in range(m):
            if j != i:
                coef = ds * lam[i, j]
                acc = acc + coef * F_next[j]
        F_out[i, :] = acc
