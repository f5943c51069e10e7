# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: line-for-line mirror of ``_kernels_py``.

Scalar math goes through libm exactly as the Python fallback does through
:mod:`math`, and uniform draws come from the same numpy bit generator, so the
two backends produce identical floating-point output.  Keep in sync with
``_kernels_py.py``.
"""

from libc.math cimport INFINITY, NAN, fabs, isnan, log1p, sin, pow as cpow

import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t

cnp.import_array()

BACKEND_NAME = "cython"

cdef double RATE_FLOOR = -1e-12
cdef double SIMPSON_REL_TOL = 1e-10
cdef double BISECT_REL_TOL = 1e-12
cdef int SIMPSON_STACK_MAX = 256

cdef int KIND_CONSTANT = 0
cdef int KIND_PIECEWISE = 1
cdef int KIND_FOURIER_POLY = 2


# -- family pack (C view) ----------------------------------------------------

cdef struct CPack:
    int kind
    int m
    double bound_K
    int nb
    int nf
    int npq
    const double *const_mat
    const double *pw_breaks
    const double *pw_mats
    const double *fp_base
    const double *fp_coefs
    const double *fp_omega
    const double *fp_phase
    const double *pp_coefs
    const double *pp_degs


cdef class PackView:
    """Keeps the numpy arrays of a FamilyPack alive next to raw pointers."""
    cdef CPack c
    cdef object refs

    def __init__(self, pack):
        arrs = [
            np.ascontiguousarray(pack.const_mat, dtype=np.float64),
            np.ascontiguousarray(pack.pw_breaks, dtype=np.float64),
            np.ascontiguousarray(pack.pw_mats, dtype=np.float64),
            np.ascontiguousarray(pack.fp_base, dtype=np.float64),
            np.ascontiguousarray(pack.fp_coefs, dtype=np.float64),
            np.ascontiguousarray(pack.fp_omega, dtype=np.float64),
            np.ascontiguousarray(pack.fp_phase, dtype=np.float64),
            np.ascontiguousarray(pack.pp_coefs, dtype=np.float64),
            np.ascontiguousarray(pack.pp_degs, dtype=np.float64),
        ]
        self.refs = arrs
        self.c.kind = pack.kind
        self.c.m = pack.m
        self.c.bound_K = pack.bound_K
        self.c.nb = arrs[1].shape[0]
        self.c.nf = arrs[5].shape[0]
        self.c.npq = arrs[8].shape[0]
        self.c.const_mat = <const double *> cnp.PyArray_DATA(arrs[0])
        self.c.pw_breaks = <const double *> cnp.PyArray_DATA(arrs[1])
        self.c.pw_mats = <const double *> cnp.PyArray_DATA(arrs[2])
        self.c.fp_base = <const double *> cnp.PyArray_DATA(arrs[3])
        self.c.fp_coefs = <const double *> cnp.PyArray_DATA(arrs[4])
        self.c.fp_omega = <const double *> cnp.PyArray_DATA(arrs[5])
        self.c.fp_phase = <const double *> cnp.PyArray_DATA(arrs[6])
        self.c.pp_coefs = <const double *> cnp.PyArray_DATA(arrs[7])
        self.c.pp_degs = <const double *> cnp.PyArray_DATA(arrs[8])


def make_pack_view(pack):
    return PackView(pack)


cdef inline bitgen_t *_bitgen(object gen):
    capsule = gen.bit_generator.capsule
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _u01(bitgen_t *bg) noexcept nogil:
    return bg.next_double(bg.state)


# -- generator evaluation ----------------------------------------------------

cdef double _rate(const CPack *p, int i, double t) noexcept nogil:
    cdef double val
    cdef int k, piece
    cdef int m = p.m
    if p.kind == KIND_CONSTANT:
        return -p.const_mat[i * m + i]
    if p.kind == KIND_PIECEWISE:
        piece = 0
        while piece < p.nb and t >= p.pw_breaks[piece]:
            piece += 1
        return -p.pw_mats[(piece * m + i) * m + i]
    val = p.fp_base[i * m + i]
    for k in range(p.nf):
        val += sin(p.fp_omega[k] * t + p.fp_phase[k]) * p.fp_coefs[(k * m + i) * m + i]
    for k in range(p.npq):
        val += cpow(t, p.pp_degs[k]) * p.pp_coefs[(k * m + i) * m + i]
    return -val


cdef void _rowc(const CPack *p, int i, double t, double *out) noexcept nogil:
    cdef int j, k, piece
    cdef double w
    cdef int m = p.m
    if p.kind == KIND_CONSTANT:
        for j in range(m):
            out[j] = p.const_mat[i * m + j]
        return
    if p.kind == KIND_PIECEWISE:
        piece = 0
        while piece < p.nb and t >= p.pw_breaks[piece]:
            piece += 1
        for j in range(m):
            out[j] = p.pw_mats[(piece * m + i) * m + j]
        return
    for j in range(m):
        out[j] = p.fp_base[i * m + j]
    for k in range(p.nf):
        w = sin(p.fp_omega[k] * t + p.fp_phase[k])
        for j in range(m):
            out[j] += w * p.fp_coefs[(k * m + i) * m + j]
    for k in range(p.npq):
        w = cpow(t, p.pp_degs[k])
        for j in range(m):
            out[j] += w * p.pp_coefs[(k * m + i) * m + j]


# -- cumulative hazard -------------------------------------------------------

cdef struct SimpFrame:
    double a
    double b
    double fa
    double fm
    double fb
    double S
    double tol


cdef double _simpson_smooth(const CPack *p, int i, double t0, double t1) noexcept nogil:
    cdef double f0, f1, fm, whole, tol, total
    cdef double a, b, fa, fmid, fb, S, tl, m_, lm, rm, Sl, Sr, err
    cdef SimpFrame stack[256]
    cdef int top
    f0 = _rate(p, i, t0)
    f1 = _rate(p, i, t1)
    fm = _rate(p, i, 0.5 * (t0 + t1))
    if f0 < RATE_FLOOR or f1 < RATE_FLOOR or fm < RATE_FLOOR:
        return NAN
    whole = (t1 - t0) / 6.0 * (f0 + 4.0 * fm + f1)
    tol = SIMPSON_REL_TOL * max(fabs(whole), 1e-4)
    stack[0].a = t0
    stack[0].b = t1
    stack[0].fa = f0
    stack[0].fm = fm
    stack[0].fb = f1
    stack[0].S = whole
    stack[0].tol = tol
    top = 1
    total = 0.0
    while top > 0:
        top -= 1
        a = stack[top].a
        b = stack[top].b
        fa = stack[top].fa
        fmid = stack[top].fm
        fb = stack[top].fb
        S = stack[top].S
        tl = stack[top].tol
        m_ = 0.5 * (a + b)
        lm = _rate(p, i, 0.5 * (a + m_))
        rm = _rate(p, i, 0.5 * (m_ + b))
        if lm < RATE_FLOOR or rm < RATE_FLOOR:
            return NAN
        Sl = (m_ - a) / 6.0 * (fa + 4.0 * lm + fmid)
        Sr = (b - m_) / 6.0 * (fmid + 4.0 * rm + fb)
        err = Sl + Sr - S
        if fabs(err) <= 15.0 * tl or (b - a) < 1e-12 or top + 2 > SIMPSON_STACK_MAX:
            total += Sl + Sr + err / 15.0
        else:
            stack[top].a = a
            stack[top].b = m_
            stack[top].fa = fa
            stack[top].fm = lm
            stack[top].fb = fmid
            stack[top].S = Sl
            stack[top].tol = 0.5 * tl
            top += 1
            stack[top].a = m_
            stack[top].b = b
            stack[top].fa = fmid
            stack[top].fm = rm
            stack[top].fb = fb
            stack[top].S = Sr
            stack[top].tol = 0.5 * tl
            top += 1
    return total


cdef double _hazard_integral(const CPack *p, int i, double t0, double t1) noexcept nogil:
    cdef double r, total, lo, hi, hi_piece
    cdef int piece
    cdef int m = p.m
    if t1 <= t0:
        return 0.0
    if p.kind == KIND_CONSTANT:
        r = _rate(p, i, t0)
        if r < RATE_FLOOR:
            return NAN
        return r * (t1 - t0)
    if p.kind == KIND_PIECEWISE:
        total = 0.0
        lo = t0
        for piece in range(p.nb + 1):
            hi_piece = p.pw_breaks[piece] if piece < p.nb else INFINITY
            if lo >= hi_piece:
                continue
            hi = t1 if t1 < hi_piece else hi_piece
            if hi > lo:
                r = -p.pw_mats[(piece * m + i) * m + i]
                if r < RATE_FLOOR:
                    return NAN
                total += r * (hi - lo)
                lo = hi
            if lo >= t1:
                break
        return total
    return _simpson_smooth(p, i, t0, t1)


cdef double _next_holding(bitgen_t *bg, const CPack *p, int i, double u,
                          double remaining) noexcept nogil:
    cdef double E, Kp, pos, acc, guaranteed, wlen, dH
    cdef double lo, hi, Hlo, mid, dHm, Hmid
    E = -log1p(-_u01(bg))
    Kp = p.bound_K if p.bound_K > 1e-12 else 1e-12
    pos = 0.0
    acc = 0.0
    while pos < remaining:
        guaranteed = (E - acc) / Kp
        wlen = guaranteed if guaranteed > 0.5 / Kp else 0.5 / Kp
        if wlen > remaining - pos:
            wlen = remaining - pos
        dH = _hazard_integral(p, i, u + pos, u + pos + wlen)
        if isnan(dH):
            return NAN
        if acc + dH >= E and dH > 0.0:
            lo = pos
            hi = pos + wlen
            Hlo = acc
            while hi - lo > BISECT_REL_TOL * max(1.0, hi):
                mid = 0.5 * (lo + hi)
                dHm = _hazard_integral(p, i, u + lo, u + mid)
                if isnan(dHm):
                    return NAN
                Hmid = Hlo + dHm
                if Hmid >= E:
                    hi = mid
                else:
                    lo = mid
                    Hlo = Hmid
            return 0.5 * (lo + hi)
        acc += dH
        pos += wlen
    return INFINITY


cdef int _pick_destination(bitgen_t *bg, const CPack *p, int i, double t,
                           double *row_buf) noexcept nogil:
    cdef int j, last, best
    cdef double total, w, target, cum, bestw
    cdef int m = p.m
    _rowc(p, i, t, row_buf)
    total = 0.0
    for j in range(m):
        if j != i:
            w = row_buf[j]
            if w > 0.0:
                total += w
    if total <= 0.0:
        best = -1
        bestw = -INFINITY
        for j in range(m):
            if j != i and row_buf[j] > bestw:
                bestw = row_buf[j]
                best = j
        return best
    target = _u01(bg) * total
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


cdef int _run_passage_c(bitgen_t *bg, const CPack *p, const double *v,
                        double s0, int i0, double horizon, double level,
                        bint sign_plus, double *tau_out, int *hit_out,
                        double *row_buf) noexcept nogil:
    """Returns 0 on crossing, 1 on censoring, -1 on hazard violation."""
    cdef double u, phi, r0, hold, jump_t, seg_end, slope, dt
    cdef int i, j
    u = s0
    i = i0
    phi = 0.0
    while True:
        r0 = _rate(p, i, u)
        if isnan(r0) or r0 < RATE_FLOOR:
            return -1
        hold = _next_holding(bg, p, i, u, horizon - u)
        if isnan(hold):
            return -1
        jump_t = u + hold
        seg_end = jump_t if jump_t < horizon else horizon
        slope = v[i]
        dt = seg_end - u
        if sign_plus:
            if slope > 0.0 and phi + slope * dt > level:
                tau_out[0] = u + (level - phi) / slope
                hit_out[0] = i
                return 0
        else:
            if slope < 0.0 and phi + slope * dt < -level:
                tau_out[0] = u + (-level - phi) / slope
                hit_out[0] = i
                return 0
        phi += slope * dt
        if not (jump_t < horizon):
            tau_out[0] = INFINITY
            hit_out[0] = -1
            return 1
        j = _pick_destination(bg, p, i, jump_t, row_buf)
        if j < 0:
            return -1
        u = jump_t
        i = j


# -- python-visible entry points ----------------------------------------------

def next_holding(object gen, object pack, int i, double u, double remaining):
    cdef PackView pv = pack if isinstance(pack, PackView) else PackView(pack)
    cdef bitgen_t *bg = _bitgen(gen)
    cdef double out
    with nogil:
        out = _next_holding(bg, &pv.c, i, u, remaining)
    return out


def pick_destination(object gen, object pack, int i, double t, cnp.ndarray row_buf):
    cdef PackView pv = pack if isinstance(pack, PackView) else PackView(pack)
    cdef bitgen_t *bg = _bitgen(gen)
    cdef double *buf = <double *> cnp.PyArray_DATA(row_buf)
    cdef int out
    with nogil:
        out = _pick_destination(bg, &pv.c, i, t, buf)
    return out


def run_passage_path(object gen, object pack, cnp.ndarray v, double s0, int i0,
                     double horizon, double level, bint sign_plus):
    cdef PackView pv = pack if isinstance(pack, PackView) else PackView(pack)
    cdef bitgen_t *bg = _bitgen(gen)
    cdef cnp.ndarray vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef const double *vp = <const double *> cnp.PyArray_DATA(vv)
    cdef double tau = NAN
    cdef int hit = -2
    cdef int status
    cdef cnp.ndarray keep = np.empty(pv.c.m, dtype=np.float64)
    cdef double *row_buf = <double *> cnp.PyArray_DATA(keep)
    with nogil:
        status = _run_passage_c(bg, &pv.c, vp, s0, i0, horizon, level,
                                sign_plus, &tau, &hit, row_buf)
    if status < 0:
        return (NAN, -2, True)
    if status == 1:
        return (INFINITY, -1, True)
    return (tau, hit, False)


def run_jump_times(object gen, object pack, double s0, int i0, double horizon,
                   int n_jumps):
    cdef PackView pv = pack if isinstance(pack, PackView) else PackView(pack)
    cdef bitgen_t *bg = _bitgen(gen)
    cdef cnp.ndarray out = np.full(n_jumps, np.inf)
    cdef double *op = <double *> cnp.PyArray_DATA(out)
    cdef cnp.ndarray buf = np.empty(pv.c.m, dtype=np.float64)
    cdef double *row_buf = <double *> cnp.PyArray_DATA(buf)
    cdef double u = s0, hold
    cdef int i = i0, j, k, bad = 0
    with nogil:
        for k in range(n_jumps):
            hold = _next_holding(bg, &pv.c, i, u, horizon - u)
            if isnan(hold):
                bad = 1
                break
            if not (u + hold < horizon):
                break
            u = u + hold
            op[k] = u - s0
            j = _pick_destination(bg, &pv.c, i, u, row_buf)
            if j < 0:
                bad = 1
                break
            i = j
    if bad:
        raise FloatingPointError("negative rate during jump sampling")
    return out


def march_step(cnp.ndarray F_next, cnp.ndarray F_out, cnp.ndarray lam,
               cnp.ndarray shift_base, cnp.ndarray shift_frac, double ds):
    cdef double[:, ::1] Fn = F_next
    cdef double[:, ::1] Fo = F_out
    cdef double[:, ::1] L = lam
    cdef long[::1] sb = shift_base
    cdef double[::1] sw = shift_frac
    cdef int m = Fn.shape[0]
    cdef int n_a = Fn.shape[1]
    cdef int i, j, k
    cdef long base, i0, i1
    cdef double w, c0, v0, v1, acc, coef
    with nogil:
        for i in range(m):
            base = sb[i]
            w = sw[i]
            c0 = 1.0 + ds * L[i, i]
            for k in range(n_a):
                i0 = k + base
                i1 = i0 + 1
                if i0 < 0:
                    v0 = 0.0
                elif i0 > n_a - 1:
                    v0 = Fn[i, n_a - 1]
                else:
                    v0 = Fn[i, i0]
                if i1 < 0:
                    v1 = 0.0
                elif i1 > n_a - 1:
                    v1 = Fn[i, n_a - 1]
                else:
                    v1 = Fn[i, i1]
                acc = c0 * ((1.0 - w) * v0 + w * v1)
                for j in range(m):
                    if j != i:
                        coef = ds * L[i, j]
                        acc = acc + coef * Fn[j, k]
                Fo[i, k] = acc
