# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled program executor (hot kernel).

Runs the same single-assignment instruction stream as the numpy fallback,
point by point, with a small per-register scratch block holding
[value, n gradient slots, n(n+1)/2 packed Hessian slots].  Reductions are
done by the caller so both backends share identical summation order.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport atan, cos, erf, exp, log, pow, sin, sqrt, tanh

cnp.import_array()

DEF TWO_OVER_SQRT_PI = 1.1283791670955126

# opcode values mirror gaussconc.program
DEF OP_CONST = 0
DEF OP_VAR = 1
DEF OP_ADD = 2
DEF OP_SUB = 3
DEF OP_MUL = 4
DEF OP_DIV = 5
DEF OP_NEG = 6
DEF OP_POWI = 7
DEF OP_POWR = 8
DEF OP_EXP = 9
DEF OP_LOG = 10
DEF OP_SQRT = 11
DEF OP_SIN = 12
DEF OP_COS = 13
DEF OP_TANH = 14
DEF OP_LOGISTIC = 15
DEF OP_ERF = 16
DEF OP_ATAN = 17

ERR_NONE = 0
ERR_DIV_ZERO = 1
ERR_POWI_ZERO = 2
ERR_POWR_NEG = 3
ERR_POWR_ZERO = 4
ERR_LOG_DOMAIN = 5
ERR_SQRT_DOMAIN = 6


cdef inline double _int_power(double u, int k) noexcept:
    cdef double p = u
    cdef int it
    for it in range(k - 1):
        p = p * u
    return p


def eval_program_compiled(
    int[::1] opcodes,
    int[::1] arg1,
    int[::1] arg2,
    double[::1] consts,
    int dim,
    double[:, ::1] pts,
    int order,
):
    """Execute the program; returns (vals, grads, hess, err, instr, point)."""
    cdef Py_ssize_t m_pts = pts.shape[0]
    cdef int n = dim
    cdef int n_packed = n * (n + 1) // 2
    cdef int n_instr = opcodes.shape[0]
    cdef int ncomp = 1
    if order >= 1:
        ncomp += n
    if order >= 2:
        ncomp += n_packed

    vals_arr = np.empty(m_pts, dtype=np.float64)
    grads_arr = np.empty((m_pts, n), dtype=np.float64) if order >= 1 else None
    hess_arr = np.empty((m_pts, n_packed), dtype=np.float64) if order >= 2 else None
    work_arr = np.empty((n_instr, ncomp), dtype=np.float64)

    cdef double[::1] vals = vals_arr
    cdef double[:, ::1] grads = grads_arr if order >= 1 else work_arr
    cdef double[:, ::1] hess = hess_arr if order >= 2 else work_arr
    cdef double[:, ::1] work = work_arr

    # packed (i, j) lookup per Hessian slot
    pii_arr = np.empty(n_packed, dtype=np.int32)
    pjj_arr = np.empty(n_packed, dtype=np.int32)
    cdef int[::1] pii = pii_arr
    cdef int[::1] pjj = pjj_arr
    cdef int q = 0, r_i, r_j
    for r_i in range(n):
        for r_j in range(r_i, n):
            pii[q] = r_i
            pjj[q] = r_j
            q += 1

    cdef Py_ssize_t pt
    cdef int k, a, b, c, kk
    cdef int op
    cdef double u, v, w, d1, d2, base, e, s, rr
    cdef int err = ERR_NONE
    cdef int err_instr = -1
    cdef Py_ssize_t err_point = -1
    cdef int last = n_instr - 1

    for pt in range(m_pts):
        for k in range(n_instr):
            op = opcodes[k]
            a = arg1[k]
            b = arg2[k]

            if op == OP_CONST:
                work[k, 0] = consts[k]
                for c in range(1, ncomp):
                    work[k, c] = 0.0
                continue
            if op == OP_VAR:
                work[k, 0] = pts[pt, a]
                for c in range(1, ncomp):
                    work[k, c] = 0.0
                if order >= 1:
                    work[k, 1 + a] = 1.0
                continue
            if op == OP_ADD:
                for c in range(ncomp):
                    work[k, c] = work[a, c] + work[b, c]
                continue
            if op == OP_SUB:
                for c in range(ncomp):
                    work[k, c] = work[a, c] - work[b, c]
                continue
            if op == OP_NEG:
                for c in range(ncomp):
                    work[k, c] = -work[a, c]
                continue
            if op == OP_MUL:
                u = work[a, 0]
                v = work[b, 0]
                work[k, 0] = u * v
                if order >= 1:
                    for c in range(n):
                        work[k, 1 + c] = v * work[a, 1 + c] + u * work[b, 1 + c]
                if order >= 2:
                    for q in range(n_packed):
                        work[k, 1 + n + q] = (
                            v * work[a, 1 + n + q] + u * work[b, 1 + n + q]
                            + work[a, 1 + pii[q]] * work[b, 1 + pjj[q]]
                            + work[b, 1 + pii[q]] * work[a, 1 + pjj[q]]
                        )
                continue
            if op == OP_DIV:
                u = work[a, 0]
                v = work[b, 0]
                if v == 0.0:
                    err = ERR_DIV_ZERO
                    err_instr = k
                    err_point = pt
                    break
                w = u / v
                work[k, 0] = w
                if order >= 1:
                    for c in range(n):
                        work[k, 1 + c] = (work[a, 1 + c] - w * work[b, 1 + c]) / v
                if order >= 2:
                    for q in range(n_packed):
                        work[k, 1 + n + q] = (
                            work[a, 1 + n + q] - w * work[b, 1 + n + q]
                            - work[k, 1 + pii[q]] * work[b, 1 + pjj[q]]
                            - work[b, 1 + pii[q]] * work[k, 1 + pjj[q]]
                        ) / v
                continue

            # unary chain: val, d1, d2 then work[k] = chain(work[a])
            u = work[a, 0]
            d2 = 0.0
            if op == OP_POWI:
                if b >= 2:
                    base = _int_power(u, b - 2) if b > 2 else 1.0
                    d2 = b * (b - 1) * base
                    d1 = b * base * u
                    v = base * u * u
                elif b == 1:
                    v = u
                    d1 = 1.0
                    d2 = 0.0
                else:
                    if u == 0.0:
                        err = ERR_POWI_ZERO
                        err_instr = k
                        err_point = pt
                        break
                    v = 1.0 / _int_power(u, -b)
                    d1 = b * v / u
                    d2 = b * (b - 1) * v / (u * u)
            elif op == OP_POWR:
                rr = consts[k]
                if u < 0.0:
                    err = ERR_POWR_NEG
                    err_instr = k
                    err_point = pt
                    break
                if u == 0.0 and rr <= 0.0:
                    err = ERR_POWR_ZERO
                    err_instr = k
                    err_point = pt
                    break
                v = pow(u, rr)
                d1 = rr * pow(u, rr - 1.0)
                d2 = rr * (rr - 1.0) * pow(u, rr - 2.0)
            elif op == OP_EXP:
                v = exp(u)
                d1 = v
                d2 = v
            elif op == OP_LOG:
                if u <= 0.0:
                    err = ERR_LOG_DOMAIN
                    err_instr = k
                    err_point = pt
                    break
                v = log(u)
                d1 = 1.0 / u
                d2 = -d1 * d1
            elif op == OP_SQRT:
                if u < 0.0:
                    err = ERR_SQRT_DOMAIN
                    err_instr = k
                    err_point = pt
                    break
                v = sqrt(u)
                d1 = 0.5 / v
                d2 = -0.5 * d1 / u
            elif op == OP_SIN:
                v = sin(u)
                d1 = cos(u)
                d2 = -v
            elif op == OP_COS:
                v = cos(u)
                d1 = -sin(u)
                d2 = -v
            elif op == OP_TANH:
                v = tanh(u)
                d1 = 1.0 - v * v
                d2 = -2.0 * v * d1
            elif op == OP_LOGISTIC:
                if u >= 0.0:
                    s = 1.0 / (1.0 + exp(-u))
                else:
                    e = exp(u)
                    s = e / (1.0 + e)
                v = s
                d1 = s * (1.0 - s)
                d2 = d1 * (1.0 - 2.0 * s)
            elif op == OP_ERF:
                v = erf(u)
                d1 = TWO_OVER_SQRT_PI * exp(-u * u)
                d2 = -2.0 * u * d1
            else:  # OP_ATAN
                v = atan(u)
                d1 = 1.0 / (1.0 + u * u)
                d2 = -2.0 * u * d1 * d1

            work[k, 0] = v
            if order >= 1:
                for c in range(n):
                    work[k, 1 + c] = d1 * work[a, 1 + c]
            if order >= 2:
                for q in range(n_packed):
                    work[k, 1 + n + q] = (
                        d1 * work[a, 1 + n + q]
                        + d2 * work[a, 1 + pii[q]] * work[a, 1 + pjj[q]]
                    )

        if err != ERR_NONE:
            break

        vals[pt] = work[last, 0]
        if order >= 1:
            for c in range(n):
                grads[pt, c] = work[last, 1 + c]
        if order >= 2:
            for q in range(n_packed):
                hess[pt, q] = work[last, 1 + n + q]

    return (
        vals_arr,
        grads_arr,
        hess_arr,
        err,
        err_instr,
        err_point,
    )
