"""Pure-numpy program executor (fallback backend).

Registers hold whole-batch arrays; first and second derivative
coefficients are propagated alongside values (forward mode).  The packed
upper-triangular Hessian layout makes the symmetry of second derivatives
structural rather than numerical.
"""
from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf

from ..errors import EvaluationDomainError
from ..program import (
    OP_ADD,
    OP_ATAN,
    OP_CONST,
    OP_COS,
    OP_DIV,
    OP_ERF,
    OP_EXP,
    OP_LOG,
    OP_LOGISTIC,
    OP_MUL,
    OP_NEG,
    OP_POWI,
    OP_POWR,
    OP_SIN,
    OP_SQRT,
    OP_SUB,
    OP_TANH,
    OP_VAR,
    Program,
    packed_hessian_indices,
)

_TWO_OVER_SQRT_PI = 1.1283791670955126


def _raise_domain(message, prog, instr, pts, mask):
    bad = int(np.argmax(mask))
    raise EvaluationDomainError(message, prog.texts[instr], pts[bad])


def _logistic(u):
    out = np.empty_like(u)
    pos = u >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def _int_power(u, k):
    # Repeated multiplication; k >= 1.
    p = u.copy()
    for _ in range(k - 1):
        p = p * u
    return p


def eval_program(prog: Program, pts: np.ndarray, order: int):
    """Run ``prog`` over a batch of points.

    Returns (values, gradients, packed_hessians); the derivative slots are
    None below the requested ``order``.  Domain violations raise
    EvaluationDomainError naming the offending sub-expression and point.
    """
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != prog.dimension:
        raise ValueError(
            f"points must have shape (m, {prog.dimension}), got {pts.shape}")
    # Overflow to inf and inf/nan propagation are sanctioned (consumers
    # check finiteness); domain problems are raised explicitly below.
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return _run(prog, pts, order)


def _run(prog: Program, pts: np.ndarray, order: int):
    m_pts, n = pts.shape
    n_packed = n * (n + 1) // 2
    ii, jj = packed_hessian_indices(n)

    n_instr = prog.n_instructions
    rv = [None] * n_instr
    rg = [None] * n_instr if order >= 1 else None
    rh = [None] * n_instr if order >= 2 else None

    def outer(ga, gb):
        return ga[:, ii] * gb[:, jj] + gb[:, ii] * ga[:, jj]

    for i in range(n_instr):
        op = prog.opcodes[i]
        a = prog.arg1[i]
        b = prog.arg2[i]

        if op == OP_CONST:
            rv[i] = np.full(m_pts, prog.consts[i])
            if order >= 1:
                rg[i] = np.zeros((m_pts, n))
            if order >= 2:
                rh[i] = np.zeros((m_pts, n_packed))
        elif op == OP_VAR:
            rv[i] = pts[:, a].copy()
            if order >= 1:
                g = np.zeros((m_pts, n))
                g[:, a] = 1.0
                rg[i] = g
            if order >= 2:
                rh[i] = np.zeros((m_pts, n_packed))
        elif op in (OP_ADD, OP_SUB):
            sign = 1.0 if op == OP_ADD else -1.0
            rv[i] = rv[a] + sign * rv[b]
            if order >= 1:
                rg[i] = rg[a] + sign * rg[b]
            if order >= 2:
                rh[i] = rh[a] + sign * rh[b]
        elif op == OP_MUL:
            u, v = rv[a], rv[b]
            rv[i] = u * v
            if order >= 1:
                rg[i] = v[:, None] * rg[a] + u[:, None] * rg[b]
            if order >= 2:
                rh[i] = (v[:, None] * rh[a] + u[:, None] * rh[b]
                         + outer(rg[a], rg[b]))
        elif op == OP_DIV:
            u, v = rv[a], rv[b]
            zero = v == 0.0
            if zero.any():
                _raise_domain("division by zero", prog, i, pts, zero)
            w = rv[i] = u / v
            if order >= 1:
                g = rg[i] = (rg[a] - w[:, None] * rg[b]) / v[:, None]
            if order >= 2:
                rh[i] = (rh[a] - w[:, None] * rh[b]
                         - outer(g, rg[b])) / v[:, None]
        elif op == OP_NEG:
            rv[i] = -rv[a]
            if order >= 1:
                rg[i] = -rg[a]
            if order >= 2:
                rh[i] = -rh[a]
        else:
            u = rv[a]
            if op == OP_POWI:
                k = int(b)
                if k >= 2:
                    base = _int_power(u, k - 2) if k > 2 else np.ones_like(u)
                    d2 = k * (k - 1) * base
                    d1 = k * base * u
                    val = base * u * u
                elif k == 1:  # copy opcode emitted for aliased roots
                    val, d1, d2 = u.copy(), np.ones_like(u), np.zeros_like(u)
                else:
                    zero = u == 0.0
                    if zero.any():
                        _raise_domain(
                            "zero raised to a negative power",
                            prog, i, pts, zero)
                    val = 1.0 / _int_power(u, -k)
                    d1 = k * val / u
                    d2 = k * (k - 1) * val / (u * u)
            elif op == OP_POWR:
                r = prog.consts[i]
                neg = u < 0.0
                if neg.any():
                    _raise_domain(
                        "negative base with real exponent",
                        prog, i, pts, neg)
                zero = (u == 0.0) & (r <= 0.0)
                if zero.any():
                    _raise_domain(
                        "zero raised to a non-positive real power",
                        prog, i, pts, zero)
                with np.errstate(divide="ignore"):
                    val = np.power(u, r)
                    d1 = r * np.power(u, r - 1.0)
                    d2 = r * (r - 1.0) * np.power(u, r - 2.0)
            elif op == OP_EXP:
                val = np.exp(u)
                d1 = d2 = val
            elif op == OP_LOG:
                bad = u <= 0.0
                if bad.any():
                    _raise_domain(
                        "log of a non-positive value", prog, i, pts, bad)
                val = np.log(u)
                d1 = 1.0 / u
                d2 = -d1 * d1
            elif op == OP_SQRT:
                bad = u < 0.0
                if bad.any():
                    _raise_domain(
                        "sqrt of a negative value", prog, i, pts, bad)
                val = np.sqrt(u)
                with np.errstate(divide="ignore"):
                    d1 = 0.5 / val
                    d2 = -0.5 * d1 / u
            elif op == OP_SIN:
                val = np.sin(u)
                d1 = np.cos(u)
                d2 = -val
            elif op == OP_COS:
                val = np.cos(u)
                d1 = -np.sin(u)
                d2 = -val
            elif op == OP_TANH:
                val = np.tanh(u)
                d1 = 1.0 - val * val
                d2 = -2.0 * val * d1
            elif op == OP_LOGISTIC:
                val = _logistic(u)
                d1 = val * (1.0 - val)
                d2 = d1 * (1.0 - 2.0 * val)
            elif op == OP_ERF:
                val = _erf(u)
                d1 = _TWO_OVER_SQRT_PI * np.exp(-u * u)
                d2 = -2.0 * u * d1
            elif op == OP_ATAN:
                val = np.arctan(u)
                d1 = 1.0 / (1.0 + u * u)
                d2 = -2.0 * u * d1 * d1
            else:  # pragma: no cover
                raise AssertionError(f"unhandled opcode {op}")
            rv[i] = val
            if order >= 1:
                rg[i] = d1[:, None] * rg[a]
            if order >= 2:
                rh[i] = d1[:, None] * rh[a] + d2[:, None] * outer_self(rg[a], ii, jj)

        # Release registers that are now dead (bounds peak memory by the
        # live width of the expression, not its size).
        for r in (a, b) if op in (OP_ADD, OP_SUB, OP_MUL, OP_DIV) else ((a,) if op not in (OP_CONST, OP_VAR) else ()):
            if prog.last_use[r] == i and r != i:
                rv[r] = None
                if order >= 1:
                    rg[r] = None
                if order >= 2:
                    rh[r] = None

    out_v = rv[n_instr - 1]
    out_g = rg[n_instr - 1] if order >= 1 else None
    out_h = rh[n_instr - 1] if order >= 2 else None
    return out_v, out_g, out_h


def outer_self(g, ii, jj):
    return g[:, ii] * g[:, jj]
