"""Flat instruction encoding of an expression tree.

Both evaluation backends (the Cython kernel and the vectorized numpy
executor) run the same single-assignment program: instruction i writes
register i, arguments are register indices.  Keeping the instruction
stream identical across backends means they differ only in the floating
point behaviour of the underlying libm calls.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expressions import Binary, Const, ExpressionTree, Node, Power, Unary, Var
from .expressions import _print  # noqa: F401  (diagnostic text for sub-nodes)

(
    OP_CONST,
    OP_VAR,
    OP_ADD,
    OP_SUB,
    OP_MUL,
    OP_DIV,
    OP_NEG,
    OP_POWI,
    OP_POWR,
    OP_EXP,
    OP_LOG,
    OP_SQRT,
    OP_SIN,
    OP_COS,
    OP_TANH,
    OP_LOGISTIC,
    OP_ERF,
    OP_ATAN,
) = range(18)

_UNARY_OPS = {
    "exp": OP_EXP,
    "log": OP_LOG,
    "sqrt": OP_SQRT,
    "sin": OP_SIN,
    "cos": OP_COS,
    "tanh": OP_TANH,
    "logistic": OP_LOGISTIC,
    "erf": OP_ERF,
    "atan": OP_ATAN,
}

_BINARY_OPS = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}


@dataclass(frozen=True)
class Program:
    opcodes: np.ndarray  # int32 (m,)
    arg1: np.ndarray     # int32 (m,): register index, or variable index for OP_VAR
    arg2: np.ndarray     # int32 (m,): register index, or integer exponent for OP_POWI
    consts: np.ndarray   # float64 (m,): literal for OP_CONST, exponent for OP_POWR
    last_use: np.ndarray  # int32 (m,): last instruction reading register i
    dimension: int
    texts: tuple[str, ...]  # printable sub-expression per instruction

    @property
    def n_instructions(self) -> int:
        return len(self.opcodes)


def compile_tree(tree: ExpressionTree) -> Program:
    opcodes: list[int] = []
    arg1: list[int] = []
    arg2: list[int] = []
    consts: list[float] = []
    texts: list[str] = []

    def emit(op, a=0, b=0, c=0.0, text="", node=None) -> int:
        opcodes.append(op)
        arg1.append(a)
        arg2.append(b)
        consts.append(c)
        texts.append(text if node is None else _print(node, 0))
        return len(opcodes) - 1

    def walk(node: Node) -> int:
        if isinstance(node, Const):
            return emit(OP_CONST, c=node.value, node=node)
        if isinstance(node, Var):
            return emit(OP_VAR, a=node.index, node=node)
        if isinstance(node, Binary):
            a = walk(node.left)
            b = walk(node.right)
            return emit(_BINARY_OPS[node.op], a=a, b=b, node=node)
        if isinstance(node, Power):
            a = walk(node.base)
            if node.is_integer:
                k = int(node.exponent)
                if k == 0:
                    return emit(OP_CONST, c=1.0, node=node)
                if k == 1:
                    return a
                return emit(OP_POWI, a=a, b=k, node=node)
            return emit(OP_POWR, a=a, c=float(node.exponent), node=node)
        assert isinstance(node, Unary)
        a = walk(node.arg)
        if node.fn == "neg":
            return emit(OP_NEG, a=a, node=node)
        return emit(_UNARY_OPS[node.fn], a=a, node=node)

    root_reg = walk(tree.root)
    # The printer-facing register of the whole tree must be the final
    # instruction; k==1 powers alias their base, so force a copy if needed.
    if root_reg != len(opcodes) - 1:
        emit(OP_POWI, a=root_reg, b=1, node=tree.root)

    ops = np.asarray(opcodes, dtype=np.int32)
    a1 = np.asarray(arg1, dtype=np.int32)
    a2 = np.asarray(arg2, dtype=np.int32)

    last_use = np.arange(len(ops), dtype=np.int32)
    reads_reg2 = np.isin(ops, (OP_ADD, OP_SUB, OP_MUL, OP_DIV))
    for i in range(len(ops)):
        if ops[i] not in (OP_CONST, OP_VAR):
            last_use[a1[i]] = i
        if reads_reg2[i]:
            last_use[a2[i]] = i

    return Program(
        opcodes=ops,
        arg1=a1,
        arg2=a2,
        consts=np.asarray(consts, dtype=np.float64),
        last_use=last_use,
        dimension=tree.dimension,
        texts=tuple(texts),
    )


def packed_hessian_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the packed upper-triangular Hessian layout."""
    ii, jj = np.triu_indices(n)
    return ii.astype(np.intp), jj.astype(np.intp)


def unpack_hessian(packed: np.ndarray, n: int) -> np.ndarray:
    """(M, n(n+1)/2) packed -> (M, n, n) symmetric matrices."""
    packed = np.atleast_2d(packed)
    out = np.empty((packed.shape[0], n, n), dtype=np.float64)
    ii, jj = packed_hessian_indices(n)
    out[:, ii, jj] = packed
    out[:, jj, ii] = packed
    return out
