"""Backend selection: compiled kernel when available, numpy otherwise.

Set GAUSSCONC_BACKEND=pure (or =compiled) to force a choice; the default
"auto" prefers the compiled extension.  Both backends execute the same
instruction stream and reductions happen outside the kernels, so results
agree to libm rounding.
"""
from __future__ import annotations

import os

import numpy as np

from ..errors import EvaluationDomainError
from ..program import Program
from . import numpy_exec

try:
    from . import _evalcore
except ImportError:  # extension not built
    _evalcore = None

_choice = os.environ.get("GAUSSCONC_BACKEND", "auto")
if _choice not in ("auto", "pure", "compiled"):
    raise ValueError(f"GAUSSCONC_BACKEND must be auto|pure|compiled, got {_choice!r}")
if _choice == "compiled" and _evalcore is None:
    raise ImportError(
        "GAUSSCONC_BACKEND=compiled but the _evalcore extension is not built; "
        "run 'python setup.py build_ext --inplace'")

_USE_COMPILED = _evalcore is not None and _choice != "pure"

_ERR_MESSAGES = {
    1: "division by zero",
    2: "zero raised to a negative power",
    3: "negative base with real exponent",
    4: "zero raised to a non-positive real power",
    5: "log of a non-positive value",
    6: "sqrt of a negative value",
}


def backend_name() -> str:
    return "compiled" if _USE_COMPILED else "pure"


def compiled_available() -> bool:
    return _evalcore is not None


def evaluate_program(prog: Program, pts: np.ndarray, order: int,
                     force: str | None = None):
    """Dispatch to the selected executor.

    ``force`` overrides the module-level choice for one call (used by the
    backend-agreement tests and the benchmark).
    """
    use_compiled = _USE_COMPILED if force is None else (force == "compiled")
    if not use_compiled:
        return numpy_exec.eval_program(prog, pts, order)

    pts = np.ascontiguousarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != prog.dimension:
        raise ValueError(
            f"points must have shape (m, {prog.dimension}), got {pts.shape}")
    vals, grads, hess, err, err_instr, err_point = _evalcore.eval_program_compiled(
        prog.opcodes, prog.arg1, prog.arg2, prog.consts,
        prog.dimension, pts, order)
    if err:
        raise EvaluationDomainError(
            _ERR_MESSAGES[err], prog.texts[err_instr], pts[err_point])
    return vals, grads, hess
