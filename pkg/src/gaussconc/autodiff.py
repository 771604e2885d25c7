"""Forward-mode differentiation of expression trees.

Values, gradients and Hessians come from a single forward sweep that
propagates second-order dual components (value, n first-order, n(n+1)/2
packed second-order coefficients) through the compiled program.  The
packed layout stores each unordered index pair once, so Hessian symmetry
holds exactly by construction.  A central finite-difference oracle is
provided for cross-checking; per the usual error analysis its gradient
error is O(h^2) while the forward sweep is exact up to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backends
from .expressions import ExpressionTree
from .program import compile_tree, unpack_hessian


class FunctionModel:
    """Evaluation + derivatives bundle for one expression tree."""

    def __init__(self, tree: ExpressionTree):
        self.tree = tree
        self.dimension = tree.dimension
        self.program = compile_tree(tree)

    # batch interface ----------------------------------------------------
    def values(self, pts: np.ndarray) -> np.ndarray:
        v, _, _ = backends.evaluate_program(self.program, pts, order=0)
        return v

    def grad_batch(self, pts: np.ndarray):
        v, g, _ = backends.evaluate_program(self.program, pts, order=1)
        return v, g

    def hess_batch(self, pts: np.ndarray):
        """Returns (values, gradients, packed Hessians)."""
        return backends.evaluate_program(self.program, pts, order=2)

    # single-point convenience --------------------------------------------
    def _point(self, point) -> np.ndarray:
        p = np.atleast_1d(np.asarray(point, dtype=np.float64))
        if p.shape != (self.dimension,):
            raise ValueError(
                f"point must have length {self.dimension}, got shape {p.shape}")
        return p.reshape(1, -1)

    def value(self, point) -> float:
        return float(self.values(self._point(point))[0])

    def gradient(self, point) -> np.ndarray:
        _, g = self.grad_batch(self._point(point))
        return g[0]

    def hessian(self, point) -> np.ndarray:
        _, _, h = self.hess_batch(self._point(point))
        return unpack_hessian(h, self.dimension)[0]


@dataclass(frozen=True)
class FiniteDifferenceReport:
    gradient_deviation: float       # max abs difference, autodiff vs central FD
    hessian_deviation: float        # max abs difference vs FD of autodiff gradients
    gradient_rel_deviation: float
    hessian_rel_deviation: float
    step: float
    flagged: bool                   # relative deviation above the 1e-4 gate


def finite_difference_check(model: FunctionModel, point,
                            step: float = 1e-5,
                            rel_tol: float = 1e-4) -> FiniteDifferenceReport:
    """Compare the forward-mode derivatives against central differences.

    The Hessian is checked against central differences of the autodiff
    gradient (not second differences of values), which keeps the oracle
    error at O(step^2) instead of amplifying rounding noise.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.atleast_1d(np.asarray(point, dtype=np.float64))
    n = model.dimension

    shifts = np.concatenate([np.eye(n) * step, -np.eye(n) * step])
    pts = x[None, :] + shifts  # (2n, n), +h rows then -h rows
    vals, grads = model.grad_batch(pts)

    fd_grad = (vals[:n] - vals[n:]) / (2.0 * step)
    fd_hess = (grads[:n] - grads[n:]) / (2.0 * step)  # row j = d grad / d x_j
    fd_hess = 0.5 * (fd_hess + fd_hess.T)

    grad = model.gradient(x)
    hess = model.hessian(x)

    gdev = float(np.max(np.abs(grad - fd_grad)))
    hdev = float(np.max(np.abs(hess - fd_hess)))
    gscale = 1.0 + float(np.max(np.abs(grad)))
    hscale = 1.0 + float(np.max(np.abs(hess)))
    grel = gdev / gscale
    hrel = hdev / hscale
    return FiniteDifferenceReport(
        gradient_deviation=gdev,
        hessian_deviation=hdev,
        gradient_rel_deviation=grel,
        hessian_rel_deviation=hrel,
        step=step,
        flagged=(grel > rel_tol or hrel > rel_tol),
    )
