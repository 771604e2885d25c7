import numpy as np
import pytest

from gaussconc.expressions import (
    Binary,
    Const,
    ExpressionTree,
    Power,
    Unary,
    Var,
    _print,
)

BOUNDED_UNARIES = ("sin", "cos", "tanh", "logistic", "erf", "atan")

# The four-function family exercised throughout: all satisfy both
# tail-bound hypotheses (Lipschitz => exp-integrable; monotone coordinates
# with non-positive curvature => sign condition).
HYPOTHESIS_SUITE = {
    "linear1": ("y1", 1),
    "softplus1": ("y1 - log(1+exp(y1))", 1),
    "concave2": ("-log(1 + exp(-(0.8*y1 + 0.6*y2)))", 2),
    "sums3": ("(y1 - log(1+exp(y1))) - log(1+exp(-y2)) + 0.5*y3", 3),
}


def _node(rng: np.random.Generator, dim: int, depth: int):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.35:
            return Const(round(float(rng.uniform(-2, 2)), 3))
        return Var(int(rng.integers(dim)))
    pick = rng.random()
    child = lambda: _node(rng, dim, depth - 1)  # noqa: E731
    if pick < 0.34:
        return Binary(str(rng.choice(["+", "-", "*"])), child(), child())
    if pick < 0.42:  # division by something bounded away from zero
        den = Binary("+", Const(1.5), Unary("logistic", child()))
        return Binary("/", child(), den)
    if pick < 0.48:
        return Unary("exp", Binary("*", Const(0.3), child()))
    if pick < 0.53:
        return Unary("exp", Unary("tanh", child()))
    if pick < 0.60:  # log/sqrt of arguments in (0.5, 1.5)
        fn = "log" if pick < 0.565 else "sqrt"
        return Unary(fn, Binary("+", Const(0.5), Unary("logistic", child())))
    if pick < 0.66:
        return Power(child(), int(rng.integers(2, 4)), True)
    if pick < 0.70:  # real exponent on a positive base
        base = Binary("+", Const(0.5), Unary("logistic", child()))
        return Power(base, round(float(rng.uniform(0.5, 2.5)), 2), False)
    if pick < 0.74:
        return Unary("neg", child())
    return Unary(str(rng.choice(BOUNDED_UNARIES)), child())


def random_tree(rng: np.random.Generator, dim: int | None = None,
                depth: int = 3) -> ExpressionTree:
    """Random expression over the full primitive set, built so that every
    point of R^n is in-domain (protected log/sqrt/div/real-pow)."""
    if dim is None:
        dim = int(rng.integers(1, 4))
    root = _node(rng, dim, depth)
    return ExpressionTree(root=root, dimension=dim,
                          source_text=_print(root, 0))


@pytest.fixture(scope="session")
def suite_models():
    from gaussconc import FunctionModel, parse_expression

    return {name: FunctionModel(parse_expression(expr, dim))
            for name, (expr, dim) in HYPOTHESIS_SUITE.items()}
