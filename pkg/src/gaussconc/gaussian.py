"""Seedable Gaussian sampling and expectation machinery.

Sampling is counter-based: stream s, draw index j maps to Philox block
(s << 192) + j // 4, lane j % 4, and normals come from the inverse CDF of
one 64-bit uniform each.  Chunk boundaries therefore never change the
values produced, which makes the streams reproducible under any worker
partition, and the named streams occupy disjoint counter ranges so the
independent copies used inside nested expectations are independent by
construction, not by luck.

Expectations run either on tensor-grid Gauss-Hermite quadrature
(probabilists' weight, nodes from the Golub-Welsch symmetric tridiagonal
eigenproblem) or on chunked Monte Carlo with deterministic pairwise
reduction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy.linalg import eigh_tridiagonal
from scipy.special import ndtri

from .config import EstimatorConfig
from .errors import NonFiniteValueError

# Disjoint counter ranges per logical stream.  base/copy1/copy2 carry the
# sampled vector and its two independent copies; the rest are plumbing
# (pilot means, box probing, ascent starts).
STREAM_OFFSETS = {
    "base": 0,
    "copy1": 1,
    "copy2": 2,
    "pilot": 3,
    "probe": 4,
    "search": 5,
}


@dataclass(frozen=True)
class SamplerConfig:
    """Identical seed and sample_count give bit-identical streams
    regardless of how the draw range is chunked."""

    seed: int = 42
    sample_count: int = 1_000_000
    chunk_size: int = 262_144


def raw_uniforms(seed: int, stream: str, start: int, count: int) -> np.ndarray:
    """64-bit-resolution uniforms in the open interval (0, 1).

    ``start`` indexes into the stream's conceptual infinite draw sequence;
    any chunking of [start, start+count) reproduces the same values.
    """
    offset = STREAM_OFFSETS[stream]
    blocks, skip = divmod(start, 4)
    gen = Philox(key=seed, counter=(offset << 192) + blocks)
    words = gen.random_raw(skip + count)[skip:]
    # (w >> 11) has 53 bits; the half-step keeps us strictly inside (0,1)
    # so the normal inverse CDF stays finite.
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def sample_standard_normal(config: SamplerConfig, dimension: int,
                           stream: str = "base", start: int = 0,
                           count: int | None = None) -> np.ndarray:
    """i.i.d. N(0, I_dimension) samples, shape (count, dimension).

    Sample i consumes draws [i*dimension, (i+1)*dimension), so the
    samples themselves are also counter-addressed.
    """
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    if count is None:
        count = config.sample_count
    u = raw_uniforms(config.seed, stream, start * dimension, count * dimension)
    return ndtri(u).reshape(count, dimension)


def iter_normal_chunks(config: SamplerConfig, dimension: int,
                       stream: str = "base", count: int | None = None):
    """Yield the sample stream in chunks of config.chunk_size."""
    if count is None:
        count = config.sample_count
    done = 0
    while done < count:
        take = min(config.chunk_size, count - done)
        yield sample_standard_normal(config, dimension, stream, done, take)
        done += take


class RunningMoments:
    """Streaming central moments with deterministic chunk merging.

    Accumulates n, mean and the 2nd-4th central moment sums via the usual
    pairwise merge formulas; merging chunks in a fixed order gives
    bit-stable results independent of how the stream was partitioned into
    updates of the same sizes.
    """

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.m3 = 0.0
        self.m4 = 0.0

    def update(self, x: np.ndarray) -> None:
        nb = x.size
        if nb == 0:
            return
        mean_b = float(x.mean())
        d = x - mean_b
        d2 = d * d
        m2b = float(d2.sum())
        m3b = float((d2 * d).sum())
        m4b = float((d2 * d2).sum())

        na, ma = self.n, self.mean
        n = na + nb
        delta = mean_b - ma
        self.mean = ma + delta * nb / n
        self.m4 += (m4b
                    + delta**4 * na * nb * (na * na - na * nb + nb * nb) / n**3
                    + 6.0 * delta**2 * (na * na * m2b + nb * nb * self.m2) / n**2
                    + 4.0 * delta * (na * m3b - nb * self.m3) / n)
        self.m3 += (m3b
                    + delta**3 * na * nb * (na - nb) / n**2
                    + 3.0 * delta * (na * m2b - nb * self.m2) / n)
        self.m2 += m2b + delta**2 * na * nb / n
        self.n = n

    @property
    def variance(self) -> float:
        """Unbiased sample variance."""
        return self.m2 / (self.n - 1) if self.n > 1 else 0.0

    @property
    def se_mean(self) -> float:
        return float(np.sqrt(self.variance / self.n)) if self.n > 1 else 0.0

    @property
    def se_variance(self) -> float:
        """Standard error of the sample variance (uses the 4th moment)."""
        if self.n < 4:
            return float("inf")
        n = self.n
        m4 = self.m4 / n
        s2 = self.m2 / n
        v = m4 / n - s2 * s2 * (n - 3) / (n * (n - 1))
        return float(np.sqrt(max(v, 0.0)))


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    order: int


def gauss_hermite_rule(order: int) -> QuadratureRule:
    """Gauss-Hermite rule normalized for the N(0,1) density.

    Nodes start from the eigenvalues of the Jacobi matrix of the
    probabilists' Hermite recurrence (diagonal 0, off-diagonal sqrt(k),
    the Golub-Welsch construction) and are polished with a few Newton
    steps on the orthonormal polynomial; weights come from the
    Christoffel function, w_i = 1 / sum_{k<m} p_k(x_i)^2, which keeps the
    tiny extreme weights accurate where squared eigenvector components
    lose precision.  A rule of order m integrates polynomials of degree
    <= 2m-1 exactly: E[Z^k] = (k-1)!! for even k, 0 for odd k.
    """
    if not 1 <= order <= 64:
        raise ValueError(f"order must be in 1..64, got {order}")
    if order == 1:
        return QuadratureRule(np.zeros(1), np.ones(1), 1)
    m = order
    nodes = eigh_tridiagonal(np.zeros(m), np.sqrt(np.arange(1.0, m)),
                             eigvals_only=True)
    sq = np.sqrt(np.arange(1.0, m + 1))

    def recurrence(x, upto):
        # orthonormal probabilists' Hermite: sqrt(k+1) p_{k+1} = x p_k - sqrt(k) p_{k-1}
        p_prev = np.ones_like(x)
        p = x.copy()
        for k in range(1, upto):
            p_prev, p = p, (x * p - sq[k - 1] * p_prev) / sq[k]
        return p_prev, p  # (p_{upto-1}, p_{upto})

    for _ in range(3):
        p_lo, p_hi = recurrence(nodes, m)
        nodes = nodes - p_hi / (np.sqrt(m) * p_lo)  # p'_m = sqrt(m) p_{m-1}

    christoffel = np.ones_like(nodes)
    p_prev = np.ones_like(nodes)
    p = nodes.copy()
    christoffel += p * p
    for k in range(1, m - 1):
        p_prev, p = p, (nodes * p - sq[k - 1] * p_prev) / sq[k]
        christoffel += p * p
    weights = 1.0 / christoffel

    # The spectrum is symmetric about 0; enforce it exactly.
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    if m % 2 == 1:
        nodes[m // 2] = 0.0
    weights = weights / weights.sum()
    return QuadratureRule(nodes, weights, m)


def gauss_legendre_rule(order: int, a: float = 0.0, b: float = 1.0) -> QuadratureRule:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    return QuadratureRule(half * nodes + 0.5 * (b + a), half * weights, order)


def tensor_gauss_hermite(order: int, dimension: int):
    """Tensor-product rule over N(0, I_dimension): (points, weights)."""
    if order**dimension > 50_000_000:
        raise ValueError(
            f"tensor grid of order {order} in dimension {dimension} has "
            f"{order**dimension} points; use the monte_carlo method")
    rule = gauss_hermite_rule(order)
    if dimension == 1:
        return rule.nodes.reshape(-1, 1), rule.weights
    grids = np.meshgrid(*([rule.nodes] * dimension), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    w = rule.weights
    weights = w
    for _ in range(dimension - 1):
        weights = np.multiply.outer(weights, w)
    return pts, weights.ravel()


@dataclass(frozen=True)
class EstimateResult:
    """An expectation estimate with its uncertainty.

    kind is "se" for a Monte Carlo standard error and "delta" for the
    quadrature convergence gap between consecutive orders (plus a small
    floating-point floor so an exactly-converged value never reports a
    zero-width uncertainty).
    """

    value: float
    uncertainty: float
    kind: str
    method: str
    n_evals: int


def combined_uncertainty(*estimates: EstimateResult) -> float:
    """Statistical errors combine in quadrature, deterministic quadrature
    deltas add up (they are bounds, not fluctuations)."""
    se2 = sum(e.uncertainty**2 for e in estimates if e.kind == "se")
    delta = sum(e.uncertainty for e in estimates if e.kind == "delta")
    return float(np.sqrt(se2) + delta)


def _delta_floor(value: float) -> float:
    return 1e-12 * (1.0 + abs(value))


def resolve_method(config: EstimatorConfig, dimension: int,
                   method: str | None = None) -> str:
    m = method or config.method
    if m != "auto":
        return m
    if (dimension <= config.quad_dim_limit
            and config.quad_order ** dimension <= config.quad_cell_limit):
        return "quadrature"
    return "monte_carlo"


def _check_finite(vals: np.ndarray, pts: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(vals)
    if bad.any():
        idx = int(np.argmax(bad))
        raise NonFiniteValueError(f"non-finite {what} value", pts[idx])


def quadrature_expect(h, dimension: int, order: int) -> float:
    pts, w = tensor_gauss_hermite(order, dimension)
    vals = np.asarray(h(pts), dtype=np.float64)
    _check_finite(vals, pts, "integrand")
    return float(w @ vals)


def expect(h, dimension: int, config: EstimatorConfig,
           method: str | None = None, stream: str = "base",
           order: int | None = None, count: int | None = None) -> EstimateResult:
    """Estimate E[h(Y)] for Y ~ N(0, I_dimension).

    ``h`` maps an (m, dimension) batch to (m,) values.  The quadrature
    path reports the convergence delta between orders m and m-1; the
    Monte Carlo path reports a standard error.
    """
    resolved = resolve_method(config, dimension, method)
    if resolved == "quadrature":
        m = order or config.quad_order
        value = quadrature_expect(h, dimension, m)
        other = quadrature_expect(h, dimension, m - 1 if m > 1 else m + 1)
        delta = abs(value - other) + _delta_floor(value)
        return EstimateResult(value, delta, "delta",
                              f"quadrature(order={m})", m**dimension)

    sampler = SamplerConfig(config.seed, count or config.samples,
                            config.chunk_size)
    acc = RunningMoments()
    for chunk in iter_normal_chunks(sampler, dimension, stream):
        vals = np.asarray(h(chunk), dtype=np.float64)
        _check_finite(vals, chunk, "integrand")
        acc.update(vals)
    return EstimateResult(acc.mean, acc.se_mean, "se",
                          f"monte_carlo(n={acc.n})", acc.n)


def stein_residual(model, config: EstimatorConfig,
                   method: str | None = None,
                   stream: str = "base") -> EstimateResult:
    """E[Z h(Z)] - E[h'(Z)] for h given as a one-dimensional FunctionModel.

    Both terms are evaluated on the same points as the single integrand
    z*h(z) - h'(z), whose mean is zero whenever the Gaussian
    integration-by-parts identity holds for h, so the standard error of
    the result is directly the scale against which to judge the residual.
    """
    if model.dimension != 1:
        raise ValueError("stein_residual expects a function of one variable")

    def integrand(pts):
        vals, grads = model.grad_batch(pts)
        return pts[:, 0] * vals - grads[:, 0]

    return expect(integrand, 1, config, method=method, stream=stream)
