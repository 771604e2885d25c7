"""The interpolation kernel behind the variance-based tail bound.

For smooth f and Y ~ N(0, I_n) define

    T(y) = int_0^1 (2 sqrt(t))^-1 E[ <grad f(y), grad f(sqrt(t) y + sqrt(1-t) Y')> ] dt,

a Chatterjee-style smoothing of the squared gradient along the Gaussian
interpolation path.  Its two load-bearing identities, both checked here
against independently estimated sides, are

    E[ e^{lam f(Y)} (f(Y) - E f) ] = lam E[ e^{lam f(Y)} T(Y) ]      (tilted identity)
    E[ T(Y) ] = Var(f(Y))                                            (kernel mean)

The time integral is computed after the substitution t = u^2, which turns
(2 sqrt(t))^-1 dt into du and the sample point into u y + sqrt(1-u^2) Y'.
Because the inner expectation is even in Y', the integrand is a smooth
function of u on [0, 1] (odd boundary-layer terms average out), so fixed
Gauss-Legendre in u converges spectrally.  A deliberately naive t-grid
estimator on [clip, 1] is kept for cross-validation of that substitution.

Everything is estimated with either tensor quadrature or paired-draw
Monte Carlo over the disjoint counter streams, so the independent copies
demanded by the identities stay independent by construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import FunctionModel
from .config import EstimatorConfig
from .errors import EvalBudgetError, MgfOverflowError
from .gaussian import (
    EstimateResult,
    RunningMoments,
    SamplerConfig,
    combined_uncertainty,
    gauss_legendre_rule,
    iter_normal_chunks,
    sample_standard_normal,
    tensor_gauss_hermite,
)
from .program import unpack_hessian

_EXP_CEILING = 700.0


@dataclass(frozen=True)
class InterpolationEstimate:
    value: float
    uncertainty: float
    kind: str                 # "se" | "delta"
    method: str               # "quadrature" | "monte_carlo"
    mix_order: int            # Gauss-Legendre order of the time integral
    inner_method: str         # descriptor of the inner expectation

    def __post_init__(self):
        if not (np.isfinite(self.uncertainty) and self.uncertainty >= 0.0):
            raise ValueError("uncertainty must be finite and non-negative")


@dataclass(frozen=True)
class IdentityReport:
    label: str
    lhs: EstimateResult
    rhs: EstimateResult
    residual: float
    combined_uncertainty: float
    passed: bool


def _as_point(model: FunctionModel, y) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if y.shape != (model.dimension,):
        raise ValueError(
            f"point must have length {model.dimension}, got shape {y.shape}")
    return y


def _delta_floor(value: float) -> float:
    return 1e-12 * (1.0 + abs(value))


def _kernel_points(y_batch: np.ndarray, u: np.ndarray, z: np.ndarray) -> np.ndarray:
    """u_a * y_b + sqrt(1-u_a^2) * z_c for all combinations.

    y_batch (B, n), u (Nu,), z (K, n) -> (B, Nu, K, n).
    """
    mix = np.sqrt(1.0 - u * u)
    return (u[None, :, None, None] * y_batch[:, None, None, :]
            + mix[None, :, None, None] * z[None, None, :, :])


def _kernel_batch_quad(model: FunctionModel, y_batch: np.ndarray,
                       mix_order: int, inner_order: int) -> np.ndarray:
    """Kernel values at a batch of points, full tensor quadrature."""
    urule = gauss_legendre_rule(mix_order)
    z, wz = tensor_gauss_hermite(inner_order, model.dimension)
    pts = _kernel_points(y_batch, urule.nodes, z)
    b, nu, k, n = pts.shape
    _, grads = model.grad_batch(pts.reshape(-1, n))
    _, g0 = model.grad_batch(y_batch)
    inner = np.einsum("bukn,bn->buk", grads.reshape(b, nu, k, n), g0)
    return np.einsum("u,buk,k->b", urule.weights, inner, wz)


def _kernel_batch_paired(model: FunctionModel, y_batch: np.ndarray,
                         z_batch: np.ndarray, mix_order: int) -> np.ndarray:
    """Single-copy kernel estimates: the inner expectation over Y' is
    replaced by one paired draw per outer point (unbiased; the pairing
    noise lands in the cross-sample standard error)."""
    urule = gauss_legendre_rule(mix_order)
    mix = np.sqrt(1.0 - urule.nodes**2)
    b, n = y_batch.shape
    pts = (urule.nodes[None, :, None] * y_batch[:, None, :]
           + mix[None, :, None] * z_batch[:, None, :])
    _, grads = model.grad_batch(pts.reshape(-1, n))
    _, g0 = model.grad_batch(y_batch)
    inner = np.einsum("bun,bn->bu", grads.reshape(b, urule.order, n), g0)
    return inner @ urule.weights


def _auto_point_method(model: FunctionModel, config: EstimatorConfig,
                       method: str | None, nested: bool = False) -> str:
    m = method or config.method
    if m != "auto":
        return m
    n = model.dimension
    if n > config.quad_dim_limit:
        return "monte_carlo"
    cells = config.mix_order * config.quad_order**n
    if nested:
        cells *= config.quad_order**n * config.mix_order
    return "quadrature" if cells <= config.quad_cell_limit else "monte_carlo"


def stein_kernel(model: FunctionModel, y, config: EstimatorConfig,
                 method: str | None = None) -> InterpolationEstimate:
    """Estimate the interpolation kernel at one point.

    Quadrature path: Gauss-Legendre in the interpolation time crossed
    with a tensor Gauss-Hermite inner expectation; uncertainty is the
    convergence delta against one order lower.  Monte Carlo path: paired
    draws from the "copy1" stream with a cross-draw standard error.

    For linear f the gradient is constant, the integrand is constant in
    u, and the value equals |grad f|^2 independently of y.
    """
    y = _as_point(model, y)
    resolved = _auto_point_method(model, config, method)
    if resolved == "quadrature":
        hi = float(_kernel_batch_quad(model, y[None, :], config.mix_order,
                                      config.quad_order)[0])
        lo = float(_kernel_batch_quad(model, y[None, :], config.mix_order - 1,
                                      max(config.quad_order - 1, 1))[0])
        return InterpolationEstimate(
            hi, abs(hi - lo) + _delta_floor(hi), "delta", "quadrature",
            config.mix_order, f"quadrature(order={config.quad_order})")

    sampler = SamplerConfig(config.seed, config.point_samples, config.chunk_size)
    z = sample_standard_normal(sampler, model.dimension, "copy1")
    per_draw = _kernel_batch_paired(
        model, np.broadcast_to(y, z.shape).copy(), z, config.mix_order)
    value = float(per_draw.mean())
    se = float(per_draw.std(ddof=1) / np.sqrt(len(per_draw)))
    return InterpolationEstimate(
        value, se, "se", "monte_carlo", config.mix_order,
        f"paired_draws(n={len(per_draw)})")


def stein_kernel_tgrid(model: FunctionModel, y, config: EstimatorConfig,
                       clip: float, order: int) -> float:
    """Naive estimator of the kernel on the original singular time scale.

    Integrates (2 sqrt(t))^-1 E[...] with Gauss-Legendre on [clip, 1],
    i.e. without the substitution that removes the endpoint singularity.
    Used only to cross-validate the substitution-based estimator: as
    clip -> 0 with growing order the two must converge to each other.
    """
    if not 0.0 < clip < 1.0:
        raise ValueError("clip must be in (0, 1)")
    y = _as_point(model, y)
    trule = gauss_legendre_rule(order, clip, 1.0)
    z, wz = tensor_gauss_hermite(config.quad_order, model.dimension)
    t = trule.nodes
    pts = (np.sqrt(t)[:, None, None] * y[None, None, :]
           + np.sqrt(1.0 - t)[:, None, None] * z[None, :, :])
    _, grads = model.grad_batch(pts.reshape(-1, model.dimension))
    g0 = model.gradient(y)
    inner = grads.reshape(len(t), len(z), -1) @ g0
    return float(np.einsum("t,tk,k->", trule.weights / (2.0 * np.sqrt(t)),
                           inner, wz))


def _kernel_grad_terms(model, g0, w_pts, p_pts):
    """Inner integrand of the kernel's gradient contracted with g0.

    w_pts (..., n) are interpolation points W; p_pts (..., Nu, K, n) the
    second-level points; returns arrays a, b with
    a = g0^T H(W) grad f(P) and b = <H(P) grad f(W), g0> (the latter is
    weighted by u, the square root of the interpolation time).
    """
    n = model.dimension
    w_flat = w_pts.reshape(-1, n)
    _, gw, hw = model.hess_batch(w_flat)
    hw_full = unpack_hessian(hw, n)
    _, gp, hp = model.hess_batch(p_pts.reshape(-1, n))
    lead = p_pts.shape[:-1]
    gp = gp.reshape(*lead, n)
    hp_full = unpack_hessian(hp, n).reshape(*lead, n, n)

    w_lead = w_pts.shape[:-1]
    gw = gw.reshape(*w_lead, n)
    hw_full = hw_full.reshape(*w_lead, n, n)

    # a[..., u, k] = g0^T H(W[...]) grad f(P[..., u, k])
    h_g0 = hw_full @ g0                       # (..., n)
    a = np.einsum("...ukn,...n->...uk", gp, h_g0)
    # b[..., u, k] = (H(P) grad f(W)) . g0
    t = np.einsum("...ukij,...j->...uki", hp_full, gw)
    b = t @ g0
    return a, b


def kernel_gradient(model: FunctionModel, y, config: EstimatorConfig,
                    method: str | None = None):
    """All partial derivatives of the kernel at one point (vector, plus a
    matching uncertainty vector and method metadata)."""
    y = _as_point(model, y)
    n = model.dimension
    resolved = _auto_point_method(model, config, method)

    def quad_vector(mix_order, inner_order):
        ur = gauss_legendre_rule(mix_order)
        z, wz = tensor_gauss_hermite(inner_order, n)
        pts = _kernel_points(y[None, :], ur.nodes, z)[0]  # (Nu, K, n)
        _, grads = model.grad_batch(pts.reshape(-1, n))
        _, _, hp = model.hess_batch(pts.reshape(-1, n))
        grads = grads.reshape(ur.order, len(z), n)
        hfull = unpack_hessian(hp, n).reshape(ur.order, len(z), n, n)
        h0 = model.hessian(y)
        g0 = model.gradient(y)
        # d_j T = int du E[ (H(y) grad f(P))_j + u (H(P) grad f(y))_j ]
        term_a = np.einsum("jk,ulk->ulj", h0, grads)
        term_b = np.einsum("ulji,i->ulj", hfull, g0)
        integrand = term_a + ur.nodes[:, None, None] * term_b
        return np.einsum("u,ulj,l->j", ur.weights, integrand, wz)

    if resolved == "quadrature":
        hi = quad_vector(config.mix_order, config.quad_order)
        lo = quad_vector(config.mix_order - 1, max(config.quad_order - 1, 1))
        unc = np.abs(hi - lo) + 1e-12 * (1.0 + np.abs(hi))
        return hi, unc, "delta", "quadrature"

    sampler = SamplerConfig(config.seed, config.point_samples, config.chunk_size)
    z = sample_standard_normal(sampler, n, "copy1")
    urule = gauss_legendre_rule(config.mix_order)
    mix = np.sqrt(1.0 - urule.nodes**2)
    pts = (urule.nodes[None, :, None] * y[None, None, :]
           + mix[None, :, None] * z[:, None, :])      # (M, Nu, n)
    _, grads = model.grad_batch(pts.reshape(-1, n))
    _, _, hp = model.hess_batch(pts.reshape(-1, n))
    m_draw = len(z)
    grads = grads.reshape(m_draw, urule.order, n)
    hfull = unpack_hessian(hp, n).reshape(m_draw, urule.order, n, n)
    h0 = model.hessian(y)
    g0 = model.gradient(y)
    term_a = np.einsum("jk,muk->muj", h0, grads)
    term_b = np.einsum("muji,i->muj", hfull, g0)
    per_draw = np.einsum("u,muj->mj",
                         urule.weights,
                         term_a + urule.nodes[None, :, None] * term_b)
    value = per_draw.mean(axis=0)
    se = per_draw.std(axis=0, ddof=1) / np.sqrt(m_draw)
    return value, se, "se", "monte_carlo"


def stein_kernel_partial(model: FunctionModel, y, j: int,
                         config: EstimatorConfig,
                         method: str | None = None) -> InterpolationEstimate:
    """One partial derivative of the kernel (all components share one
    sweep; see kernel_gradient)."""
    if not 0 <= j < model.dimension:
        raise ValueError(f"index j={j} out of range for dimension {model.dimension}")
    vec, unc, kind, resolved = kernel_gradient(model, y, config, method)
    inner = (f"quadrature(order={config.quad_order})" if resolved == "quadrature"
             else f"paired_draws(n={config.point_samples})")
    return InterpolationEstimate(float(vec[j]), float(unc[j]), kind, resolved,
                                 config.mix_order, inner)


def iterated_kernel(model: FunctionModel, y, config: EstimatorConfig,
                    method: str | None = None) -> InterpolationEstimate:
    """Second-level kernel: the interpolation construction applied to the
    kernel's own gradient,

        int_0^1 (2 sqrt(s))^-1 E[ <grad f(y), grad T(sqrt(s) y + sqrt(1-s) Y'')> ] ds.

    Under the sign condition on the derivatives this quantity is <= 0 at
    every point, which is exactly what drives the variance-based bound.
    Y'' draws come from the "copy2" stream and the inner Y' draws from
    "copy1", so the two copies are independent of each other and of the
    evaluation point.
    """
    y = _as_point(model, y)
    n = model.dimension
    resolved = _auto_point_method(model, config, method, nested=True)
    g0 = model.gradient(y)

    if resolved == "quadrature":
        cells = config.quad_order ** n
        needed = config.mix_order * cells * (1 + config.mix_order * cells)
        if needed > config.eval_budget:
            raise EvalBudgetError(needed, config.eval_budget)

        def nested_quad(mix_order, inner_order):
            vrule = gauss_legendre_rule(mix_order)
            z2, w2 = tensor_gauss_hermite(inner_order, n)
            total = 0.0
            for v_idx in range(vrule.order):  # chunk by outer time node
                v = vrule.nodes[v_idx]
                w_pts = v * y[None, :] + np.sqrt(1.0 - v * v) * z2  # (K2, n)
                urule = gauss_legendre_rule(mix_order)
                z1, w1 = tensor_gauss_hermite(inner_order, n)
                p_pts = _kernel_points(w_pts, urule.nodes, z1)  # (K2, Nu, K1, n)
                a, b = _kernel_grad_terms(model, g0, w_pts, p_pts)
                integrand = a + urule.nodes[None, :, None] * b
                inner_vals = np.einsum("u,kul,l->k", urule.weights, integrand, w1)
                total += vrule.weights[v_idx] * float(w2 @ inner_vals)
            return total

        hi = nested_quad(config.mix_order, config.quad_order)
        lo = nested_quad(config.mix_order - 1, max(config.quad_order - 1, 1))
        return InterpolationEstimate(
            hi, abs(hi - lo) + _delta_floor(hi), "delta", "quadrature",
            config.mix_order, f"quadrature(order={config.quad_order})")

    m_draw = config.point_samples
    needed = m_draw * config.mix_order * (1 + config.mix_order)
    if needed > config.eval_budget:
        raise EvalBudgetError(needed, config.eval_budget)
    sampler = SamplerConfig(config.seed, m_draw, config.chunk_size)
    z2 = sample_standard_normal(sampler, n, "copy2")
    z1 = sample_standard_normal(sampler, n, "copy1")
    vrule = gauss_legendre_rule(config.mix_order)
    urule = vrule
    mix_v = np.sqrt(1.0 - vrule.nodes**2)
    w_pts = (vrule.nodes[None, :, None] * y[None, None, :]
             + mix_v[None, :, None] * z2[:, None, :])       # (M, Nv, n)
    mix_u = np.sqrt(1.0 - urule.nodes**2)
    p_pts = (urule.nodes[None, None, :, None] * w_pts[:, :, None, :]
             + mix_u[None, None, :, None] * z1[:, None, None, :])  # (M, Nv, Nu, n)
    # reuse the contracted-terms helper by treating (M, Nv) as the lead
    # axes and a singleton inner-draw axis
    a, b = _kernel_grad_terms(model, g0, w_pts, p_pts[..., None, :])
    a = a[..., 0]
    b = b[..., 0]
    integrand = a + urule.nodes[None, None, :] * b           # (M, Nv, Nu)
    per_draw = np.einsum("v,mvu,u->m", vrule.weights, integrand, urule.weights)
    value = float(per_draw.mean())
    se = float(per_draw.std(ddof=1) / np.sqrt(m_draw))
    return InterpolationEstimate(
        value, se, "se", "monte_carlo", config.mix_order,
        f"paired_draws(n={m_draw})")


def _tilt_or_raise(lam: float, fvals: np.ndarray, pts: np.ndarray) -> np.ndarray:
    arg = lam * fvals
    if arg.size and float(arg.max()) > _EXP_CEILING:
        idx = int(np.argmax(arg))
        raise MgfOverflowError(lam, float(fvals[idx]))
    return np.exp(arg)


def verify_tilted_identity(model: FunctionModel, lam: float,
                           config: EstimatorConfig,
                           method: str | None = None) -> IdentityReport:
    """Check E[e^{lam f} (f - E f)] = lam E[e^{lam f} T(Y)].

    The two sides are estimated from independent randomness: the left
    side on the "base" stream (or outer quadrature), the right side on
    "copy2" x "copy1".  Correlating them would understate the residual's
    variance and make the 4-sigma gate meaningless.

    Caller is responsible for gating on exponential integrability of f;
    lam must be >= 0.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    n = model.dimension
    resolved = method or ("quadrature" if n <= config.quad_dim_limit
                          else "monte_carlo")

    # mean of f: quadrature when available, else an independent pilot stream
    if n <= config.quad_dim_limit:
        z0, w0 = tensor_gauss_hermite(config.quad_order, n)
        mu = float(w0 @ model.values(z0))
    else:
        sampler = SamplerConfig(config.seed, config.nested_samples,
                                config.chunk_size)
        acc = RunningMoments()
        for chunk in iter_normal_chunks(sampler, n, "pilot"):
            acc.update(model.values(chunk))
        mu = acc.mean

    # ---- left side
    if resolved == "quadrature":
        def lhs_at(order):
            z, w = tensor_gauss_hermite(order, n)
            fv = model.values(z)
            return float(w @ (_tilt_or_raise(lam, fv, z) * (fv - mu)))

        lhs_val = lhs_at(config.quad_order)
        lhs_lo = lhs_at(config.quad_order - 1)
        lhs = EstimateResult(lhs_val, abs(lhs_val - lhs_lo) + _delta_floor(lhs_val),
                             "delta", f"quadrature(order={config.quad_order})",
                             config.quad_order**n)
    else:
        sampler = SamplerConfig(config.seed, config.samples, config.chunk_size)
        acc = RunningMoments()
        for chunk in iter_normal_chunks(sampler, n, "base"):
            fv = model.values(chunk)
            acc.update(_tilt_or_raise(lam, fv, chunk) * (fv - mu))
        lhs = EstimateResult(acc.mean, acc.se_mean, "se",
                             f"monte_carlo(n={acc.n})", acc.n)

    # ---- right side: lam * E[e^{lam f} T]
    quad_rhs_cells = (config.quad_order**n) * config.mix_order * (config.quad_order**n)
    if resolved == "quadrature" and quad_rhs_cells <= config.quad_cell_limit:
        def rhs_at(order, mix_order):
            z, w = tensor_gauss_hermite(order, n)
            fv = model.values(z)
            tilt = _tilt_or_raise(lam, fv, z)
            t_vals = np.empty(len(z))
            step = max(1, config.quad_cell_limit // max(
                1, mix_order * order**n))
            for lo_i in range(0, len(z), step):
                batch = z[lo_i:lo_i + step]
                t_vals[lo_i:lo_i + step] = _kernel_batch_quad(
                    model, batch, mix_order, order)
            return lam * float(w @ (tilt * t_vals))

        rhs_val = rhs_at(config.quad_order, config.mix_order)
        rhs_lo = rhs_at(max(config.quad_order - 1, 1), config.mix_order - 1)
        rhs = EstimateResult(rhs_val, abs(rhs_val - rhs_lo) + _delta_floor(rhs_val),
                             "delta",
                             f"quadrature(order={config.quad_order})"
                             f"*kernel(mix={config.mix_order})",
                             config.quad_order**n * config.mix_order)
    else:
        m_draw = config.nested_samples
        sampler = SamplerConfig(config.seed, m_draw, config.chunk_size)
        acc = RunningMoments()
        done = 0
        for outer in iter_normal_chunks(sampler, n, "copy2"):
            z1 = sample_standard_normal(sampler, n, "copy1", done, len(outer))
            done += len(outer)
            fv = model.values(outer)
            tilt = _tilt_or_raise(lam, fv, outer)
            t_hat = _kernel_batch_paired(model, outer, z1, config.mix_order)
            acc.update(tilt * t_hat)
        rhs = EstimateResult(lam * acc.mean, lam * acc.se_mean, "se",
                             f"paired_mc(n={acc.n})", acc.n)

    residual = lhs.value - rhs.value
    combined = combined_uncertainty(lhs, rhs)
    return IdentityReport(
        label=f"tilted-identity(lam={lam:g})",
        lhs=lhs, rhs=rhs, residual=residual,
        combined_uncertainty=combined,
        passed=bool(abs(residual) <= 4.0 * combined),
    )


def verify_kernel_mean_is_variance(model: FunctionModel,
                                   config: EstimatorConfig,
                                   method: str | None = None) -> IdentityReport:
    """Check E[T(Y)] = Var(f(Y)) with independently estimated sides.

    E[T] averages the kernel over the outer Gaussian (quadrature in low
    dimension, paired draws otherwise); the variance side uses exact
    quadrature of E[f^2] - (E f)^2 when available and the unbiased sample
    variance on an independent stream otherwise.
    """
    n = model.dimension
    resolved = method or ("quadrature" if n <= 2 else "monte_carlo")

    if resolved == "quadrature":
        def et_at(order, mix_order):
            z, w = tensor_gauss_hermite(order, n)
            t_vals = np.empty(len(z))
            step = max(1, config.quad_cell_limit // max(
                1, mix_order * order**n))
            for lo_i in range(0, len(z), step):
                batch = z[lo_i:lo_i + step]
                t_vals[lo_i:lo_i + step] = _kernel_batch_quad(
                    model, batch, mix_order, order)
            return float(w @ t_vals)

        et_val = et_at(config.quad_order, config.mix_order)
        et_lo = et_at(max(config.quad_order - 1, 1), config.mix_order - 1)
        lhs = EstimateResult(et_val, abs(et_val - et_lo) + _delta_floor(et_val),
                             "delta",
                             f"quadrature(order={config.quad_order})"
                             f"*kernel(mix={config.mix_order})",
                             config.quad_order**n)
    else:
        m_draw = config.nested_samples
        sampler = SamplerConfig(config.seed, m_draw, config.chunk_size)
        acc = RunningMoments()
        done = 0
        for outer in iter_normal_chunks(sampler, n, "base"):
            z1 = sample_standard_normal(sampler, n, "copy1", done, len(outer))
            done += len(outer)
            acc.update(_kernel_batch_paired(model, outer, z1, config.mix_order))
        lhs = EstimateResult(acc.mean, acc.se_mean, "se",
                             f"paired_mc(n={acc.n})", acc.n)

    if n <= config.quad_dim_limit:
        def var_at(order):
            z, w = tensor_gauss_hermite(order, n)
            fv = model.values(z)
            m1 = float(w @ fv)
            return float(w @ (fv * fv)) - m1 * m1

        var_val = var_at(config.quad_order)
        var_lo = var_at(config.quad_order - 1)
        rhs = EstimateResult(var_val, abs(var_val - var_lo) + _delta_floor(var_val),
                             "delta", f"quadrature(order={config.quad_order})",
                             config.quad_order**n)
    else:
        sampler = SamplerConfig(config.seed, config.samples, config.chunk_size)
        acc = RunningMoments()
        for chunk in iter_normal_chunks(sampler, n, "copy2"):
            acc.update(model.values(chunk))
        rhs = EstimateResult(acc.variance, acc.se_variance, "se",
                             f"sample_variance(n={acc.n})", acc.n)

    residual = lhs.value - rhs.value
    combined = combined_uncertainty(lhs, rhs)
    return IdentityReport(
        label="kernel-mean-equals-variance",
        lhs=lhs, rhs=rhs, residual=residual,
        combined_uncertainty=combined,
        passed=bool(abs(residual) <= 4.0 * combined),
    )
