import math

import numpy as np
import pytest

from gaussconc import EstimatorConfig, FunctionModel, parse_expression
from gaussconc.errors import NonFiniteValueError
from gaussconc.gaussian import (
    RunningMoments,
    SamplerConfig,
    expect,
    gauss_hermite_rule,
    gauss_legendre_rule,
    iter_normal_chunks,
    raw_uniforms,
    sample_standard_normal,
    stein_residual,
    tensor_gauss_hermite,
)

CFG = EstimatorConfig()


# --- quadrature rules -------------------------------------------------------

def test_order_one_rule_is_midpoint():
    rule = gauss_hermite_rule(1)
    np.testing.assert_array_equal(rule.nodes, [0.0])
    np.testing.assert_array_equal(rule.weights, [1.0])


def test_order_two_rule():
    # roots of z^2 - 1 with equal weights
    rule = gauss_hermite_rule(2)
    np.testing.assert_allclose(rule.nodes, [-1.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(rule.weights, [0.5, 0.5], atol=1e-14)


def test_order_five_integrates_z4():
    rule = gauss_hermite_rule(5)
    assert rule.weights @ rule.nodes**4 == pytest.approx(3.0, abs=1e-12)


def _double_factorial(k):
    return float(np.prod(np.arange(k - 1, 0, -2, dtype=np.float64))) if k else 1.0


@pytest.mark.parametrize("order", [1, 2, 3, 5, 8, 13, 20, 32, 64])
def test_moment_exactness(order):
    # E[Z^k] = (k-1)!! for even k <= 2m-1, 0 for odd k (relative to the
    # natural scale sum w |z|^k for the odd cancellations)
    rule = gauss_hermite_rule(order)
    assert abs(rule.weights.sum() - 1.0) <= 1e-12
    for k in range(2 * order):
        moment = float(rule.weights @ rule.nodes**k)
        if k % 2 == 0:
            assert abs(moment - _double_factorial(k)) <= 1e-10 * _double_factorial(k)
        else:
            scale = float(rule.weights @ np.abs(rule.nodes) ** k)
            assert abs(moment) <= 1e-10 * max(scale, 1.0)


def test_order_out_of_range():
    for bad in (0, 65, -3):
        with pytest.raises(ValueError):
            gauss_hermite_rule(bad)


def test_gauss_legendre_interval():
    rule = gauss_legendre_rule(16)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    # integrates x^3 on [0,1]
    assert rule.weights @ rule.nodes**3 == pytest.approx(0.25, abs=1e-14)


def test_tensor_rule_normalization():
    pts, w = tensor_gauss_hermite(6, 3)
    assert pts.shape == (216, 3)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    # E[y1^2 * y2^0 * y3^2] = 1
    assert w @ (pts[:, 0] ** 2 * pts[:, 2] ** 2) == pytest.approx(1.0, rel=1e-12)


# --- sampling ---------------------------------------------------------------

def test_same_seed_same_stream():
    cfg = SamplerConfig(seed=7, sample_count=100)
    a = sample_standard_normal(cfg, 2)
    b = sample_standard_normal(cfg, 2)
    np.testing.assert_array_equal(a, b)


def test_streams_differ():
    cfg = SamplerConfig(seed=7, sample_count=100)
    a = sample_standard_normal(cfg, 1, "base")
    b = sample_standard_normal(cfg, 1, "copy1")
    c = sample_standard_normal(cfg, 1, "copy2")
    assert not np.array_equal(a, b)
    assert not np.array_equal(b, c)


def test_chunking_does_not_change_the_stream():
    cfg = SamplerConfig(seed=123, sample_count=1000, chunk_size=97)
    whole = sample_standard_normal(cfg, 3, "copy1")
    chunked = np.vstack(list(iter_normal_chunks(cfg, 3, "copy1")))
    np.testing.assert_array_equal(whole, chunked)
    # arbitrary split points too
    parts = [sample_standard_normal(cfg, 3, "copy1", 0, 11),
             sample_standard_normal(cfg, 3, "copy1", 11, 500),
             sample_standard_normal(cfg, 3, "copy1", 511, 489)]
    np.testing.assert_array_equal(whole, np.vstack(parts))


def test_uniforms_strictly_inside_unit_interval():
    u = raw_uniforms(0, "base", 0, 100_000)
    assert u.min() > 0.0
    assert u.max() < 1.0


def test_clt_bands_at_one_million():
    # three-sigma band for the mean is 3.9/sqrt(N) ~ 0.004; chi-square CI
    # for the variance is about +-0.006 at this sample size
    z = sample_standard_normal(SamplerConfig(seed=42, sample_count=1_000_000), 1)
    assert abs(float(z.mean())) < 0.004
    assert 0.994 < float(z.var(ddof=1)) < 1.006


# --- running moments --------------------------------------------------------

def test_running_moments_match_numpy():
    rng = np.random.default_rng(5)
    x = rng.normal(2.0, 3.0, size=10_000)
    acc = RunningMoments()
    for lo in range(0, len(x), 997):
        acc.update(x[lo:lo + 997])
    assert acc.mean == pytest.approx(float(x.mean()), rel=1e-12)
    assert acc.variance == pytest.approx(float(x.var(ddof=1)), rel=1e-10)
    d = x - x.mean()
    assert acc.m4 == pytest.approx(float((d**4).sum()), rel=1e-8)


def test_running_moments_merge_is_partition_invariant():
    x = np.random.default_rng(9).normal(size=5000)
    a = RunningMoments()
    a.update(x)
    b = RunningMoments()
    for lo in range(0, 5000, 617):
        b.update(x[lo:lo + 617])
    assert a.variance == pytest.approx(b.variance, rel=1e-12)


# --- expectations -----------------------------------------------------------

def test_expect_normalization():
    est = expect(lambda p: np.ones(len(p)), 1, CFG)
    assert est.value == pytest.approx(1.0, abs=1e-14)
    mc = expect(lambda p: np.ones(len(p)), 1, CFG,
                method="monte_carlo", count=10_000)
    assert mc.value == 1.0


def test_expect_second_moment():
    est = expect(lambda p: p[:, 0] ** 2, 1, CFG)
    assert est.value == pytest.approx(1.0, rel=1e-12)


def test_expect_softplus_against_frozen_oracle():
    # high-precision oracle for E[log(1+e^Z)] (three independent methods
    # agree): 0.8060591833474398
    model = FunctionModel(parse_expression("log(1+exp(y1))", 1))
    est = expect(model.values, 1, CFG)
    assert est.value == pytest.approx(0.8060591833474398, abs=1e-9)
    mc = expect(model.values, 1, CFG, method="monte_carlo")
    assert abs(mc.value - 0.8060591833474398) <= 4 * mc.uncertainty


def test_expect_reports_nonfinite_point():
    def bad(pts):
        out = np.ones(len(pts))
        out[pts[:, 0] > 1.0] = np.inf
        return out

    with pytest.raises(NonFiniteValueError):
        expect(bad, 1, CFG, method="monte_carlo", count=10_000)


def test_expect_auto_switches_to_monte_carlo_in_high_dimension():
    est = expect(lambda p: p[:, 0] ** 2, 4, CFG.with_(samples=50_000))
    assert est.method.startswith("monte_carlo")
    assert abs(est.value - 1.0) <= 4 * est.uncertainty


# --- Stein residual ---------------------------------------------------------

@pytest.mark.parametrize("text", ["y1", "y1^2", "exp(y1)"])
def test_stein_residual_quadrature_near_zero(text):
    # E[Z h(Z)] - E[h'(Z)]: identically zero for smooth h of moderate
    # growth (e.g. h=exp: both sides equal e^{1/2})
    m = FunctionModel(parse_expression(text, 1))
    est = stein_residual(m, CFG, method="quadrature")
    assert abs(est.value) < 1e-8


def test_stein_residual_monte_carlo_within_four_se():
    m = FunctionModel(parse_expression("tanh(y1)", 1))
    est = stein_residual(m, CFG.with_(samples=200_000), method="monte_carlo")
    assert abs(est.value) <= 4 * est.uncertainty
    assert est.uncertainty > 0


def test_stein_residual_needs_univariate_model():
    m = FunctionModel(parse_expression("y1 + y2", 2))
    with pytest.raises(ValueError):
        stein_residual(m, CFG)


@pytest.mark.parametrize("text", [
    "tanh(y1)", "sin(y1)*exp(-y1^2)", "log(1+exp(y1))", "atan(2*y1)",
    "logistic(y1)^2", "erf(y1)*y1",
])
def test_quadrature_and_monte_carlo_agree(text):
    m = FunctionModel(parse_expression(text, 1))
    quad = expect(m.values, 1, CFG, method="quadrature")
    mc = expect(m.values, 1, CFG, method="monte_carlo", count=200_000)
    combined = math.sqrt(mc.uncertainty**2) + quad.uncertainty
    assert abs(quad.value - mc.value) <= 4 * combined, (text, quad, mc)
