import math

import numpy as np
import pytest
from scipy.stats import binom

from gaussconc import EstimatorConfig, FunctionModel, parse_expression
from gaussconc.bounds import (
    builtin_sigma_example,
    clopper_pearson,
    estimate_lipschitz,
    estimate_mean_variance,
    estimate_mgf_curve,
    sigma_example,
    tail_report,
)
from gaussconc.conditions import check_conditions
from gaussconc.errors import (
    AntiderivativeMismatchError,
    MgfOverflowError,
    SigmaInvariantError,
)
from gaussconc.bounds import SigmaExampleSpec

CFG = EstimatorConfig()

# frozen oracle values for the built-in example (high-precision quadrature
# cross-checked against adaptive integration and stratified sampling)
ORACLE_MEAN = -0.1129120027874945
ORACLE_VAR = 0.2715145018005587


def model(text, dim=1):
    return FunctionModel(parse_expression(text, dim))


# --- Lipschitz constant -------------------------------------------------------

def test_lipschitz_linear_exact():
    est = estimate_lipschitz(model("2*y1 - 1.5*y2", 2), CFG)
    assert est.value == pytest.approx(2.5, rel=1e-12)
    assert "lower-bound" in est.method


def test_lipschitz_softplus_is_one():
    # sup |f'| = sup logistic(-y) = 1, approached as y -> -inf
    est = estimate_lipschitz(model("y1 - log(1+exp(y1))"), CFG)
    assert est.value == pytest.approx(1.0, abs=1e-3)
    assert est.value <= 1.0 + 1e-12


def test_lipschitz_sine():
    est = estimate_lipschitz(model("sin(y1)"), CFG)
    assert est.value == pytest.approx(1.0, abs=1e-6)
    assert est.value <= 1.0 + 1e-12


# --- mean and variance ---------------------------------------------------------

def test_mean_variance_linear():
    mv = estimate_mean_variance(model("y1 + 2*y2", 2), CFG)
    assert mv.mean == pytest.approx(0.0, abs=1e-12)
    assert mv.variance == pytest.approx(5.0, rel=1e-12)


def test_mean_variance_square():
    mv = estimate_mean_variance(model("y1^2"), CFG)
    assert mv.mean == pytest.approx(1.0, rel=1e-12)
    assert mv.variance == pytest.approx(2.0, rel=1e-12)


def test_mean_variance_builtin_example():
    mv = estimate_mean_variance(FunctionModel(builtin_sigma_example().f_tree), CFG)
    assert mv.mean == pytest.approx(ORACLE_MEAN, abs=1e-8)
    assert mv.variance == pytest.approx(ORACLE_VAR, abs=1e-8)
    assert 0.0 < mv.variance <= 1.0 - mv.mean**2


def test_mean_variance_monte_carlo_agrees():
    mv = estimate_mean_variance(model("y1^2"), CFG.with_(samples=300_000),
                                method="monte_carlo")
    assert abs(mv.mean - 1.0) <= 4 * mv.mean_uncertainty
    assert abs(mv.variance - 2.0) <= 4 * mv.variance_uncertainty


# --- MGF curve -------------------------------------------------------------------

def test_mgf_at_zero_is_exactly_one():
    pts = estimate_mgf_curve(model("y1"), [0.0], CFG)
    assert pts[0].estimate == 1.0
    assert pts[0].standard_error == 0.0


def test_mgf_linear_equals_gaussian_bound():
    m = model("y1")
    mv = estimate_mean_variance(m, CFG)
    pts = estimate_mgf_curve(m, [0.0, 0.5, 1.0, 1.5, 2.0], CFG, mv)
    for p in pts:
        assert p.estimate == pytest.approx(p.gaussian_bound, rel=0.01)
        assert p.dominated


def test_mgf_softplus_dominated():
    m = FunctionModel(builtin_sigma_example().f_tree)
    pts = estimate_mgf_curve(m, [1.0], CFG)
    assert pts[0].dominated
    assert not pts[0].heavy_tail


def test_mgf_overflow_pre_scan():
    with pytest.raises(MgfOverflowError):
        estimate_mgf_curve(model("y1"), [200.0], CFG)


def test_mgf_rejects_negative_lambda():
    with pytest.raises(ValueError):
        estimate_mgf_curve(model("y1"), [-1.0], CFG)


# --- Clopper-Pearson -------------------------------------------------------------

@pytest.mark.parametrize("count,n", [(0, 100), (5, 100), (50, 100),
                                     (99, 100), (100, 100), (227, 10_000)])
def test_clopper_pearson_binomial_identity(count, n):
    # independent characterization: at the interval ends the binomial tail
    # probability equals alpha/2
    lo, hi = clopper_pearson(count, n, confidence=0.99)
    assert 0.0 <= lo <= count / n <= hi <= 1.0
    if count > 0:
        assert binom.sf(count - 1, n, lo) == pytest.approx(0.005, rel=1e-6)
    if count < n:
        assert binom.cdf(count, n, hi) == pytest.approx(0.005, rel=1e-6)


# --- tail report -----------------------------------------------------------------

@pytest.fixture(scope="module")
def linear_report():
    tree = parse_expression("y1", 1)
    cond = check_conditions(tree)
    return tail_report(FunctionModel(tree), [0.0, 1.0, 2.0, 3.0], CFG,
                       condition_report=cond)


def test_tail_report_x_zero_row(linear_report):
    row = linear_report.tail_table[0]
    assert row.classical_bound == 1.0
    assert row.improved_bound == 1.0
    assert abs(row.empirical - 0.5) < 0.002


def test_tail_linear_matches_normal_tail(linear_report):
    # Phi-bar oracle via erfc; the 99% CI must cover it at every
    # resolvable grid point, and both bounds coincide since Var = K^2
    from scipy.special import erfc

    for row in linear_report.tail_table:
        if row.resolvable:
            tail = 0.5 * erfc(row.x / math.sqrt(2.0))
            assert row.ci_low <= tail <= row.ci_high, row
        assert row.improved_bound == pytest.approx(row.classical_bound,
                                                   rel=1e-12)
        assert row.violates_improved in (False, None)
    x2 = linear_report.tail_table[2]
    assert x2.classical_bound == pytest.approx(math.exp(-2.0), rel=1e-12)


def test_tail_report_certification(linear_report):
    assert linear_report.improved_certified
    assert linear_report.condition_report is not None


def test_bound_values_in_unit_interval(linear_report):
    for row in linear_report.tail_table:
        assert 0.0 < row.classical_bound <= 1.0
        assert 0.0 < row.improved_bound <= 1.0


def test_poincare_and_bound_ordering(suite_models):
    # Var <= K^2 (Gaussian Poincare); K-hat is a lower bound so allow its
    # variance-side uncertainty; then improved <= classical pointwise
    for name, m in suite_models.items():
        k = estimate_lipschitz(m, CFG)
        mv = estimate_mean_variance(m, CFG)
        assert mv.variance <= k.value**2 + 4 * mv.variance_uncertainty, name
        for x in (0.5, 1.0, 2.0):
            improved = math.exp(-x * x / (2 * mv.variance))
            classical = math.exp(-x * x / (2 * k.value**2))
            assert improved <= classical * (1 + 1e-12), name


def test_chernoff_grid_consistency(linear_report):
    # exp(-x^2/2V) is the infimum of exp(V lam^2/2 - lam x); a lambda grid
    # containing lam0 = x/V reproduces it up to the grid resolution
    v = linear_report.mean_variance.variance
    lams = np.linspace(0.0, 4.0, 401)
    for x in (1.0, 2.0):
        grid_min = float(np.min(np.exp(v * lams**2 / 2 - lams * x)))
        improved = math.exp(-x * x / (2 * v))
        slack = math.exp(v * (lams[1] - lams[0]) ** 2 / 2)
        assert improved <= grid_min <= improved * slack


def test_analytic_k_override():
    rep = tail_report(model("sin(y1)"), [1.0], CFG, analytic_k=1.0)
    assert rep.k_estimate.method == "analytic(user-supplied)"
    assert rep.tail_table[0].classical_bound == pytest.approx(
        math.exp(-0.5), rel=1e-12)


def test_unresolvable_rows_have_no_violation_flag():
    rep = tail_report(model("tanh(y1)"), [0.0, 6.0], CFG.with_(samples=100_000))
    far = rep.tail_table[1]
    assert far.count == 0 and not far.resolvable
    assert far.violates_improved is None


def test_negative_x_rejected():
    with pytest.raises(ValueError):
        tail_report(model("y1"), [-1.0], CFG)


# --- sigma example ---------------------------------------------------------------

@pytest.fixture(scope="module")
def sigma_report():
    spec = builtin_sigma_example()
    cond = check_conditions(spec.f_tree)
    return sigma_example(spec, [0.0, 0.25, 0.5, 1.0, 2.0], CFG,
                         condition_report=cond)


def test_sigma_example_mean(sigma_report):
    assert sigma_report.mean_variance.mean == pytest.approx(ORACLE_MEAN, abs=2e-3)
    assert sigma_report.sigma_sup == 1.0
    assert sigma_report.antiderivative_max_dev < 1e-8


def test_sigma_example_variance_bound(sigma_report):
    mv = sigma_report.mean_variance
    assert mv.variance <= 1.0 - mv.mean**2 + 4 * mv.variance_uncertainty


def test_sigma_example_bound_ordering(sigma_report):
    # the mean-corrected bound strictly improves the classical one at
    # every positive x, and the variance bound improves both
    for row in sigma_report.tail_table:
        if row.x > 0:
            assert row.example_bound < row.classical_bound
            assert row.improved_bound <= row.example_bound * (1 + 1e-12)
        else:
            assert row.example_bound == 1.0


def test_sigma_example_constant_sigma_degenerates():
    # sigma = c: f = c y is linear, E f = 0, and the corrected bound
    # coincides with the classical one
    spec = SigmaExampleSpec(
        sigma_tree=parse_expression("0.7 + 0*y1", 1),
        f_tree=parse_expression("0.7*y1", 1),
        sigma_sup=0.7,
    )
    rep = sigma_example(spec, [0.0, 1.0, 2.0], CFG)
    for row in rep.tail_table:
        assert row.example_bound == pytest.approx(row.classical_bound, rel=1e-9)
        assert row.improved_bound == pytest.approx(row.classical_bound, rel=1e-9)


def test_sigma_antiderivative_mismatch_detected():
    spec = SigmaExampleSpec(
        sigma_tree=parse_expression("1/(1+exp(y1))", 1),
        f_tree=parse_expression("y1 - 1.01*log(1+exp(y1))", 1),
        sigma_sup=1.0,
    )
    with pytest.raises(AntiderivativeMismatchError):
        sigma_example(spec, [0.0], CFG)


def test_sigma_invariant_violations_detected():
    increasing = SigmaExampleSpec(
        sigma_tree=parse_expression("logistic(y1)", 1),
        f_tree=parse_expression("log(1+exp(y1))", 1),
        sigma_sup=1.0,
    )
    with pytest.raises(SigmaInvariantError, match="increases"):
        sigma_example(increasing, [0.0], CFG)
    negative = SigmaExampleSpec(
        sigma_tree=parse_expression("0 - 1 + 0*y1", 1),
        f_tree=parse_expression("0 - y1", 1),
        sigma_sup=1.0,
    )
    with pytest.raises(SigmaInvariantError):
        sigma_example(negative, [0.0], CFG)


def test_tail_violation_flag_fires_for_heavy_tails():
    # f = e^Y has a lognormal tail: far out it exceeds the bound built
    # from its own variance, and the CI lower end detects that
    rep = tail_report(model("exp(y1)"), [0.0, 10.0], CFG)
    far = rep.tail_table[1]
    assert far.resolvable
    assert far.violates_improved


def test_mgf_heavy_tail_warning():
    pts = estimate_mgf_curve(model("2*y1"), [2.0], CFG)
    assert pts[0].heavy_tail
