import io

import mpmath
import numpy as np
import pytest

from lindstedt.exceptions import (
    ConfigurationError,
    FitImpossible,
    GridTooCoarse,
    InvalidOrder,
    OrderUnavailable,
    ZeroCompatibilityFailure,
)
from lindstedt.model import GeneratingFunctionData
from lindstedt.rotation import small_divisor
from lindstedt.series import (
    ConjugationSeries,
    LindstedtSeries,
    coefficients_from_csv,
    coefficients_to_csv,
    compute_order,
    evaluate_curve,
    functional_residual,
    invariant_summary,
    map_orbit_check,
)


@pytest.fixture(scope="module")
def std_series(golden, std_map):
    return ConjugationSeries.compute(golden, std_map, None, 8).compute_H()


def _fourier(coeffs, eps, K, psi):
    total = mpmath.mpc(0)
    for k in range(1, K + 1):
        for nu, v in coeffs.get(k, {}).items():
            total += eps**k * v * mpmath.expj(nu * psi)
    return total


def test_first_order_closed_form(std_series, golden):
    with mpmath.workprec(256):
        d = small_divisor(golden, 1).delta
        assert set(std_series.coeffs[1]) == {-1, 1}
        assert abs(std_series.coefficient(1, 1) - (-0.5j) / d) < 1e-70
        assert abs(std_series.coefficient(1, -1) - 0.5j / d) < 1e-70


def test_second_order_closed_form(std_series, golden):
    with mpmath.workprec(256):
        d1, d2 = small_divisor(golden, 1).delta, small_divisor(golden, 2).delta
        assert abs(std_series.coefficient(2, 2) - (-0.25j) / (d1 * d2)) < 1e-70
        # odd modes vanish at even orders for the standard map
        assert std_series.coefficient(2, 1) == 0


def test_support_and_parity(std_series):
    for k, nu, _ in std_series.items():
        assert nu != 0 and abs(nu) <= k and (nu - k) % 2 == 0
    assert invariant_summary(std_series)["support_violations"] == 0


def test_reality(std_series):
    s = invariant_summary(std_series)
    assert s["reality_max_defect"] < 1e-60
    assert s["zero_compatibility_max_ratio"] < 1e-60


def test_H_first_order(std_series, golden):
    with mpmath.workprec(256):
        for nu in (1, -1):
            h = std_series.coefficient(1, nu)
            expected = h * (1 - mpmath.expjpi(-2 * golden.value * nu))
            assert abs(std_series.H_coeffs[1][nu] - expected) < 1e-70


def test_curve_at_zero_eps(std_series, golden):
    pts = evaluate_curve(std_series, 0, 8, [0, 1, 2.5])
    with mpmath.workprec(256):
        for (x, y), p in zip(pts, [0, 1, 2.5]):
            assert x == mpmath.mpf(p)
            assert abs(y - 2 * mpmath.pi * golden.value) < 1e-70


def test_curve_is_periodic_in_psi(std_series):
    with mpmath.workprec(256):
        a = evaluate_curve(std_series, 0.1, 8, [0.3])[0]
        b = evaluate_curve(std_series, 0.1, 8, [0.3 + 2 * mpmath.pi])[0]
        assert abs((b[0] - a[0]) - 2 * mpmath.pi) < 1e-60
        assert abs(b[1] - a[1]) < 1e-60


def test_first_order_defect_constant(std_series, golden):
    eps = mpmath.mpf("1e-6")
    rep = functional_residual(std_series, [eps, 2 * eps], 1, 16)
    d = abs(small_divisor(golden, 1).delta)
    assert abs(rep.residual_sup[0] / eps**2 * 2 * d - 1) < 1e-4
    assert abs(rep.fitted_slope - 2) < 1e-3


def test_residual_errors(std_series):
    with pytest.raises(GridTooCoarse):
        functional_residual(std_series, [0.01, 0.02], 8, 16)
    with pytest.raises(FitImpossible):
        functional_residual(std_series, [0.01], 2, 16)
    with pytest.raises(ConfigurationError):
        functional_residual(std_series, [0.02, 0.01], 2, 16)
    with pytest.raises(OrderUnavailable):
        functional_residual(std_series, [0.01, 0.02], 9, 64)


def test_order_errors(golden, std_map):
    s = ConjugationSeries(golden, std_map)
    with pytest.raises(InvalidOrder):
        compute_order(s, 2)
    with pytest.raises(InvalidOrder):
        s.extend(0)
    compute_order(s, 1)
    with pytest.raises(OrderUnavailable):
        s.coefficient(2, 0)


def test_incremental_matches_batch(golden, std_map, std_series):
    s = ConjugationSeries(golden, std_map)
    for k in range(1, 6):
        compute_order(s, k)
    for k in range(1, 6):
        assert s.coeffs[k] == std_series.coeffs[k]


def test_csv_is_deterministic_and_round_trips(golden, std_map, std_series):
    a = coefficients_to_csv(std_series)
    b = coefficients_to_csv(ConjugationSeries.compute(golden, std_map, None, 8))
    assert a == b
    assert a.splitlines()[0] == "k,nu,re,im"
    back = coefficients_from_csv(a)
    with mpmath.workprec(256):
        for k, nu, v in std_series.items():
            assert abs(back[k][nu] - v) <= abs(v) * mpmath.mpf(2) ** -250
    fh = io.StringIO()
    coefficients_to_csv(std_series, fh, which="H")
    assert fh.getvalue().startswith("k,nu,re,im\n")


def test_zero_compatibility_guard_trips_below_roundoff(golden, zdep_model):
    # the mode-0 sum cancels to working precision; a tolerance under the
    # roundoff floor must make the guard fire (the standard map cancels exactly)
    s = ConjugationSeries(golden, zdep_model, zero_tol=1e-95)
    with pytest.raises(ZeroCompatibilityFailure):
        s.extend(4)
    ok = ConjugationSeries.compute(golden, zdep_model, None, 4)
    assert max(ok.zero_ratios.values()) < 1e-60


def test_non_real_table_still_cancels(golden):
    sigma = GeneratingFunctionData({(1, 0, 0): -0.5, (-1, 0, 0): -0.25, (1, 1, 0): 0.3j, (-1, 1, 0): 0.1})
    s = ConjugationSeries.compute(golden, sigma, None, 4)
    assert max(s.zero_ratios.values()) < 1e-60


def test_estimator_api(golden, std_map):
    est = LindstedtSeries(max_order=4, eps=0.05)
    params = est.get_params()
    assert params["max_order"] == 4 and params["eps"] == 0.05
    est.fit(golden, std_map)
    assert set(est.coef_) == {1, 2, 3, 4}
    pts = est.transform([0.0, 1.0])
    assert pts.shape == (2, 2) and np.all(np.isfinite(pts))
    rep = est.residual([1e-3, 2e-3, 4e-3])
    assert abs(rep.fitted_slope - 5) < 0.05
    with pytest.raises(ConfigurationError):
        LindstedtSeries().fit(0.618)


def test_H_against_direct_grid_evaluation(golden, zdep_model, quad_twist):
    """y(psi) - b0 against b(2 pi omega + Dh-) + eps d2 sigma evaluated on the truncated h."""
    K = 5
    state = ConjugationSeries.compute(golden, zdep_model, quad_twist, K).compute_H()
    eps = mpmath.mpf("1e-3")
    with mpmath.workprec(256):
        w = 2 * mpmath.pi * golden.value

        def h(p):
            return mpmath.re(_fourier(state.coeffs, eps, K, p))

        def d2sigma(x, u):
            return mpmath.re(mpmath.fsum(
                v * eps**s * q * u ** (q - 1) * mpmath.expj(nu * x)
                for (nu, q, s), v in zdep_model.table.items() if q
            ))

        worst = 0
        for j in range(12):
            p = 2 * mpmath.pi * j / 12
            dm = h(p) - h(p - w)
            direct = quad_twist(dm) + eps * d2sigma(p - w + h(p - w), dm)
            H = mpmath.re(_fourier(state.H_coeffs, eps, K, p))
            worst = max(worst, abs(H - direct))
        assert worst < 1e-14  # O(eps^(K+1))


def test_orbit_follows_curve(golden, zdep_model, quad_twist):
    state = ConjugationSeries.compute(golden, zdep_model, quad_twist, 6)
    rep = map_orbit_check(state, "1e-3", 6, steps=50, residual_samples=16)
    assert rep.one_step_residual < 1e-17
    assert rep.max_deviation < 1e-15
