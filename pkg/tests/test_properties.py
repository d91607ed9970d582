import mpmath
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from lindstedt.model import GeneratingFunctionData, dump_model, load_model, twist_from_frequency_map
from lindstedt.radius import coefficient_norms
from lindstedt.rotation import bryuno_sum, make_rotation, small_divisor
from lindstedt.series import ConjugationSeries, invariant_summary
from lindstedt.trees import _identity_residuals

SETTINGS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])

quotients = st.lists(st.integers(1, 12), min_size=0, max_size=4)
tails = st.lists(st.integers(1, 12), min_size=1, max_size=3)


def _rot(pre, tail, bits=192):
    return make_rotation(cf=pre, periodic_tail=tail, precision_bits=bits)


@SETTINGS
@given(quotients, tails)
def test_convergents_alternate_and_bracket(pre, tail):
    r = _rot(pre, tail)
    conv = r.convergents
    with mpmath.workprec(r.precision_bits):
        for (p0, q0), (p1, q1) in zip(conv, conv[1:]):
            assert abs(p1 * q0 - p0 * q1) == 1
            assert q1 > q0 or q0 == 1
            assert abs(r.value - mpmath.mpf(p0) / q0) < mpmath.mpf(1) / (q0 * q1)


@SETTINGS
@given(quotients, tails)
def test_denominators_are_best_approximations(pre, tail):
    r = _rot(pre, tail)
    q = r.q
    for k in range(1, 5):
        if q[k + 1] > 400:
            break
        best = small_divisor(r, q[k]).distance
        for n in range(1, q[k + 1]):
            assert small_divisor(r, n).distance >= best


@SETTINGS
@given(quotients, tails, st.integers(2, 25))
def test_bryuno_partial_sums_monotone_and_tail_bounded(pre, tail, n):
    r = _rot(pre, tail, 512)
    n = min(n, r.depth - 2)
    d = bryuno_sum(r, n)
    assert all(b >= a for a, b in zip(d.partial_sums, d.partial_sums[1:]))
    full = bryuno_sum(r, min(r.depth - 1, n + 40)).value
    with mpmath.workprec(512):
        assert full - d.value <= d.tail_bound


@SETTINGS
@given(quotients, tails, st.integers(1, 300))
def test_small_divisor_relations(pre, tail, nu):
    r = _rot(pre, tail)
    d = small_divisor(r, nu)
    with mpmath.workprec(r.precision_bits):
        tol = mpmath.mpf(2) ** (-r.precision_bits + 40)
        assert abs(d.delta - (d.delta_plus - d.delta_minus)) < tol
        assert abs(d.delta + abs(d.delta_plus) ** 2) < tol
        assert abs(d.delta_minus + mpmath.conj(d.delta_plus)) < tol
        assert abs(d.delta) >= 16 * d.distance**2 * (1 - tol)
        assert abs(d.delta) <= 4 * mpmath.pi**2 * d.distance**2


def _real_table(draw_vals):
    table = {(0, 0, 0): 1}
    for (nu, q, s), (a, b) in draw_vals.items():
        if nu == 0:
            table[(0, q, s)] = a
        else:
            table[(nu, q, s)] = complex(a, b)
            table[(-nu, q, s)] = complex(a, -b)
    return table


coef = st.floats(-1, 1, allow_nan=False).filter(lambda x: abs(x) > 1e-3)
entries = st.dictionaries(
    st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(0, 1)),
    st.tuples(coef, coef), min_size=1, max_size=4,
).filter(lambda d: any(nu for nu, _, _ in d))


@SETTINGS
@given(entries)
def test_random_real_models_give_real_cancelling_series(vals):
    g = make_rotation(periodic_tail=[1], precision_bits=192)
    sigma = GeneratingFunctionData(_real_table(vals), None, 192)
    s = ConjugationSeries.compute(g, sigma, None, 4)
    summary = invariant_summary(s)
    assert summary["support_violations"] == 0
    assert summary["reality_max_defect"] < 1e-40
    assert summary["zero_compatibility_max_ratio"] < 1e-40


@SETTINGS
@given(entries, st.floats(0.2, 5))
def test_norms_scale_homogeneously(vals, gamma):
    g = make_rotation(periodic_tail=[2], precision_bits=192)
    sigma = GeneratingFunctionData(_real_table(vals), None, 192)
    # eps-dependent entries pick up gamma, not gamma^(1+s)
    if sigma.eps_cutoff:
        return
    a = coefficient_norms(ConjugationSeries.compute(g, sigma, None, 4))
    b = coefficient_norms(ConjugationSeries.compute(g, sigma.scaled(gamma), None, 4))
    with mpmath.workprec(192):
        for k in a:
            assert abs(b[k] / (mpmath.mpf(gamma) ** k * a[k]) - 1) < 1e-12


@SETTINGS
@given(st.lists(st.floats(-4, 4, allow_nan=False), min_size=1, max_size=7))
def test_zero_sum_identities_hold(head):
    with mpmath.workprec(113):
        x = [mpmath.mpf(v) for v in head]
        x.append(-mpmath.fsum(x))
        r1, r2 = _identity_residuals(x)
        assert r1 < 1e-25 and r2 < 1e-25


@SETTINGS
@given(entries, st.lists(st.floats(-0.5, 0.5, allow_nan=False), max_size=3), st.floats(0.5, 3))
def test_model_round_trip(vals, higher, a1):
    sigma = GeneratingFunctionData(_real_table(vals), None, 192)
    twist = twist_from_frequency_map([a1] + higher, 6, 0, 192)
    s2, t2 = load_model(dump_model(sigma, twist), 192)
    assert dict(s2.table) == dict(sigma.table)
    assert t2.b1 == twist.b1 and t2.bbar == twist.bbar
