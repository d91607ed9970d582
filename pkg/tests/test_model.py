import json

import mpmath
import pytest

from lindstedt.exceptions import DecayViolation, RealityViolation, SchemaError, ZeroTwist
from lindstedt.model import (
    GeneratingFunctionData,
    TwistData,
    dump_model,
    linear_twist,
    load_model,
    quadratic_twist,
    standard_map_model,
    twist_from_frequency_map,
)

from .conftest import data_path


def test_standard_map_table():
    sigma = standard_map_model()
    assert dict(sigma.table) == {(0, 0, 0): 1, (1, 0, 0): -0.5, (-1, 0, 0): -0.5}
    assert sigma.mode_cutoff == 1
    assert sigma.taylor_cutoff == 0 and sigma.eps_cutoff == 0
    assert sigma.is_z_independent()
    assert sigma.reality_defect() == 0


def test_standard_map_fixture_round_trip():
    sigma, twist = load_model(data_path("standard_map.json"))
    assert dict(sigma.table) == dict(standard_map_model().table)
    assert twist.is_identity


def test_builtin_document():
    sigma, _ = load_model({"builtin": "standard_map"})
    assert dict(sigma.table) == dict(standard_map_model().table)


def test_reality_violation():
    with pytest.raises(RealityViolation):
        load_model(data_path("reality_violation.json"))


def test_zero_twist():
    with pytest.raises(ZeroTwist):
        load_model(data_path("zero_twist.json"))
    with pytest.raises(ZeroTwist):
        TwistData(b1=0)


def test_schema_errors():
    with pytest.raises(SchemaError):
        load_model({"sigma": [{"nu": 1, "q": -1}]})
    with pytest.raises(SchemaError):
        load_model({"builtin": "standard_map", "sigma": []})
    with pytest.raises(SchemaError):
        load_model({"sigma": [{"nu": 1, "re": "1"}, {"nu": 1, "re": "2"}]})
    with pytest.raises(SchemaError):
        load_model({"unknown": 3})


def test_decay_envelope_is_tight_on_standard_map():
    doc = {"builtin": "standard_map", "decay": {"Xi": "1", "xi": str(mpmath.log(2)), "rho": "7"}}
    sigma, _ = load_model(doc)
    assert sigma.decay.Xi == 1
    doc["decay"]["xi"] = "0.7"  # e^-0.7 < 1/2
    with pytest.raises(DecayViolation):
        load_model(doc)


def test_dump_load_round_trip_is_exact(zdep_model, quad_twist):
    doc = dump_model(zdep_model, quad_twist)
    text = json.dumps(doc)
    sigma, twist = load_model(text)
    assert dict(sigma.table) == dict(zdep_model.table)
    assert twist.b1 == quad_twist.b1 and twist.bbar == quad_twist.bbar and twist.b0 == quad_twist.b0
    assert sigma.decay == zdep_model.decay


def test_linear_twist():
    t = linear_twist()
    assert t.b1 == 1 and t.bbar == () and t.is_identity


def test_inverse_of_identity_and_scaling():
    t = twist_from_frequency_map([1], cutoff=6)
    assert t.b1 == 1 and t.bbar == ()
    t = twist_from_frequency_map([2], cutoff=6)
    assert t.b1 == mpmath.mpf(1) / 2 and t.bbar == ()


def test_twist_rejects_flat_frequency_map():
    with pytest.raises(ZeroTwist):
        twist_from_frequency_map([0, 1], cutoff=4)
    with pytest.raises(ValueError):
        twist_from_frequency_map([-1, 1], cutoff=4)


def _poly_mul(a, b, n):
    out = [mpmath.mpf(0)] * (n + 1)
    for i, x in enumerate(a[: n + 1]):
        for j, y in enumerate(b[: n + 1 - i]):
            out[i + j] += x * y
    return out


def test_frequency_map_inversion_by_composition(golden):
    """a(y) = y + y^2 around a(y0) = 2 pi omega: compose a(b(w)) and compare with w."""
    cutoff = 14
    with mpmath.workprec(256):
        w = 2 * mpmath.pi * golden.value
        y0 = (-1 + mpmath.sqrt(1 + 4 * w)) / 2
        a1, a2 = 1 + 2 * y0, mpmath.mpf(1)
        twist = twist_from_frequency_map([a1, a2], cutoff, y0)
        t = [mpmath.mpf(0), twist.b1] + [twist.b1 * c for c in twist.bbar]
        t += [mpmath.mpf(0)] * (cutoff + 1 - len(t))
        comp = [a1 * x + a2 * y for x, y in zip(t, _poly_mul(t, t, cutoff))]
        target = [0, 1] + [0] * (cutoff - 1)
        assert max(abs(c - e) for c, e in zip(comp, target)) < 1e-25
        assert abs(y0 + y0**2 - w) < 1e-70


def test_quadratic_twist_builder(golden):
    t = quadratic_twist(golden.value, 0.5, cutoff=10)
    with mpmath.workprec(256):
        y = t.b0 + t(mpmath.mpf("0.01"))  # b(2 pi omega + 0.01)
        a = y + y * y / 2
        assert abs(a - (2 * mpmath.pi * golden.value + mpmath.mpf("0.01"))) < 1e-15


def test_scaled_table():
    sigma = standard_map_model().scaled(3)
    assert sigma.get(1, 0) == -1.5 and sigma.get(0, 0) == 3


def test_table_drops_zero_entries():
    g = GeneratingFunctionData({(1, 0, 0): 0, (-1, 0, 0): 0, (0, 0, 0): 2})
    assert list(g.table) == [(0, 0, 0)]
    with pytest.raises(SchemaError):
        GeneratingFunctionData({(1, -1, 0): 1})
