import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geomlab import expr, geometry, zoo
from geomlab.jet import DomainError, Jet2, seed, seeds

from conftest import ZOO_CASES, interior_points


def test_seed_definition():
    j = seed([2.0, 3.0], 0)
    assert j.value == 2.0
    np.testing.assert_array_equal(j.grad, [1.0, 0.0])
    np.testing.assert_array_equal(j.hess, np.zeros((2, 2)))
    j = seed([2.0, 3.0], 1)
    assert j.value == 3.0
    np.testing.assert_array_equal(j.grad, [0.0, 1.0])
    j = seed([5.0], 0)
    assert j.value == 5.0 and j.dim == 1


def test_seed_index_out_of_range():
    with pytest.raises(IndexError):
        seed([1.0, 2.0], 2)


def test_product_rule():
    a, b = seeds([2.0, 3.0])
    p = a * b
    assert p.value == 6.0
    np.testing.assert_array_equal(p.grad, [3.0, 2.0])
    np.testing.assert_array_equal(p.hess, [[0.0, 1.0], [1.0, 0.0]])


def test_reciprocal():
    (a,) = seeds([2.0])
    r = 1.0 / a
    assert r.value == 0.5
    np.testing.assert_allclose(r.grad, [-0.25])
    np.testing.assert_allclose(r.hess, [[0.25]])


def test_exp_at_zero():
    (a,) = seeds([0.0])
    e = a.apply("exp")
    assert e.value == 1.0 and e.grad[0] == 1.0 and e.hess[0, 0] == 1.0


@pytest.mark.parametrize("op, point", [("log", 0.0), ("sqrt", -1.0), ("abs", 0.0)])
def test_domain_errors(op, point):
    (a,) = seeds([point])
    with pytest.raises(DomainError):
        a.apply(op)


def test_division_by_zero_valued_jet():
    (a,) = seeds([0.0])
    with pytest.raises(DomainError):
        1.0 / a


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        seeds([1.0, 2.0])[0] + seeds([1.0])[0]


@pytest.mark.parametrize(
    "op, f, f1, f2",
    [
        ("sin", np.sin, np.cos, lambda x: -np.sin(x)),
        ("cos", np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x)),
        ("tanh", np.tanh, lambda x: 1 - np.tanh(x) ** 2, lambda x: -2 * np.tanh(x) * (1 - np.tanh(x) ** 2)),
        ("sqrt", np.sqrt, lambda x: 0.5 / np.sqrt(x), lambda x: -0.25 * x**-1.5),
        ("log", np.log, lambda x: 1 / x, lambda x: -1 / x**2),
        ("abs", np.abs, np.sign, lambda x: 0.0),
    ],
)
def test_unary_chain_rule(op, f, f1, f2):
    v = 0.7
    (a,) = seeds([v])
    j = a.apply(op)
    assert j.value == pytest.approx(f(v), rel=1e-15)
    assert j.grad[0] == pytest.approx(f1(v), rel=1e-14)
    assert j.hess[0, 0] == pytest.approx(f2(v), rel=1e-14, abs=1e-300)


def test_constant_power():
    (a,) = seeds([2.0])
    j = a.powc(1.5)
    assert j.value == pytest.approx(2**1.5)
    assert j.grad[0] == pytest.approx(1.5 * 2**0.5)
    assert j.hess[0, 0] == pytest.approx(0.75 * 2**-0.5)


# --- properties --------------------------------------------------------------

jets = st.builds(
    lambda v, g, h: Jet2(v, np.array(g), np.array(h).reshape(3, 3)),
    st.floats(0.1, 5.0),
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.lists(st.floats(-3, 3), min_size=9, max_size=9),
)


def _close(a: Jet2, b: Jet2, rel=1e-12):
    scale = max(1.0, abs(a.value), np.max(np.abs(a.grad)), np.max(np.abs(a.hess)))
    assert abs(a.value - b.value) <= rel * scale
    assert np.max(np.abs(a.grad - b.grad)) <= rel * scale
    assert np.max(np.abs(a.hess - b.hess)) <= rel * scale


@given(jets, jets, jets)
def test_distributive(a, b, c):
    _close((a + b) * c, a * c + b * c)


@given(jets)
def test_exp_log_inverse(a):
    _close(a.apply("log").apply("exp"), a)


@given(jets)
def test_hessian_exactly_symmetric(a):
    for j in (a, a * a, a.apply("sin"), 1.0 / a, a.powc(0.5)):
        np.testing.assert_array_equal(j.hess, j.hess.T)


STEP = 1e-4


@pytest.mark.parametrize("name, m", ZOO_CASES)
def test_component_derivatives_match_central_differences(name, m):
    spec = zoo.instantiate(name, m)
    for p in interior_points(spec, 4, seed=m):
        for i in range(m):
            for k in range(i, m):
                comp = spec.component(i, k)
                j = expr.evaluate(comp, seeds(p), spec.param_map)
                if not isinstance(j, Jet2):
                    continue

                def f(q):
                    return expr.evaluate(comp, list(q), spec.param_map)

                grad = np.empty(m)
                hess = np.empty((m, m))
                for a in range(m):
                    ea = np.zeros(m)
                    ea[a] = STEP
                    grad[a] = (f(p + ea) - f(p - ea)) / (2 * STEP)
                    for b in range(m):
                        eb = np.zeros(m)
                        eb[b] = STEP
                        hess[a, b] = (
                            f(p + ea + eb) - f(p + ea - eb) - f(p - ea + eb) + f(p - ea - eb)
                        ) / (4 * STEP**2)
                gs = max(np.max(np.abs(j.grad)), abs(j.value))
                hs = max(np.max(np.abs(j.hess)), gs)
                assert np.max(np.abs(j.grad - grad)) <= 1e-5 * gs
                assert np.max(np.abs(j.hess - hess)) <= 1e-5 * hs


def test_plain_metric_agrees_with_jet_values(klein3):
    p = [0.2, -0.3, 0.1]
    np.testing.assert_array_equal(geometry.metric_values(klein3, p), geometry.metric_at(klein3, p).g)
