import pytest

from geomlab import analysis, geometry, zoo
from geomlab.zoo import Expectation, ZooError

from conftest import ZOO_CASES, interior_points


def test_names():
    assert zoo.names() == [
        "klein_hyperbolic",
        "poincare_hyperbolic",
        "flat_projective_infinity",
        "klein_de_sitter",
        "normal_form_non_einstein",
    ]


def test_unknown_name():
    with pytest.raises(ZooError, match="unknown zoo entry"):
        zoo.instantiate("sphere", 3)


@pytest.mark.parametrize("m", [1, 6])
def test_unsupported_dimension(m):
    with pytest.raises(ZooError, match="unsupported dimension"):
        zoo.instantiate("klein_hyperbolic", m)


def test_normal_form_needs_three_dimensions():
    with pytest.raises(ZooError):
        zoo.instantiate("normal_form_non_einstein", 2)
    with pytest.raises(ValueError, match="Einstein"):
        zoo.normal_form_non_einstein(2)


@pytest.mark.parametrize("name, m", ZOO_CASES)
def test_every_expectation_has_provenance(name, m):
    exps = zoo.expectations(name, m)
    assert exps
    assert all(e.provenance for e in exps)


@pytest.mark.parametrize("name, m", ZOO_CASES)
def test_specs_validate(name, m):
    spec = zoo.instantiate(name, m)
    assert spec.dim == m
    geometry.validate(spec, interior_points(spec, 5))
    rays = analysis.make_rays(spec, analysis.AnalysisConfig())
    assert len(rays) == analysis.DEFAULT_BOUNDARY_POINTS


def test_signatures():
    assert zoo.instantiate("klein_hyperbolic", 4).signature == (0, 4)
    assert zoo.instantiate("klein_de_sitter", 4).signature == (1, 3)
    assert zoo.instantiate("normal_form_non_einstein", 3, {"C": -0.25}).signature == (1, 2)


def test_normal_form_parameters_reach_spec():
    spec = zoo.instantiate("normal_form_non_einstein", 3, {"C": 0.5})
    assert spec.param_map == {"C": 0.5, "b": 0.3, "c": 0.2}
    exps = {e.path: e for e in zoo.expectations("normal_form_non_einstein", 3, {"C": 0.5})}
    assert exps["scalar_boundary.value"].value == -3.0
    assert exps["asymptotics.C_measured"].value == 0.5


# --- Expectation.matches -----------------------------------------------------


def test_matches_exact_kinds():
    assert Expectation("a", True).matches(True)
    assert not Expectation("a", True).matches(1)
    assert Expectation("a", [True, False]).matches([True, False])
    assert Expectation("k", 1).matches(1) and not Expectation("k", 1).matches(2)


def test_matches_tolerances():
    assert Expectation("x", 1.0, 0.05).matches(1.04)
    assert not Expectation("x", 1.0, 0.05).matches(1.06)
    assert Expectation("x", -6.0, 1e-4, True).matches(-6.0005)
    assert not Expectation("x", -6.0, 1e-4, True).matches(-6.001)
    assert not Expectation("x", 1.0, 0.05).matches(None)
    assert not Expectation("x", 1.0, 0.05).matches(True)


# --- the backbone: every expectation reproduced ---------------------------------


@pytest.mark.parametrize("name, m", ZOO_CASES)
def test_full_report_meets_expectations(name, m):
    spec = zoo.instantiate(name, m)
    rep = analysis.full_report(spec)
    missed = [
        (e.path, e.value, rep.get(e.path))
        for e in zoo.expectations(name, m)
        if not e.matches(rep.get(e.path))
    ]
    assert not missed
