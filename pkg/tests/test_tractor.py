import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geomlab import analysis, geometry, tractor, zoo
from geomlab.geometry import build_spec
from geomlab.tractor import (
    SIGNS,
    DegenerateTractorError,
    TractorS2,
    TractorS2Dual,
    assemble,
    build_L,
    build_Phi,
    change_splitting,
    inverse_check,
    tractor_det,
)

from conftest import ZOO_CASES, interior_points

HALF = [0.5, 0.0]


def flat(m=2):
    coords = [f"x{i}" for i in range(m)]
    comps = [["1" if j == i else "0" for j in range(i, m)] for i in range(m)]
    return build_spec("flat", coords, comps, "x0", [0, m])


# --- L -----------------------------------------------------------------------


def test_klein_L_at_half(klein2):
    L = build_L(klein2, HALF)
    np.testing.assert_allclose(L.top, np.diag([0.75, 1.0]), atol=1e-14)
    assert not L.middle.any()
    assert L.bottom == pytest.approx(-4 / 3, rel=1e-12)
    assert L.splitting_tag == "levi-civita"


def test_flat_L():
    L = build_L(flat(3), [0.2, 0.1, 0.3])
    np.testing.assert_array_equal(L.top, np.eye(3))
    assert L.bottom == 0.0


def test_klein3_L_at_origin(klein3):
    L = build_L(klein3, [0.0, 0.0, 0.0])
    np.testing.assert_allclose(L.top, np.eye(3), atol=1e-15)
    assert L.bottom == pytest.approx(-1.0, rel=1e-12)


def test_assemble_blocks(klein2):
    A = assemble(build_L(klein2, HALF))
    np.testing.assert_allclose(A, np.diag([0.75, 1.0, -4 / 3]), atol=1e-12)
    np.testing.assert_array_equal(A, A.T)
    zero = TractorS2(np.zeros((2, 2)), np.zeros(2), 0.0)
    assert not assemble(zero).any()
    np.testing.assert_array_equal(assemble(build_L(flat(2), [0.3, 0.3])), np.diag([1.0, 1.0, 0.0]))


def test_slots_symmetrized():
    t = TractorS2([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0], 1.0)
    np.testing.assert_array_equal(t.top, t.top.T)
    d = TractorS2Dual(1.0, [0.0, 0.0], [[1.0, 2.0], [0.0, 1.0]])
    np.testing.assert_array_equal(d.psi, d.psi.T)
    np.testing.assert_array_equal(assemble(d), assemble(d).T)


# --- determinant identity ------------------------------------------------------


def test_klein_det_at_half(klein2):
    d = tractor_det(build_L(klein2, HALF), klein2, HALF)
    assert d.det == pytest.approx(-1.0, rel=1e-12)
    assert d.predicted == pytest.approx(-1.0, rel=1e-12)


def test_klein3_det_at_origin(klein3):
    d = tractor_det(build_L(klein3, [0, 0, 0]), klein3, [0, 0, 0])
    assert d.det == pytest.approx(-1.0, rel=1e-12) and d.predicted == pytest.approx(-1.0, rel=1e-12)


def test_flat_det_zero():
    s = flat(2)
    d = tractor_det(build_L(s, [0.4, 0.1]), s, [0.4, 0.1])
    assert d.det == 0.0 and d.predicted == 0.0


@pytest.mark.parametrize("name, m", ZOO_CASES)
def test_det_identity_at_interior_points(name, m):
    spec = zoo.instantiate(name, m)
    for p in interior_points(spec, 20, seed=7):
        d = tractor_det(build_L(spec, p), spec, p)
        assert abs(d.det - d.predicted) < 1e-8 * max(1.0, abs(d.scalar))


def test_det_sign_follows_signature():
    spec = zoo.instantiate("klein_de_sitter", 3)
    p = interior_points(spec, 1)[0]
    d = tractor_det(build_L(spec, p), spec, p)
    # Lorentzian: det g < 0 and S > 0, so the predicted determinant is negative
    assert d.scalar > 0 and d.predicted < 0


# --- Phi ---------------------------------------------------------------------


def test_klein_Phi_at_half(klein2):
    phi = build_Phi(klein2, HALF)
    assert phi.sigma == pytest.approx(-0.75, rel=1e-12)
    assert not phi.mu.any()
    np.testing.assert_allclose(phi.psi, 0.75 * geometry.metric_at(klein2, HALF).g, rtol=1e-14)


def test_klein3_Phi_at_origin(klein3):
    phi = build_Phi(klein3, [0, 0, 0])
    assert phi.sigma == pytest.approx(-1.0, rel=1e-12)
    np.testing.assert_allclose(phi.psi, np.eye(3), atol=1e-15)


def test_flat_Phi_degenerate():
    with pytest.raises(DegenerateTractorError):
        build_Phi(flat(2), [0.3, 0.2])


def test_inverse_at_half(klein2):
    assert inverse_check(build_L(klein2, HALF), build_Phi(klein2, HALF)) < 1e-10


def test_inverse_klein3_interior(klein3):
    for p in interior_points(klein3, 10, seed=4):
        assert inverse_check(build_L(klein3, p), build_Phi(klein3, p)) < 1e-9


@pytest.mark.parametrize("name, m", [c for c in ZOO_CASES if c[0] != "flat_projective_infinity"])
def test_inverse_everywhere_defined(name, m):
    spec = zoo.instantiate(name, m)
    for p in interior_points(spec, 10, seed=5):
        L, phi = build_L(spec, p), build_Phi(spec, p)
        assert inverse_check(L, phi) < 1e-9
        assert inverse_check(L, phi, relative=True) < 1e-9


def test_inverse_requires_same_splitting(klein2):
    phi = change_splitting(build_Phi(klein2, HALF), [0.1, 0.2])
    with pytest.raises(tractor.TractorError):
        inverse_check(build_L(klein2, HALF), phi)


# --- change of splitting -----------------------------------------------------


def test_change_identity(klein2):
    phi = build_Phi(klein2, HALF)
    moved = change_splitting(phi, [0.0, 0.0])
    np.testing.assert_array_equal(assemble(moved), assemble(phi))


def test_change_bottom_fixed_when_top_slots_vanish():
    psi = np.array([[2.0, 0.5], [0.5, 1.0]])
    moved = change_splitting(TractorS2Dual(0.0, np.zeros(2), psi), [3.0, -1.0])
    np.testing.assert_array_equal(moved.psi, psi)


def test_klein_change_to_flat_chart_middle(klein2):
    p = np.array(HALF)
    moved = change_splitting(build_Phi(klein2, p), -p / (1 - p @ p))
    assert moved.mu[0] == pytest.approx(0.5, rel=1e-12)
    assert moved.mu[1] == 0.0


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(-2, 2))
def test_projecting_slot_invariant(u, sigma):
    t = TractorS2Dual(sigma, [0.1, 0.2, 0.3], np.eye(3))
    assert change_splitting(t, u).sigma == sigma


def _det_invariance_holds(signs, phi, rng, trials=50):
    m = phi.mu.shape[0]
    # first move gives mu != 0, which is needed to see s1 and s2
    base = change_splitting(phi, rng.normal(size=m), signs=signs)
    d0 = np.linalg.det(assemble(phi))
    for _ in range(trials):
        u = rng.normal(size=m)
        for t in (base, phi):
            d = np.linalg.det(assemble(change_splitting(t, u, signs=signs)))
            if abs(d - d0) > 1e-9 * abs(d0):
                return False
    return True


@pytest.mark.parametrize("signs", list(itertools.product((1, -1), repeat=3)))
def test_sign_constants_by_determinant_invariance(signs, klein3):
    phi = build_Phi(klein3, [0.2, -0.1, 0.3])
    ok = _det_invariance_holds(signs, phi, np.random.default_rng(11))
    assert ok == (signs in {(1, 1, 1), (-1, -1, 1)})


def test_middle_slot_relation_fixes_s1(klein3):
    # both determinant-invariant choices differ in s1; only s1 = +1 makes
    # mu~ = (1/2) d sigma~ near the boundary
    t = 1e-3
    p = np.array([1 - t, 0.0, 0.0])
    phi = build_Phi(klein3, p)
    gamma = geometry.levi_civita(klein3, p).trace
    h = 1e-2 * t
    half = np.array([
        (tractor.sigma_rep(klein3, p + h * e) - tractor.sigma_rep(klein3, p - h * e)) / (4 * h)
        for e in np.eye(3)
    ])
    good = change_splitting(phi, -gamma / 4, signs=(1, 1, 1)).mu
    bad = change_splitting(phi, -gamma / 4, signs=(-1, -1, 1)).mu
    assert np.max(np.abs(good - half)) < 1e-6
    assert np.max(np.abs(bad - half)) > 1.0
    assert SIGNS == (1, 1, 1)


@settings(deadline=None, max_examples=20)
@given(st.sampled_from([c for c in ZOO_CASES if c[0] != "flat_projective_infinity"]), st.integers(0, 10**6))
def test_splitting_invariance_of_Phi_determinant(case, seed):
    spec = zoo.instantiate(*case)
    (p,) = interior_points(spec, 1, seed=seed)
    assert _det_invariance_holds(SIGNS, build_Phi(spec, p), np.random.default_rng(seed), trials=5)


# --- boundary middle slot ----------------------------------------------------


@pytest.mark.parametrize("m", [2, 3])
def test_phi_middle_slot_klein(m):
    spec = zoo.instantiate("klein_hyperbolic", m)
    rays = analysis.make_rays(spec, analysis.AnalysisConfig())
    for res in tractor.phi_middle_slot_check(spec, rays):
        assert all(r < 1e-5 for r in res.residual)
        # on Klein mu~ at the boundary equals the boundary point itself
        np.testing.assert_allclose(res.mu_boundary, res.boundary_point, atol=1e-5)


def test_phi_middle_slot_precondition():
    spec = zoo.instantiate("flat_projective_infinity", 2)
    rays = analysis.make_rays(spec, analysis.AnalysisConfig())
    with pytest.raises(DegenerateTractorError):
        tractor.phi_middle_slot_check(spec, rays)
