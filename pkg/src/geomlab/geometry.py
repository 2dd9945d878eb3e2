"""Pointwise pseudo-Riemannian and projective quantities on a chart.

Index conventions (manifold dimension ``m = n + 1``):

* ``gamma_full[k, i, j]`` is the Christoffel symbol with upper index ``k``.
* ``dgamma[l, k, i, j]`` is its partial derivative along coordinate ``l``.
* ``riemann[i, j, k, l]`` is ``R_ij^k_l`` with
  ``R_ij^k_l = d_i G^k_jl - d_j G^k_il + G^k_im G^m_jl - G^k_jm G^m_il``,
  so ``Ric_jl = R_kj^k_l`` is positive on round spheres and negative on
  hyperbolic space.

Metric derivatives come from order-2 jets, so the Christoffel symbols and
their first derivatives (hence the curvature) are exact up to roundoff.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from . import expr
from .expr import Expr
from .jet import Jet2, seeds


class GeometryError(ValueError):
    pass


class SingularMetricError(GeometryError, ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """A metric given by closed-form components on one chart.

    ``upper[i]`` holds the components ``g_ij`` for ``j >= i``; the lower
    triangle is never stored.  ``signature`` is ``(p, q)`` with ``p`` the
    number of negative and ``q`` the number of positive eigenvalues.
    """

    name: str
    coords: tuple[str, ...]
    upper: tuple[tuple[Expr, ...], ...]
    defining_function: Expr
    signature: tuple[int, int]
    params: tuple[tuple[str, float], ...] = ()
    boundary_params: tuple[str, ...] = ()
    boundary_chart: tuple[Expr, ...] | None = None
    boundary_samples: tuple[tuple[float, ...], ...] | None = None
    boundary_box: tuple[tuple[float, float], ...] | None = None
    sources: Mapping[str, object] = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def n(self) -> int:
        return len(self.coords) - 1

    @functools.cached_property
    def param_map(self) -> dict[str, float]:
        return dict(self.params)

    def component(self, i: int, j: int) -> Expr:
        if i > j:
            i, j = j, i
        return self.upper[i][j - i]

    def with_defining_function(self, r: Expr, name: str | None = None) -> "MetricSpec":
        return replace(self, defining_function=r, name=name or self.name)


def _parse(text, names, pnames, where: str) -> Expr:
    try:
        return expr.parse(text, names, pnames)
    except expr.ExprError as exc:
        raise expr.ExprError(f"{where}: {exc}") from exc


def build_spec(
    name: str,
    coords: Sequence[str],
    components: Sequence[Sequence[str]],
    defining_function: str,
    signature: Sequence[int],
    params: Mapping[str, float] | None = None,
    boundary_chart: Sequence[str] | None = None,
    boundary_params: Sequence[str] | None = None,
    boundary_samples: Sequence[Sequence[float]] | None = None,
    boundary_box: Sequence[Sequence[float]] | None = None,
) -> MetricSpec:
    """Parse expression strings into a :class:`MetricSpec`.

    ``components[i]`` lists ``g_ii, g_i(i+1), ..., g_i(m-1)`` (upper triangle).
    """
    coords = tuple(coords)
    m = len(coords)
    if m < 2:
        raise GeometryError("dimension must be at least 2")
    params = dict(params or {})
    pnames = tuple(params)
    if len(components) != m:
        raise GeometryError(f"components: expected {m} rows, got {len(components)}")
    upper = []
    for i, row in enumerate(components):
        if len(row) != m - i:
            raise GeometryError(f"components: row {i} must have {m - i} entries (upper triangle)")
        upper.append(tuple(_parse(s, coords, pnames, f"components[{i}][{j}]") for j, s in enumerate(row)))
    r = _parse(defining_function, coords, pnames, "defining_function")
    sig = tuple(int(s) for s in signature)
    if len(sig) != 2 or sig[0] < 0 or sig[1] < 0 or sum(sig) != m:
        raise GeometryError(f"signature {list(signature)} does not sum to dimension {m}")
    chart = None
    bparams: tuple[str, ...] = ()
    if boundary_chart is not None:
        bparams = tuple(boundary_params or [f"s{k}" for k in range(m - 1)])
        if len(boundary_chart) != m:
            raise GeometryError(f"boundary_chart: expected {m} expressions")
        chart = tuple(_parse(s, bparams, pnames, f"boundary_chart[{k}]") for k, s in enumerate(boundary_chart))
    samples = None
    if boundary_samples is not None:
        samples = tuple(tuple(float(v) for v in s) for s in boundary_samples)
        if any(len(s) != len(bparams) for s in samples):
            raise GeometryError("boundary_samples: tuple length must match boundary parameters")
    box = None
    if boundary_box is not None:
        box = tuple((float(lo), float(hi)) for lo, hi in boundary_box)
    return MetricSpec(
        name=name,
        coords=coords,
        upper=tuple(upper),
        defining_function=r,
        signature=sig,
        params=tuple(params.items()),
        boundary_params=bparams,
        boundary_chart=chart,
        boundary_samples=samples,
        boundary_box=box,
        sources={
            "components": [list(row) for row in components],
            "defining_function": defining_function,
            "boundary_chart": list(boundary_chart) if boundary_chart is not None else None,
        },
    )


# ---------------------------------------------------------------------------
# metric evaluation


def metric_values(spec: MetricSpec, point: Sequence[float]) -> np.ndarray:
    """Plain (non-jet) evaluation of the metric matrix."""
    m = spec.dim
    pt = [float(x) for x in point]
    g = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            g[i, j] = g[j, i] = expr.evaluate(spec.component(i, j), pt, spec.param_map)
    return g


def defining_value(spec: MetricSpec, point: Sequence[float]) -> float:
    return expr.evaluate(spec.defining_function, [float(x) for x in point], spec.param_map)


def defining_jet(spec: MetricSpec, point: Sequence[float]) -> Jet2:
    r = expr.evaluate(spec.defining_function, seeds(point), spec.param_map)
    if not isinstance(r, Jet2):
        r = Jet2.constant(r, len(point))
    return r


@dataclass(frozen=True)
class MetricJet:
    point: np.ndarray
    g: np.ndarray  # g[i, j]
    dg: np.ndarray  # dg[i, j, l] = d_l g_ij
    ddg: np.ndarray  # ddg[i, j, l, s] = d_l d_s g_ij
    g_inv: np.ndarray
    det: float

    def jet(self, i: int, j: int) -> Jet2:
        return Jet2(self.g[i, j], self.dg[i, j].copy(), self.ddg[i, j].copy())


@functools.lru_cache(maxsize=8192)
def _metric_jet_cached(spec: MetricSpec, point: tuple[float, ...], scale: float = 1.0) -> MetricJet:
    m = spec.dim
    x = seeds(point)
    g = np.empty((m, m))
    dg = np.empty((m, m, m))
    ddg = np.empty((m, m, m, m))
    for i in range(m):
        for j in range(i, m):
            v = expr.evaluate(spec.component(i, j), x, spec.param_map)
            if not isinstance(v, Jet2):
                v = Jet2.constant(v, m)
            g[i, j] = g[j, i] = v.value
            dg[i, j] = dg[j, i] = v.grad
            ddg[i, j] = ddg[j, i] = v.hess
    if scale != 1.0:
        g, dg, ddg = scale * g, scale * dg, scale * ddg
    det = float(np.linalg.det(g))
    if not np.all(np.isfinite(g)) or det == 0 or np.linalg.cond(g) > 1e13:
        raise SingularMetricError(f"metric singular at {list(point)}")
    g_inv = np.linalg.inv(g)
    g_inv += g_inv @ (np.eye(m) - g @ g_inv)
    return MetricJet(np.array(point), g, dg, ddg, g_inv, det)


def metric_at(spec: MetricSpec, point: Sequence[float], scale: float = 1.0) -> MetricJet:
    """Metric components with first and second derivatives at ``point``.

    ``scale`` multiplies the metric by a constant; see :func:`roundoff_probe`.
    """
    pt = tuple(float(v) for v in point)
    if len(pt) != spec.dim:
        raise GeometryError(f"point has {len(pt)} coordinates, chart has {spec.dim}")
    return _metric_jet_cached(spec, pt, float(scale))


# constant rescalings used to expose roundoff; not powers of two on purpose
PROBE_SCALES = (0.7, 1.3)
NOISE_FACTOR = 8.0


def roundoff_probe(
    fn: Callable[[float], object], reference: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Value of ``fn(1.0)`` and a roundoff estimate for it.

    ``fn(scale)`` must compute a quantity that is exactly invariant under
    ``g -> scale * g`` (Christoffel symbols, Ricci, ``scale * S``, ...).
    Rescaling leaves the mathematics unchanged but perturbs every rounding
    step, so the spread between the rescaled recomputations measures the
    roundoff amplified by ill-conditioning near the boundary.  ``reference``
    is the size of the terms that cancel in the quantity; one ulp of it (or
    of the result, whichever is larger) is the smallest noise reported.
    """
    base = np.asarray(fn(1.0), dtype=float)
    floor = max(abs(reference), float(np.max(np.abs(base))) if base.size else 0.0)
    spread = np.full_like(base, np.finfo(float).eps * floor)
    for c in PROBE_SCALES:
        spread = np.maximum(spread, np.abs(np.asarray(fn(c), dtype=float) - base))
    return base, NOISE_FACTOR * spread


def signature_of(g: np.ndarray) -> tuple[int, int]:
    ev = np.linalg.eigvalsh(g)
    return int(np.sum(ev < 0)), int(np.sum(ev > 0))


# ---------------------------------------------------------------------------
# connection


@dataclass(frozen=True)
class ChristoffelData:
    point: np.ndarray
    gamma_full: np.ndarray  # [k, i, j]
    trace: np.ndarray  # gamma_i = sum_k G^k_ik
    tracefree: np.ndarray  # [k, i, j]
    dgamma: np.ndarray | None = None  # [l, k, i, j]

    @property
    def n(self) -> int:
        return self.gamma_full.shape[0] - 1


def decompose(point, gamma_full: np.ndarray, dgamma=None) -> ChristoffelData:
    """Split connection coefficients into trace and trace-free parts."""
    trace = np.einsum("kik->i", gamma_full)
    tracefree = gamma_full - trace_part(trace)
    return ChristoffelData(np.asarray(point, dtype=float), gamma_full, trace, tracefree, dgamma)


def trace_part(trace: np.ndarray) -> np.ndarray:
    """``(1/(n+2)) (t_i delta^k_j + t_j delta^k_i)`` as an array ``[k, i, j]``."""
    m = trace.shape[0]
    eye = np.eye(m)
    t = np.einsum("i,kj->kij", trace, eye)
    return (t + t.transpose(0, 2, 1)) / (m + 1)


def _symmetrize_ij(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _solve(g: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``g^-1 b`` along the first axis of ``b``, with one refinement step."""
    flat = b.reshape(b.shape[0], -1)
    x = np.linalg.solve(g, flat)
    x += np.linalg.solve(g, flat - g @ x)
    return x.reshape(b.shape)


def christoffel_from_jet(mj: MetricJet) -> tuple[np.ndarray, np.ndarray]:
    """Levi-Civita symbols ``G[k,i,j]`` and derivatives ``dG[l,k,i,j]``."""
    dg, ddg = mj.dg, mj.ddg
    # first kind: first[l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    first = 0.5 * (
        np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg) - np.einsum("ijl->lij", dg)
    )
    gamma = _symmetrize_ij(_solve(mj.g, first))
    dfirst = 0.5 * (
        np.einsum("jlis->slij", ddg) + np.einsum("iljs->slij", ddg) - np.einsum("ijls->slij", ddg)
    )
    # d_s G = g^-1 (d_s first - d_s g . G); solving avoids the product of two
    # inverses, which would square the condition number near the boundary
    rhs = dfirst - np.einsum("abs,bij->saij", dg, gamma)
    dgamma = np.stack([_solve(mj.g, rhs[s]) for s in range(rhs.shape[0])])
    return gamma, _symmetrize_ij(dgamma)


def levi_civita(spec: MetricSpec, point: Sequence[float], scale: float = 1.0) -> ChristoffelData:
    mj = metric_at(spec, point, scale)
    gamma, dgamma = christoffel_from_jet(mj)
    return decompose(mj.point, gamma, dgamma)


def projective_change(data: ChristoffelData, upsilon: Sequence[float]) -> ChristoffelData:
    """``G^k_ij + U_i delta^k_j + U_j delta^k_i``; the trace-free part is kept as is."""
    u = np.asarray(upsilon, dtype=float)
    m = data.gamma_full.shape[0]
    if u.shape != (m,):
        raise GeometryError(f"upsilon must have length {m}")
    eye = np.eye(m)
    t = np.einsum("i,kj->kij", u, eye)
    gamma = data.gamma_full + (t + t.transpose(0, 2, 1))
    return ChristoffelData(
        data.point, gamma, data.trace + (m + 1) * u, data.tracefree.copy(), None
    )


# ---------------------------------------------------------------------------
# curvature


@dataclass(frozen=True)
class CurvatureData:
    riemann: np.ndarray  # R_ij^k_l as [i, j, k, l]
    ricci: np.ndarray
    scalar: float
    schouten: np.ndarray
    schouten_trace: float
    term_scale: float  # magnitude of the terms summed into Riemann


def riemann_from_christoffel(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    # half[i, j, k, l] = d_i G^k_jl + G^k_im G^m_jl; R = half - half(i<->j)
    half = np.einsum("ikjl->ijkl", dgamma) + np.einsum("kim,mjl->ijkl", gamma, gamma)
    return half - half.transpose(1, 0, 2, 3)


def curvature(spec: MetricSpec, point: Sequence[float], scale: float = 1.0) -> CurvatureData:
    return _curvature_cached(spec, tuple(float(v) for v in point), float(scale))


@functools.lru_cache(maxsize=8192)
def _curvature_cached(spec: MetricSpec, point: tuple[float, ...], scale: float = 1.0) -> CurvatureData:
    mj = metric_at(spec, point, scale)
    gamma, dgamma = christoffel_from_jet(mj)
    return _curvature(mj, gamma, dgamma)


def _curvature(mj: MetricJet, gamma, dgamma) -> CurvatureData:
    n = mj.g.shape[0] - 1
    riemann = riemann_from_christoffel(gamma, dgamma)
    ricci = np.einsum("kjkl->jl", riemann)
    scalar = float(np.trace(_solve(mj.g, ricci)))
    term_scale = float(np.max(np.abs(dgamma)) + np.max(np.abs(gamma)) ** 2)
    return CurvatureData(riemann, ricci, scalar, ricci / n, scalar / n, term_scale)


def scalar_curvature(spec: MetricSpec, point: Sequence[float]) -> float:
    return curvature(spec, point).scalar


def scalar_scale(spec: MetricSpec, point: Sequence[float]) -> float:
    """Rough size of the individual products summed into S at ``point``."""
    mj = metric_at(spec, point)
    return float(np.max(np.abs(mj.g_inv))) * curvature(spec, point).term_scale * spec.dim**2


def scalar_gradient_fd(spec: MetricSpec, point: Sequence[float], h: float) -> np.ndarray:
    """Central-difference gradient of S (third metric derivatives lie beyond the jets)."""
    p = np.asarray(point, dtype=float)
    out = np.empty(spec.dim)
    for i in range(spec.dim):
        e = np.zeros(spec.dim)
        e[i] = h
        out[i] = (scalar_curvature(spec, p + e) - scalar_curvature(spec, p - e)) / (2 * h)
    return out


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class DensityRep:
    """Chart representative of a section of E(weight); the chart volume trivializes."""

    weight: float
    rep: Callable[[Sequence[float]], float]

    def __call__(self, point: Sequence[float]) -> float:
        return self.rep(point)

    def __mul__(self, other: "DensityRep") -> "DensityRep":
        return DensityRep(self.weight + other.weight, lambda p: self.rep(p) * other.rep(p))

    def __pow__(self, c: float) -> "DensityRep":
        return DensityRep(self.weight * c, lambda p: self.rep(p) ** c)


def tau_value(spec: MetricSpec, point: Sequence[float]) -> float:
    det = metric_at(spec, point).det
    return abs(det) ** (-1.0 / (spec.n + 2))


def tau_density(spec: MetricSpec) -> DensityRep:
    """``vol(g)^(-2/(n+2))`` as a weight-2 density representative."""
    return DensityRep(2.0, lambda p: tau_value(spec, p))


def density_derivative(value: float, grad: np.ndarray, weight: float, trace: np.ndarray) -> np.ndarray:
    """Covariant derivative of a weight-``w`` representative: ``d_i f + (w/(n+2)) gamma_i f``."""
    m = grad.shape[0]
    return grad + (weight / (m + 1)) * trace * value


def metric_sign(spec: MetricSpec, point: Sequence[float]) -> float:
    return math.copysign(1.0, metric_at(spec, point).det)


def validate(spec: MetricSpec, points: Sequence[Sequence[float]]) -> None:
    """Check nondegeneracy, signature and positivity of the defining function."""
    for p in points:
        mj = metric_at(spec, p)
        sig = signature_of(mj.g)
        if sig != tuple(spec.signature):
            raise GeometryError(
                f"signature: metric at {list(p)} has signature {list(sig)}, declared {list(spec.signature)}"
            )
        if defining_value(spec, p) <= 0:
            raise GeometryError(f"defining_function: not positive at interior point {list(p)}")
