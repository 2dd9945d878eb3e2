"""Pipelines that test the compactness chain on a metric and assemble a report.

The chain, in dependency order:

1. the trace-free Christoffel part extends (projective structure extends),
2. the trace diverges (the connection itself does not extend),
3. the scalar curvature extends with a nonzero boundary value,
4. hence tau is a defining density and the metric is projectively compact
   of order 2, cross-checked directly with ``Upsilon = dr/(2r)``,
5. asymptotic form ``C dr^2/r^2 + h/r`` with ``C = -n(n+1)/(4 S)``, the
   conformal class of ``h`` on the boundary, and bounded trace-free Ricci.

Every step runs even when an earlier one fails, so negative controls are
reported in full.  Fields that cancel large terms (Christoffel parts,
Ricci combinations) are classified with roundoff estimates from
:func:`geomlab.geometry.roundoff_probe`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from . import boundary as bd
from . import expr
from . import tractor
from .expr import Binary, Expr, Unary
from .geometry import (
    MetricSpec,
    curvature,
    defining_jet,
    defining_value,
    levi_civita,
    metric_at,
    projective_change,
    roundoff_probe,
    tau_density,
    validate,
)
from .jet import Jet2, seeds

log = logging.getLogger(__name__)

DEFAULT_BOUNDARY_POINTS = 5
SCALAR_CONSTANCY = 1e-4  # relative spread allowed for "locally constant"
NONZERO_THRESHOLD = 1e-6  # relative to max(1, |S|)


class AnalysisError(ValueError):
    pass


class RouteInconsistencyError(AnalysisError):
    """The defining-density route and the direct Upsilon route disagree."""


@dataclass(frozen=True)
class AnalysisConfig:
    extend_tolerance: float = 1e-6
    degree: int = 4
    t0: float = 0.1
    ratio: float = 0.7
    count: int = 25
    boundary_points: int = DEFAULT_BOUNDARY_POINTS

    def classify(self, samples, noise=None) -> bd.ExtensionVerdict:
        return bd.classify_limit(samples, self.extend_tolerance, self.degree, noise)

    def to_dict(self) -> dict:
        return {
            "extend_tolerance": self.extend_tolerance,
            "degree": self.degree,
            "t0": self.t0,
            "ratio": self.ratio,
            "count": self.count,
            "boundary_points": self.boundary_points,
        }


# ---------------------------------------------------------------------------
# boundary samples and rays


def boundary_parameters(spec: MetricSpec, count: int = DEFAULT_BOUNDARY_POINTS) -> list[tuple[float, ...]]:
    """Explicit ``boundary_samples``, else a Halton set in the parameter box."""
    if spec.boundary_samples:
        return [tuple(s) for s in spec.boundary_samples]
    if spec.boundary_chart is None:
        raise AnalysisError("boundary_chart: required to locate boundary points")
    n = len(spec.boundary_params)
    box = spec.boundary_box or tuple((-1.0, 1.0) for _ in range(n))
    u = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return [tuple((lo + row * (hi - lo)).tolist()) for row in u]


def boundary_point(spec: MetricSpec, params: Sequence[float]) -> list[float]:
    if spec.boundary_chart is None:
        raise AnalysisError("boundary_chart: required to locate boundary points")
    env = dict(spec.param_map)
    return [float(expr.evaluate(e, list(params), env)) for e in spec.boundary_chart]


def boundary_jacobian(spec: MetricSpec, params: Sequence[float]) -> np.ndarray:
    """``J[i, a] = d x^i / d s^a`` of the boundary chart."""
    s = seeds(params)
    rows = []
    for e in spec.boundary_chart:
        v = expr.evaluate(e, s, spec.param_map)
        rows.append(v.grad if isinstance(v, Jet2) else np.zeros(len(params)))
    return np.array(rows)


def make_rays(spec: MetricSpec, cfg: AnalysisConfig, params=None) -> list[bd.RaySpec]:
    params = boundary_parameters(spec, cfg.boundary_points) if params is None else params
    return [
        bd.make_ray(spec, boundary_point(spec, s), None, cfg.t0, cfg.ratio, cfg.count)
        for s in params
    ]


# ---------------------------------------------------------------------------
# probed sampling


def _probed(
    ray: bd.RaySpec,
    fn: Callable[[np.ndarray, float], np.ndarray],
    reference: Callable[[np.ndarray], float] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Samples ``t``, values ``[k, ...]`` and smoothed noise ``[k, ...]`` along a ray."""
    ts = ray.ts()
    vals, noise = [], []
    for t in ts:
        p = ray.point(t)
        try:
            ref = reference(p) if reference else 0.0
            v, e = roundoff_probe(lambda c: fn(p, c), ref)
        except (ArithmeticError, ValueError) as exc:
            raise bd.SampleError(float(t), exc) from exc
        vals.append(v)
        noise.append(e)
    vals = np.array(vals)
    noise = np.array(noise)
    flat = noise.reshape(len(ts), -1)
    smoothed = np.stack([bd.smooth_noise(flat[:, j]) for j in range(flat.shape[1])], axis=1)
    return ts, vals, smoothed.reshape(noise.shape)


def _classify_components(cfg, ts, vals, noise, indices) -> list[tuple[tuple, bd.ExtensionVerdict]]:
    out = []
    for idx in indices:
        samples = list(zip(ts.tolist(), vals[(slice(None),) + idx].tolist()))
        out.append((idx, cfg.classify(samples, noise[(slice(None),) + idx])))
    return out


def _christoffel_scale(spec):
    return lambda p: float(np.max(np.abs(levi_civita(spec, p).gamma_full)))


def _verdict_record(idx, v: bd.ExtensionVerdict) -> dict:
    d = {"index": list(idx)}
    d.update(v.to_dict())
    return d


def _max_rate(verdicts) -> float:
    rates = [v.rate for v in verdicts if v.kind == bd.DIVERGES]
    return max(rates) if rates else 0.0


# ---------------------------------------------------------------------------
# step 1 and 2


def check_projective_extension(spec: MetricSpec, rays, cfg: AnalysisConfig = AnalysisConfig()) -> dict:
    """Do all trace-free Christoffel components extend on every ray?"""
    m = spec.dim
    indices = [(k, i, j) for k in range(m) for i in range(m) for j in range(i, m)]
    per_ray, verdicts = [], []
    for ray in rays:
        ts, vals, noise = _probed(ray, lambda p, c: levi_civita(spec, p, c).tracefree, _christoffel_scale(spec))
        res = _classify_components(cfg, ts, vals, noise, indices)
        verdicts.extend(v for _, v in res)
        per_ray.append({
            "boundary_point": list(ray.boundary_point),
            "components": [_verdict_record(idx, v) for idx, v in res],
        })
    passes = bool(verdicts) and all(v.bounded for v in verdicts)
    return {
        "passes": passes,
        "max_divergence_rate": _max_rate(verdicts),
        "inconclusive": sum(v.kind == bd.INCONCLUSIVE for v in verdicts),
        "per_ray": per_ray,
    }


def check_connection_nonextension(spec: MetricSpec, rays, cfg: AnalysisConfig = AnalysisConfig()) -> dict:
    """Does some component of the Christoffel trace diverge on some ray?"""
    m = spec.dim
    per_ray, verdicts = [], []
    for ray in rays:
        ts, vals, noise = _probed(ray, lambda p, c: levi_civita(spec, p, c).trace, _christoffel_scale(spec))
        res = _classify_components(cfg, ts, vals, noise, [(i,) for i in range(m)])
        verdicts.extend(v for _, v in res)
        per_ray.append({
            "boundary_point": list(ray.boundary_point),
            "components": [_verdict_record(idx, v) for idx, v in res],
        })
    diverges = any(v.kind == bd.DIVERGES for v in verdicts)
    return {"gamma_diverges": diverges, "rate": _max_rate(verdicts), "per_ray": per_ray}


# ---------------------------------------------------------------------------
# step 3


def _scalar_probe(spec):
    return lambda p, c: np.array([c * curvature(spec, p, c).scalar])


def scalar_boundary_value(spec: MetricSpec, rays, cfg: AnalysisConfig = AnalysisConfig()) -> dict:
    """Boundary verdicts of S, with local constancy and nonvanishing."""
    verdicts = []
    for ray in rays:
        ts, vals, noise = _probed(ray, _scalar_probe(spec))
        verdicts.append(cfg.classify(list(zip(ts.tolist(), vals[:, 0].tolist())), noise[:, 0]))
    extends = bool(verdicts) and all(v.bounded for v in verdicts)
    values = [v.boundary_value if v.bounded else float("nan") for v in verdicts]
    out = {
        "extends": extends,
        "values": values,
        "verdicts": [v.to_dict() for v in verdicts],
        "boundary_points": [list(r.boundary_point) for r in rays],
    }
    if extends:
        big = max(1.0, max(abs(x) for x in values))
        spread = max(values) - min(values)
        out["value"] = float(np.mean(values))
        out["spread"] = spread
        out["locally_constant"] = spread < SCALAR_CONSTANCY * big
        out["nonzero"] = all(abs(x) > NONZERO_THRESHOLD * big for x in values)
    else:
        out.update(value=None, spread=None, locally_constant=False, nonzero=False)
    return out


# ---------------------------------------------------------------------------
# step 4


def order_record(spec: MetricSpec, rays, cfg: AnalysisConfig = AnalysisConfig()) -> dict:
    try:
        est = bd.order_estimate(tau_density(spec), rays, cfg.extend_tolerance, cfg.degree)
    except bd.BoundaryError as exc:
        return {"alpha": None, "k": None, "error": str(exc)}
    return {"alpha": est.alpha, "k": est.k}


def direct_route(spec: MetricSpec, rays, alpha: float, cfg: AnalysisConfig = AnalysisConfig()) -> dict:
    """Does ``Gamma + Upsilon (x) delta + delta (x) Upsilon`` with ``Upsilon = dr/(alpha r)`` extend?"""
    m = spec.dim
    indices = [(k, i, j) for k in range(m) for i in range(m) for j in range(i, m)]

    def changed(p, c):
        r = defining_jet(spec, p)
        return projective_change(levi_civita(spec, p, c), r.grad / (alpha * r.value)).gamma_full

    verdicts = []
    for ray in rays:
        ts, vals, noise = _probed(ray, changed, _christoffel_scale(spec))
        verdicts.extend(v for _, v in _classify_components(cfg, ts, vals, noise, indices))
    return {
        "alpha": alpha,
        "extends": bool(verdicts) and all(v.bounded for v in verdicts),
        "max_divergence_rate": _max_rate(verdicts),
    }


def order2_verdict(
    spec: MetricSpec,
    rays,
    cfg: AnalysisConfig = AnalysisConfig(),
    extension: dict | None = None,
    connection: dict | None = None,
    scalar: dict | None = None,
    order: dict | None = None,
) -> dict:
    """Check the three hypotheses and, through two routes, the order-2 conclusion.

    Raises :class:`RouteInconsistencyError` when the defining-density route
    and the direct ``Upsilon = dr/(2r)`` route disagree.
    """
    extension = extension or check_projective_extension(spec, rays, cfg)
    connection = connection or check_connection_nonextension(spec, rays, cfg)
    scalar = scalar or scalar_boundary_value(spec, rays, cfg)
    order = order or order_record(spec, rays, cfg)
    hyps = [
        bool(extension["passes"]),
        bool(connection["gamma_diverges"]),
        bool(scalar["extends"] and scalar["nonzero"]),
    ]
    dens = bd.defining_density_test(tau_density(spec), rays, 2.0, cfg.extend_tolerance, cfg.degree)
    direct = direct_route(spec, rays, 2.0, cfg)
    density_route = hyps[0] and dens.is_defining
    record = {
        "hypotheses": hyps,
        "conclusion_order2": bool(all(hyps) and dens.is_defining and order.get("k") == 1),
        "defining_density": {
            "is_defining": dens.is_defining,
            "normal_derivatives": dens.derivatives,
        },
        "direct_route": direct,
        "route_consistent": density_route == direct["extends"],
    }
    if order.get("alpha") not in (None, 2.0):
        record["direct_route_estimated"] = direct_route(spec, rays, order["alpha"], cfg)
    if not record["route_consistent"]:
        raise RouteInconsistencyError(
            f"defining-density route says order 2 = {density_route}, "
            f"direct Upsilon route says {direct['extends']}"
        )
    return record


# ---------------------------------------------------------------------------
# step 5


def _rg_scale(spec):
    return lambda p: float(np.max(np.abs(defining_value(spec, p) * metric_at(spec, p).g)))


def _pullback_limit(spec: MetricSpec, params, ray: bd.RaySpec, cfg: AnalysisConfig):
    """Boundary limit of ``J^T (r g) J``; the ``dr dr / r`` part drops out since ``dr J = 0``."""
    J = boundary_jacobian(spec, params)
    nb = J.shape[1]
    ts, vals, noise = _probed(
        ray, lambda p, c: J.T @ (defining_value(spec, p) * metric_at(spec, p, c).g / c) @ J, _rg_scale(spec)
    )
    out = np.empty((nb, nb))
    for (a, b), v in _classify_components(cfg, ts, vals, noise, [(a, b) for a in range(nb) for b in range(a, nb)]):
        if not v.bounded:
            raise AnalysisError(f"boundary restriction of r g does not extend ({v.kind})")
        out[a, b] = out[b, a] = v.boundary_value
    return out


def _normalized(h: np.ndarray) -> np.ndarray:
    d = abs(float(np.linalg.det(h)))
    if d == 0.0:
        raise AnalysisError("boundary restriction of h is degenerate")
    return h / d ** (1.0 / h.shape[0])


def asymptotic_form(
    spec: MetricSpec,
    cfg: AnalysisConfig = AnalysisConfig(),
    scalar_boundary: float | None = None,
    params=None,
) -> dict:
    """Measure ``C``, ``h`` and the trace-free Ricci behaviour at the boundary.

    ``C`` is the limit of ``r^2 g(v, v)`` for the ray direction ``v``
    (``dr(v) = 1``), which equals ``rho^2 g_00`` in an adapted chart.
    """
    params = boundary_parameters(spec, cfg.boundary_points) if params is None else params
    rays = make_rays(spec, cfg, params)
    m, n = spec.dim, spec.n
    c_values, h_list, conf_list = [], [], []
    tf_verdicts, ric_verdicts = [], []
    for s, ray in zip(params, rays):
        ts = ray.ts()
        v = np.asarray(ray.inward_direction)
        cc = [(t, defining_value(spec, ray.point(t)) ** 2 * float(v @ metric_at(spec, ray.point(t)).g @ v)) for t in ts]
        cv = cfg.classify(cc)
        if not cv.bounded:
            raise AnalysisError(f"not in asymptotic form: r^2 g(v,v) is {cv.kind} at {list(ray.boundary_point)}")
        C = cv.boundary_value
        c_values.append(C)

        def h_at(p, c):
            r = defining_jet(spec, p)
            return r.value * metric_at(spec, p, c).g / c - C * np.outer(r.grad, r.grad) / r.value

        tsp, hv, hnoise = _probed(ray, h_at, _rg_scale(spec))
        h = np.empty((m, m))
        for (i, j), vv in _classify_components(cfg, tsp, hv, hnoise, [(i, j) for i in range(m) for j in range(i, m)]):
            h[i, j] = h[j, i] = vv.boundary_value if vv.bounded else float("nan")
        h_list.append(h.tolist())
        conf_list.append(_normalized(_pullback_limit(spec, s, ray, cfg)).tolist())

        def tf(p, c):
            cu = curvature(spec, p, c)
            return cu.ricci - cu.scalar / m * metric_at(spec, p, c).g

        tsp, vals, noise = _probed(ray, tf, lambda p: float(np.max(np.abs(curvature(spec, p).ricci))))
        idx = [(i, j) for i in range(m) for j in range(i, m)]
        tf_verdicts.extend(v for _, v in _classify_components(cfg, tsp, vals, noise, idx))
        ric = [(t, float(v @ curvature(spec, ray.point(t)).ricci @ v)) for t in ts]
        ric_verdicts.append(cfg.classify(ric))

    c_mean = float(np.mean(c_values))
    out = {
        "C_measured": c_mean,
        "C_values": c_values,
        "C_predicted": None,
        "C_relative_error": None,
        "h_boundary": h_list,
        "conformal_class_rep": conf_list,
        "tracefree_ricci_extends": all(v.bounded for v in tf_verdicts),
    }
    big = max(1.0, abs(scalar_boundary or 0.0))
    out["tracefree_ricci_nonzero"] = any(
        v.bounded and abs(v.boundary_value) > NONZERO_THRESHOLD * big for v in tf_verdicts
    )
    out["ricci_diverges"] = all(v.kind == bd.DIVERGES for v in ric_verdicts)
    out["ricci_rate"] = _max_rate(ric_verdicts)
    if scalar_boundary:
        pred = -n * (n + 1) / (4.0 * scalar_boundary)
        out["C_predicted"] = pred
        out["C_relative_error"] = abs(c_mean - pred) / abs(pred)
    return out


def rescaled(spec: MetricSpec, u: Expr | str) -> MetricSpec:
    """The same metric with defining function ``exp(u) r``."""
    if isinstance(u, str):
        u = expr.parse(u, spec.coords, tuple(spec.param_map))
    r = Binary("mul", Unary("exp", u), spec.defining_function)
    return spec.with_defining_function(r)


def conformal_class_invariance(
    spec: MetricSpec, u: Expr | str, cfg: AnalysisConfig = AnalysisConfig(), params=None
) -> dict:
    """Rescale the defining function by ``e^u`` and compare boundary restrictions.

    The restriction of ``h`` to the boundary must scale by ``e^u``.  The
    deviation is the largest relative gap between a componentwise ratio
    and ``e^u`` at the same boundary point.
    """
    if isinstance(u, str):
        u = expr.parse(u, spec.coords, tuple(spec.param_map))
    params = boundary_parameters(spec, cfg.boundary_points) if params is None else params
    other = rescaled(spec, u)
    rays = make_rays(spec, cfg, params)
    rays2 = make_rays(other, cfg, params)
    points, deviation = [], 0.0
    for s, ray, ray2 in zip(params, rays, rays2):
        a = _pullback_limit(spec, s, ray, cfg)
        b = _pullback_limit(other, s, ray2, cfg)
        factor = math.exp(expr.evaluate(u, list(ray.boundary_point), spec.param_map))
        mask = np.abs(a) > 1e-8 * np.max(np.abs(a))
        ratios = b[mask] / a[mask]
        dev = float(np.max(np.abs(ratios / factor - 1.0)))
        deviation = max(deviation, dev)
        points.append({
            "boundary_point": list(ray.boundary_point),
            "expected_ratio": factor,
            "ratios": ratios.tolist(),
            "deviation": dev,
        })
    return {"max_deviation": deviation, "points": points}


# ---------------------------------------------------------------------------
# tractor checks and the full report


def tractor_checks(spec: MetricSpec, rays, scalar: dict, extension: dict, cfg: AnalysisConfig) -> dict:
    det_res, inv_res, inv_rel = 0.0, 0.0, 0.0
    for ray in rays:
        for p in ray.points():
            L = tractor.build_L(spec, p)
            det_res = max(det_res, tractor.tractor_det(L, spec, p).residual)
            try:
                phi = tractor.build_Phi(spec, p)
            except tractor.DegenerateTractorError:
                continue
            inv_res = max(inv_res, tractor.inverse_check(L, phi))
            inv_rel = max(inv_rel, tractor.inverse_check(L, phi, relative=True))
    out = {
        "det_identity_residual": det_res,
        "inverse_residual": inv_res,
        "inverse_residual_relative": inv_rel,
        "phi_middle_residual": None,
    }
    if extension.get("passes") and scalar.get("extends") and scalar.get("nonzero"):
        res = tractor.phi_middle_slot_check(spec, rays, cfg.extend_tolerance, cfg.degree)
        out["phi_middle_residual"] = max(r.max_residual for r in res)
    else:
        out["phi_middle_skipped"] = "needs an extending projective structure and nonzero boundary S"
    return out


@dataclass
class AnalysisReport:
    name: str
    dimension: int
    config: dict
    boundary_points: list
    sections: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def get(self, path: str):
        """Look up a dotted path such as ``order.k``; ``None`` if absent."""
        node = self.sections
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                return None
            node = node[part]
        return node

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dimension,
            "config": self.config,
            "boundary_points": self.boundary_points,
            **self.sections,
            "errors": self.errors,
        }


SECTIONS = (
    "extension_test",
    "connection_nonextension",
    "scalar_boundary",
    "order",
    "main_theorem",
    "asymptotics",
    "tractor_checks",
)


def full_report(spec: MetricSpec, cfg: AnalysisConfig = AnalysisConfig(), sections=SECTIONS) -> AnalysisReport:
    """Run the requested pipelines in dependency order.

    Setup failures (no boundary points, rays leaving the chart, a metric
    that fails validation) raise; failures inside a pipeline are recorded
    under ``errors`` and the remaining pipelines still run.
    """
    params = boundary_parameters(spec, cfg.boundary_points)
    rays = make_rays(spec, cfg, params)
    validate(spec, [p for r in rays for p in r.points()])
    rep = AnalysisReport(spec.name, spec.dim, cfg.to_dict(), [list(r.boundary_point) for r in rays])

    def run(key, fn):
        try:
            rep.sections[key] = fn()
        except (ArithmeticError, ValueError) as exc:
            log.info("%s failed: %s", key, exc)
            rep.errors[key] = f"{type(exc).__name__}: {exc}"
            rep.sections[key] = None
        return rep.sections[key]

    ext = run("extension_test", lambda: check_projective_extension(spec, rays, cfg)) if "extension_test" in sections else None
    conn = run("connection_nonextension", lambda: check_connection_nonextension(spec, rays, cfg)) if "connection_nonextension" in sections else None
    scal = run("scalar_boundary", lambda: scalar_boundary_value(spec, rays, cfg)) if "scalar_boundary" in sections else None
    order = run("order", lambda: order_record(spec, rays, cfg)) if "order" in sections else None
    if "main_theorem" in sections and ext and conn and scal and order:
        run("main_theorem", lambda: order2_verdict(spec, rays, cfg, ext, conn, scal, order))
    if "asymptotics" in sections:
        s_b = scal.get("value") if scal and scal.get("nonzero") else None
        asym = run("asymptotics", lambda: asymptotic_form(spec, cfg, s_b, params))
        mt = rep.sections.get("main_theorem")
        if asym is not None:
            asym["mode"] = "checked" if mt and mt["conclusion_order2"] else "diagnostic"
    if "tractor_checks" in sections and ext and scal:
        run("tractor_checks", lambda: tractor_checks(spec, rays, scal, ext, cfg))
    return rep
