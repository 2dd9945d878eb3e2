"""One-sided boundary behaviour of fields sampled along inward rays.

A field is sampled at ``t_k = t0 * ratio**k`` along a ray entering the
interior from a boundary point.  :func:`classify_limit` then decides
whether the samples are consistent with a smooth extension (polynomial
least squares in ``t / t0``), a power-law blow-up, or a power-law zero
(log-log slope on the samples closest to the boundary).

A degree-``d`` fit certifies only finitely many derivatives; "extends"
means consistent with a smooth extension to the tested order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import MetricSpec, defining_jet, defining_value

log = logging.getLogger(__name__)

EXTENDS = "extends"
DIVERGES = "diverges"
VANISHES = "vanishes"
INCONCLUSIVE = "inconclusive"

SLOPE_THRESHOLD = 0.1
SNAP_WINDOW = 0.05
FIT_TOLERANCE = 0.05


class BoundaryError(ValueError):
    pass


class SampleError(BoundaryError):
    def __init__(self, t: float, cause: Exception):
        super().__init__(f"field evaluation failed at t={t!r}: {cause}")
        self.t = t


class ConnectionExtendsError(BoundaryError):
    """tau does not vanish at the boundary: the connection itself extends."""


class OrderError(BoundaryError):
    pass


@dataclass(frozen=True)
class RaySpec:
    boundary_point: tuple[float, ...]
    inward_direction: tuple[float, ...]
    t0: float = 0.1
    ratio: float = 0.7
    count: int = 25

    def ts(self) -> np.ndarray:
        return self.t0 * self.ratio ** np.arange(self.count)

    def point(self, t: float) -> np.ndarray:
        return np.asarray(self.boundary_point) + t * np.asarray(self.inward_direction)

    def points(self) -> list[np.ndarray]:
        return [self.point(t) for t in self.ts()]


def make_ray(
    spec: MetricSpec,
    boundary_point: Sequence[float],
    direction: Sequence[float] | None = None,
    t0: float = 0.1,
    ratio: float = 0.7,
    count: int = 25,
) -> RaySpec:
    """Ray into the interior, normalized so that ``dr(direction) = 1``.

    Without an explicit direction the Euclidean chart gradient of the
    defining function is used.
    """
    if not 0 < ratio < 1:
        raise BoundaryError(f"ratio must lie in (0, 1), got {ratio}")
    p = np.asarray(boundary_point, dtype=float)
    r = defining_jet(spec, p)
    if abs(r.value) > 1e-10:
        raise BoundaryError(f"defining function is {r.value!r} at boundary point {p.tolist()}, not 0")
    dr = r.grad
    v = dr / float(dr @ dr) if direction is None else np.asarray(direction, dtype=float)
    slope = float(dr @ v)
    if slope <= 0:
        raise BoundaryError(f"direction {v.tolist()} does not point into the interior")
    v = v / slope
    ray = RaySpec(tuple(p.tolist()), tuple(v.tolist()), t0, ratio, count)
    for t, q in zip(ray.ts(), ray.points()):
        if not defining_value(spec, q) > 0:
            raise BoundaryError(f"ray sample at t={t!r} leaves the chart interior")
    return ray


def sample_ray(fn: Callable[[np.ndarray], float], ray: RaySpec) -> list[tuple[float, float]]:
    out = []
    for t in ray.ts():
        try:
            out.append((float(t), float(fn(ray.point(t)))))
        except (ArithmeticError, ValueError) as exc:
            raise SampleError(float(t), exc) from exc
    return out


@dataclass(frozen=True)
class ExtensionVerdict:
    kind: str
    boundary_value: float = 0.0
    normal_derivative: float = 0.0
    rate: float = 0.0
    order: float = 0.0
    residual: float = 0.0
    slope: float = float("nan")
    degree: int = 4

    @property
    def bounded(self) -> bool:
        return self.kind in (EXTENDS, VANISHES)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "residual": self.residual, "degree": self.degree}
        if self.kind in (EXTENDS, VANISHES):
            d["boundary_value"] = self.boundary_value
            d["normal_derivative"] = self.normal_derivative
        if self.kind == DIVERGES:
            d["rate"] = self.rate
        if self.kind == VANISHES:
            d["order"] = self.order
        return d


def _snap(k: float) -> float:
    nearest = round(k)
    return float(nearest) if abs(k - nearest) <= SNAP_WINDOW else k


def smooth_noise(noise: Sequence[float], halfwidth: int = 2) -> np.ndarray:
    """Running maximum of per-sample noise estimates along a ray.

    Roundoff varies smoothly with ``t``; a single lucky zero estimate must
    not make a noisy sample look exact.
    """
    e = np.asarray(noise, dtype=float)
    out = e.copy()
    for k in range(1, halfwidth + 1):
        out[k:] = np.maximum(out[k:], e[:-k])
        out[:-k] = np.maximum(out[:-k], e[k:])
    return out


def loglog_slope(t: np.ndarray, f: np.ndarray) -> tuple[float, float]:
    """Slope and RMS residual of ``log|f|`` against ``log t``."""
    a = np.abs(f)
    if np.any(a == 0) or not np.all(np.isfinite(a)):
        return float("nan"), float("inf")
    x, y = np.log(t), np.log(a)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res**2)))


def classify_limit(
    samples: Sequence[tuple[float, float]],
    extend_tolerance: float = 1e-6,
    degree: int = 4,
    noise: Sequence[float] | None = None,
    scale: float | None = None,
) -> ExtensionVerdict:
    """Classify the boundary behaviour of ``f`` from ``(t, f(t))`` samples.

    ``noise`` optionally gives a roundoff estimate per sample.  If every
    sample lies inside its noise band the field is numerically zero;
    otherwise samples inside their noise band, or whose noise exceeds a
    tenth of the fit tolerance, are dropped before fitting.  If fewer than
    ``degree + 3`` samples survive, the fit degree drops to what the survivors support (at least 1); the
    verdict's ``degree`` field records the degree actually used.

    ``scale`` optionally replaces ``max |f|`` as the reference magnitude for
    the tolerances, e.g. the size of the vector a component belongs to, so
    that a component negligible against it reads as zero.
    """
    if len(samples) < degree + 3:
        raise BoundaryError(f"need at least {degree + 3} samples, got {len(samples)}")
    t = np.array([s[0] for s in samples], dtype=float)
    f = np.array([s[1] for s in samples], dtype=float)
    if not np.all(np.isfinite(f)):
        return ExtensionVerdict(INCONCLUSIVE, residual=float("inf"))
    ref = 0.0 if scale is None else float(scale)
    if ref > 0.0 and np.all(np.abs(f) <= extend_tolerance * ref):
        return ExtensionVerdict(EXTENDS, 0.0, 0.0, residual=0.0)
    if noise is not None:
        eps = np.asarray(noise, dtype=float)
        if eps.shape != f.shape:
            raise BoundaryError("noise must match the samples in length")
        resolved = np.abs(f) > eps
        if not np.any(resolved):
            return ExtensionVerdict(EXTENDS, 0.0, 0.0, residual=0.0)
        # unresolved samples carry no information; noisy ones would spoil the fit
        keep = resolved & (eps <= 0.1 * extend_tolerance * max(ref, float(np.max(np.abs(f[resolved])))))
        degree = min(degree, int(np.count_nonzero(keep)) - 3)
        if degree < 1:
            return ExtensionVerdict(INCONCLUSIVE, residual=float("inf"), degree=max(degree, 0))
        t, f = t[keep], f[keep]
    fmax = float(np.max(np.abs(f)))
    if fmax == 0.0:
        return ExtensionVerdict(EXTENDS, 0.0, 0.0, residual=0.0)

    order = np.argsort(t)
    t, f = t[order], f[order]
    tmax = float(t[-1])
    V = np.vander(t / tmax, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, f, rcond=None)
    rel = float(np.sqrt(np.mean((f - V @ coef) ** 2)) / max(fmax, ref))

    tail = max(3, len(t) // 3)
    slope, fit_res = loglog_slope(t[:tail], f[:tail])

    if rel < extend_tolerance:
        a0, a1 = float(coef[0]), float(coef[1]) / tmax
        if abs(a0) <= extend_tolerance * fmax and slope > SLOPE_THRESHOLD:
            return ExtensionVerdict(VANISHES, 0.0, a1, order=_snap(slope), residual=rel, slope=slope, degree=degree)
        return ExtensionVerdict(EXTENDS, a0, a1, residual=rel, slope=slope, degree=degree)

    if fit_res < FIT_TOLERANCE:
        if slope < -SLOPE_THRESHOLD:
            return ExtensionVerdict(DIVERGES, rate=-slope, residual=fit_res, slope=slope, degree=degree)
        if slope > SLOPE_THRESHOLD:
            return ExtensionVerdict(VANISHES, order=_snap(slope), residual=fit_res, slope=slope, degree=degree)
    return ExtensionVerdict(INCONCLUSIVE, residual=rel, slope=slope, degree=degree)


@dataclass
class DefiningDensityResult:
    is_defining: bool
    weight: float
    verdicts: list[ExtensionVerdict] = field(default_factory=list)
    derivatives: list[float] = field(default_factory=list)


def defining_density_test(
    rep: Callable[[np.ndarray], float],
    rays: Sequence[RaySpec],
    weight: float = 2.0,
    extend_tolerance: float = 1e-6,
    degree: int = 4,
) -> DefiningDensityResult:
    """A density representative is defining iff it vanishes to first order on every ray."""
    verdicts = [classify_limit(sample_ray(rep, ray), extend_tolerance, degree) for ray in rays]
    ok = bool(verdicts) and all(v.kind == VANISHES and v.order == 1.0 for v in verdicts)
    return DefiningDensityResult(ok, weight, verdicts, [abs(v.normal_derivative) for v in verdicts])


@dataclass(frozen=True)
class OrderEstimate:
    alpha: float
    k: int


def order_estimate(
    tau_rep: Callable[[np.ndarray], float],
    rays: Sequence[RaySpec],
    extend_tolerance: float = 1e-6,
    degree: int = 4,
) -> OrderEstimate:
    """Projective compactness order ``alpha = 2/k`` from the vanishing order ``k`` of tau.

    ``tau^(alpha/2)`` is the parallel weight-``alpha`` density, and it is
    defining exactly when tau vanishes to order ``k = 2/alpha``.
    """
    orders = []
    for ray in rays:
        v = classify_limit(sample_ray(tau_rep, ray), extend_tolerance, degree)
        if v.kind == EXTENDS:
            raise ConnectionExtendsError(
                f"tau extends with nonzero boundary value {v.boundary_value!r} at "
                f"{list(ray.boundary_point)}: connection extends, hypothesis 2 fails"
            )
        if v.kind != VANISHES:
            raise OrderError(f"tau is {v.kind} at {list(ray.boundary_point)}")
        if v.order != round(v.order) or v.order < 1:
            raise OrderError(f"non-integer vanishing order {v.order:.4f} at {list(ray.boundary_point)}")
        orders.append(int(round(v.order)))
    if not orders:
        raise OrderError("no rays")
    if len(set(orders)) != 1:
        raise OrderError(f"inconsistent vanishing orders across rays: {orders}")
    return OrderEstimate(2.0 / orders[0], orders[0])
