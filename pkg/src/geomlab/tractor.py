"""Slot algebra for the symmetric tractor bundles of a metric's projective class.

A section of ``S^2 T`` is stored as ``(top, middle, bottom)`` with the
projecting slot on top; its dual ``S^2 T*`` as ``(sigma, mu, psi)``.  All
slots are chart representatives of weighted tensors, so pairing a section
with a dual section multiplies representatives directly (the weights
``-2`` and ``+2`` cancel).

Only the algebra consumed by the boundary argument is implemented: the
canonical lift ``L`` of ``tau^-1 g^ij``, its inverse ``Phi``, their
determinants, and the change of splitting for ``Phi``.  Tractor
connections are not implemented as differential operators.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import boundary as bd
from .geometry import (
    MetricSpec,
    curvature,
    levi_civita,
    metric_at,
    roundoff_probe,
)

LEVI_CIVITA = "levi-civita"

# (s1, s2, s3) in mu^ = mu + s1 U sigma, psi^ = psi + s2 (U mu + mu U) + s3 U U sigma.
# Determinant invariance leaves (1, 1, 1) and (-1, -1, 1); the boundary
# relation mu~ = (1/2) d sigma~ selects s1 = +1.
SIGNS = (1, 1, 1)


class TractorError(ValueError):
    pass


class DegenerateTractorError(TractorError):
    """The lift of the metric is degenerate (``S = 0``): no inverse exists."""


@dataclass(frozen=True)
class TractorS2:
    top: np.ndarray  # symmetric m x m
    middle: np.ndarray  # length m
    bottom: float
    splitting_tag: str = LEVI_CIVITA

    def __post_init__(self):
        top = np.asarray(self.top, dtype=float)
        object.__setattr__(self, "top", 0.5 * (top + top.T))
        object.__setattr__(self, "middle", np.asarray(self.middle, dtype=float))
        object.__setattr__(self, "bottom", float(self.bottom))


@dataclass(frozen=True)
class TractorS2Dual:
    top: float  # sigma
    middle: np.ndarray  # mu_i
    bottom: np.ndarray  # psi_ij, symmetric
    splitting_tag: str = LEVI_CIVITA

    def __post_init__(self):
        psi = np.asarray(self.bottom, dtype=float)
        object.__setattr__(self, "top", float(self.top))
        object.__setattr__(self, "middle", np.asarray(self.middle, dtype=float))
        object.__setattr__(self, "bottom", 0.5 * (psi + psi.T))

    @property
    def sigma(self) -> float:
        return self.top

    @property
    def mu(self) -> np.ndarray:
        return self.middle

    @property
    def psi(self) -> np.ndarray:
        return self.bottom


def build_L(spec: MetricSpec, point: Sequence[float], scale: float = 1.0) -> TractorS2:
    """``L(tau^-1 g^ij)`` in the Levi-Civita splitting.

    The bottom slot is ``tau^-1 g^ij P_ij / (n+1) = tau^-1 S / (n (n+1))``.
    """
    mj = metric_at(spec, point, scale)
    n = spec.n
    tau = abs(mj.det) ** (-1.0 / (n + 2))
    s = curvature(spec, point, scale).scalar
    return TractorS2(mj.g_inv / tau, np.zeros(spec.dim), s / (tau * n * (n + 1)))


def assemble(t: TractorS2 | TractorS2Dual) -> np.ndarray:
    """Bilinear-form matrix of a section; the projecting slot sits in the corner.

    ``TractorS2`` gives ``[[top, middle], [middle^T, bottom]]``; a dual
    section gives ``[[psi, mu], [mu^T, sigma]]`` so that the two matrices
    multiply to the pairing in the same basis.
    """
    if isinstance(t, TractorS2Dual):
        block, corner = t.bottom, t.top
    else:
        block, corner = t.top, t.bottom
    m = block.shape[0]
    out = np.empty((m + 1, m + 1))
    out[:m, :m] = block
    out[:m, m] = out[m, :m] = t.middle
    out[m, m] = corner
    return out


@dataclass(frozen=True)
class DetCheck:
    det: float
    predicted: float
    scalar: float

    @property
    def residual(self) -> float:
        return abs(self.det - self.predicted) / max(1.0, abs(self.scalar))


def tractor_det(t: TractorS2, spec: MetricSpec, point: Sequence[float]) -> DetCheck:
    """Determinant of ``assemble(t)`` against ``sgn(det g) S / (n (n+1))``."""
    mj = metric_at(spec, point)
    s = curvature(spec, point).scalar
    n = spec.n
    predicted = float(np.sign(mj.det)) * s / (n * (n + 1))
    return DetCheck(float(np.linalg.det(assemble(t))), predicted, s)


def build_Phi(spec: MetricSpec, point: Sequence[float], scale: float = 1.0) -> TractorS2Dual:
    """Inverse of ``L`` as a section of ``S^2 T*``: ``(n(n+1) tau/S, 0, tau g_ij)``."""
    mj = metric_at(spec, point, scale)
    n = spec.n
    s = curvature(spec, point, scale).scalar
    if s == 0.0:
        raise DegenerateTractorError(
            f"scalar curvature vanishes at {list(point)}: L is degenerate and has no inverse"
        )
    tau = abs(mj.det) ** (-1.0 / (n + 2))
    return TractorS2Dual(n * (n + 1) * tau / s, np.zeros(spec.dim), tau * mj.g)


def inverse_check(L: TractorS2, Phi: TractorS2Dual, relative: bool = False) -> float:
    """Max-abs entry of ``Phi L - I`` in the dual pairing.

    With ``relative`` each entry is divided by the matching entry of
    ``|Phi| |L|``, which removes the ``eps * cond(g)`` rounding floor of the
    product itself near the boundary.
    """
    if L.splitting_tag != Phi.splitting_tag:
        raise TractorError(f"splittings differ: {L.splitting_tag!r} vs {Phi.splitting_tag!r}")
    a, b = assemble(Phi), assemble(L)
    res = np.abs(a @ b - np.eye(a.shape[0]))
    if relative:
        res = res / np.maximum(np.abs(a) @ np.abs(b), np.finfo(float).tiny)
    return float(np.max(res))


def change_splitting(
    t: TractorS2Dual,
    upsilon: Sequence[float],
    signs: tuple[int, int, int] = SIGNS,
    tag: str | None = None,
) -> TractorS2Dual:
    """Re-express a dual section in the splitting of ``nabla + Upsilon``.

    ``sigma`` is the projecting slot and never changes.
    """
    u = np.asarray(upsilon, dtype=float)
    if u.shape != t.middle.shape:
        raise TractorError(f"upsilon must have length {t.middle.shape[0]}")
    s1, s2, s3 = signs
    mu = t.middle + s1 * u * t.top
    cross = np.outer(u, t.middle)
    psi = t.bottom + s2 * (cross + cross.T) + s3 * np.outer(u, u) * t.top
    return TractorS2Dual(t.top, mu, psi, tag or f"{t.splitting_tag}+upsilon")


def sigma_rep(spec: MetricSpec, point: Sequence[float], scale: float = 1.0) -> float:
    """``n(n+1) tau / S``, normalized to be invariant under ``g -> scale g``."""
    n = spec.n
    s = curvature(spec, point, scale).scalar
    mj = metric_at(spec, point, scale)
    tau = abs(mj.det) ** (-1.0 / (n + 2))
    return n * (n + 1) * tau / s * scale ** (-1.0 / (n + 2))


def _middle_tilde(spec: MetricSpec, point, scale: float = 1.0) -> np.ndarray:
    """Middle slot of ``Phi`` in the splitting of the trace-free connection."""
    n = spec.n
    phi = build_Phi(spec, point, scale)
    gamma = levi_civita(spec, point, scale).trace
    moved = change_splitting(phi, -gamma / (n + 2), tag="trace-free")
    return moved.middle * scale ** (-1.0 / (n + 2))


def _sigma_gradient_fd(spec: MetricSpec, point, step: float, scale: float = 1.0) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    out = np.empty(spec.dim)
    for i in range(spec.dim):
        e = np.zeros(spec.dim)
        e[i] = step
        out[i] = (sigma_rep(spec, p + e, scale) - sigma_rep(spec, p - e, scale)) / (2 * step)
    return out


@dataclass
class MiddleSlotResult:
    boundary_point: list[float]
    mu_boundary: list[float]
    half_dsigma_boundary: list[float]
    residual: list[float]  # per component
    verdict_kinds: list[str]

    @property
    def max_residual(self) -> float:
        return max(self.residual) if self.residual else float("nan")


FD_STEP = 0.01  # finite-difference step as a fraction of the ray parameter


def phi_middle_slot_check(
    spec: MetricSpec,
    rays: Sequence[bd.RaySpec],
    extend_tolerance: float = 1e-6,
    degree: int = 4,
) -> list[MiddleSlotResult]:
    """Compare the boundary limits of ``mu~_i`` and ``(1/2) d_i sigma~``.

    ``mu~`` is the middle slot of ``Phi`` moved to the splitting of the
    connection with vanishing trace (``Upsilon = -gamma/(n+2)``).  The
    gradient of ``sigma~`` is a central difference of the plain
    representative, independent of the Christoffel route used for ``mu~``.
    """
    results = []
    for ray in rays:
        ts = ray.ts()
        pts = ray.points()
        scalar = [curvature(spec, p).scalar for p in pts]
        s_verdict = bd.classify_limit(list(zip(ts, scalar)), 1e-4, degree)
        if not s_verdict.bounded or abs(s_verdict.boundary_value) < 1e-6:
            raise DegenerateTractorError(
                f"scalar curvature does not extend to a nonzero value at {list(ray.boundary_point)}"
            )
        mus, halves = [], []
        for t, p in zip(ts, pts):
            mus.append(roundoff_probe(lambda c: _middle_tilde(spec, p, c)))
            halves.append(roundoff_probe(lambda c: 0.5 * _sigma_gradient_fd(spec, p, FD_STEP * t, c)))
        # components negligible against the whole covector count as zero
        scale = max(float(np.max(np.abs(x[0]))) for x in mus)
        mu_b, half_b, res, kinds = [], [], [], []
        for i in range(spec.dim):
            vm = bd.classify_limit(
                list(zip(ts, [x[0][i] for x in mus])),
                extend_tolerance, degree, bd.smooth_noise([x[1][i] for x in mus]), scale,
            )
            vh = bd.classify_limit(
                list(zip(ts, [x[0][i] for x in halves])),
                extend_tolerance, degree, bd.smooth_noise([x[1][i] for x in halves]), scale,
            )
            kinds.append(f"{vm.kind}/{vh.kind}")
            a = vm.boundary_value if vm.bounded else float("nan")
            b = vh.boundary_value if vh.bounded else float("nan")
            mu_b.append(a)
            half_b.append(b)
            res.append(abs(a - b) if vm.bounded and vh.bounded else float("inf"))
        results.append(MiddleSlotResult(list(ray.boundary_point), mu_b, half_b, res, kinds))
    return results
