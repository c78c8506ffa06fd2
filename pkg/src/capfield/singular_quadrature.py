"""Quadrature for inverse-square-root endpoint singularities and the two
Abel-type stages that turn an external field into an equilibrium density.

All singular integrals here have the form

    integral of smooth(t) / sqrt(|cos(e) - cos(t)|) dt

with the singularity at one endpoint e.  The substitution s^2 = |cos(e) -
cos(t)| removes it exactly: the transformed integrand 2*smooth(t(s))/sin(t(s))
is bounded whenever smooth is, so ordinary adaptive quadrature converges at
full order.  Differentiated quantities are never obtained by differencing
singular integrals; each stage is rewritten so the singular factor comes out
analytically and only a smooth auxiliary function is differentiated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from ._numerics import gauss_legendre, richardson_derivative
from .fields import ExternalField, ReflectedField
from .geometry import Orientation, SphericalCap, _validated_angle

PI = math.pi

# Gauss-Legendre sizes for the two smooth auxiliary integrals.  Fixed nodes
# keep repeated evaluations correlated, so finite differences of the
# auxiliary functions retain full relative accuracy.
_N_FIRST_STAGE = 96
_N_SECOND_STAGE = 96

# base finite-difference steps for the auxiliary functions, chosen to
# balance O(step^4) truncation against rounding amplification
_STEP_FIRST_STAGE = 2.5e-3
_STEP_SECOND_STAGE_REL = 1.5e-3

RIM_GUARD = 1e-9


class NonconvergenceError(RuntimeError):
    """Quadrature or iteration failed to meet its tolerance.

    Carries the best available estimate and an error bound so callers can
    decide whether the result is still usable.
    """

    def __init__(self, message: str, estimate: float, error_bound: float) -> None:
        super().__init__(f"{message} (estimate={estimate!r}, bound={error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound


class Endpoint(enum.Enum):
    LOWER = "lower"
    UPPER = "upper"


@dataclass(frozen=True)
class SingularIntegrand:
    """smooth_part(t) / sqrt(|cos(endpoint) - cos(t)|) on [lo, hi].

    The singular factor must vanish only at the flagged endpoint, which
    holds automatically since cos is strictly decreasing on [0, pi].
    """

    smooth_part: Callable[[float], float]
    lo: float
    hi: float
    singular_end: Endpoint

    def __post_init__(self) -> None:
        a = _validated_angle(self.lo, name="integration endpoint")
        b = _validated_angle(self.hi, name="integration endpoint")
        if not a < b:
            raise ValueError(f"need lo < hi, got [{self.lo!r}, {self.hi!r}]")
        object.__setattr__(self, "lo", a)
        object.__setattr__(self, "hi", b)


def desingularized(integrand: SingularIntegrand) -> tuple[Callable[[float], float], float]:
    """Transformed bounded integrand psi and its upper limit smax.

    integrate psi over [0, smax] to get the original integral.
    """
    lo, hi = integrand.lo, integrand.hi
    smooth = integrand.smooth_part
    # cos(lo) - cos(hi), written to stay accurate for nearby endpoints
    span = 2.0 * math.sin(0.5 * (hi + lo)) * math.sin(0.5 * (hi - lo))
    smax = math.sqrt(span)
    if integrand.singular_end is Endpoint.LOWER:
        base, sign = math.cos(lo), -1.0
    else:
        base, sign = math.cos(hi), 1.0

    def psi(s: float) -> float:
        u = base + sign * s * s
        u = min(1.0, max(-1.0, u))
        sint = math.sqrt(max((1.0 - u) * (1.0 + u), 0.0))
        return 2.0 * smooth(math.acos(u)) / sint

    return psi, smax


def integrate_sqrt_singular(integrand: SingularIntegrand, tol: float = 1e-10) -> float:
    """Integral of a SingularIntegrand with absolute accuracy tol."""
    psi, smax = desingularized(integrand)
    value, abserr, info = quad(
        psi, 0.0, smax, epsabs=0.1 * tol, epsrel=1e-12, limit=200, full_output=True
    )[:3]
    ok = isinstance(info, dict)
    if not ok or abserr > tol or not math.isfinite(value):
        raise NonconvergenceError(
            "singular quadrature did not reach the requested tolerance",
            float(value),
            float(abserr),
        )
    return float(value)


# row block size for the auxiliary integrals; bounds peak memory at a few MB
_CHUNK = 8192


def _first_stage_integral(field: ExternalField, c: np.ndarray) -> np.ndarray:
    """H(c) = integral over v in [0,1] of Qhat(c*(1-v^2) - v^2).

    The field's first-stage half-integral is 2*sqrt(1+c)*H(c); H itself is
    smooth in c, so it is safe to difference.
    """
    v, w = gauss_legendre(_N_FIRST_STAGE)
    vv = 0.5 * (v + 1.0)
    ww = 0.5 * w
    one_minus_v2 = 1.0 - vv * vv
    out = np.empty(c.shape, dtype=float)
    for start in range(0, c.size, _CHUNK):
        block = c[start : start + _CHUNK]
        args = block[:, None] * one_minus_v2[None, :] - (vv * vv)[None, :]
        np.clip(args, -1.0, 1.0, out=args)
        q = np.asarray(field.value_at_x3(args.ravel()), dtype=float).reshape(args.shape)
        out[start : start + _CHUNK] = q @ ww
    return out


def _g_south_vec(field: ExternalField, t: np.ndarray) -> np.ndarray:
    """First Abel stage for a south cap, vectorized over t in [0, pi]."""
    t = np.asarray(t, dtype=float)
    c = np.cos(t)
    h = _first_stage_integral(field, c)
    hp = richardson_derivative(
        lambda cc: _first_stage_integral(field, cc), c, -1.0, 1.0, _STEP_FIRST_STAGE
    )
    # d/dt of 2*sqrt(1+c)*H(c) with dc/dt = -sin(t), all sqrt(1+c) factors
    # cancelled analytically against sin(t)
    return -(np.sqrt(1.0 - c) * (h + 2.0 * (1.0 + c) * hp)) / (4.0 * PI)


def abel_stage_g(field: ExternalField, t: float, cap: SphericalCap) -> float:
    """First Abel stage of the field on a cap, at a point strictly inside it.

    On a south cap this is the derivative of the half-line integral of Q
    taken from t to pi against the inverse-square-root kernel; the north
    version is its mirror image.  Computed from a smooth auxiliary integral
    so no singular difference quotient ever forms.
    """
    tt = _validated_angle(t, name="evaluation angle")
    lo, hi = cap.angular_interval()
    if not lo < tt < hi:
        raise ValueError(f"evaluation angle {t!r} not strictly inside the cap")
    if cap.orientation is Orientation.SOUTH_CENTERED:
        return float(_g_south_vec(field, np.array([tt]))[0])
    reflected = ReflectedField(field)
    return float(-_g_south_vec(reflected, np.array([PI - tt]))[0])


def _second_stage_integral(
    gvec: Callable[[np.ndarray], np.ndarray], m: np.ndarray, alpha: float
) -> np.ndarray:
    """G(m) = integral over y in [0,1] of g(acos(cos(alpha) - m*(1-y^2))).

    m = cos(alpha) - cos(phi) is the depth into the cap; the second-stage
    half-integral is 2*sqrt(m)*G(m).
    """
    m = np.asarray(m, dtype=float)
    y, w = gauss_legendre(_N_SECOND_STAGE)
    yy = 0.5 * (y + 1.0)
    ww = 0.5 * w
    one_minus_y2 = 1.0 - yy * yy
    out = np.empty(m.shape, dtype=float)
    for start in range(0, m.size, _CHUNK):
        block = m[start : start + _CHUNK]
        u = math.cos(alpha) - block[:, None] * one_minus_y2[None, :]
        np.clip(u, -1.0, 1.0, out=u)
        g = np.asarray(gvec(np.arccos(u).ravel()), dtype=float).reshape(u.shape)
        out[start : start + _CHUNK] = g @ ww
    return out


def _depth(phi: np.ndarray, alpha: float) -> np.ndarray:
    """cos(alpha) - cos(phi), accurate near the rim."""
    return 2.0 * np.sin(0.5 * (phi + alpha)) * np.sin(0.5 * (phi - alpha))


def _stage_F_south_vec(
    gvec: Callable[[np.ndarray], np.ndarray], phi: np.ndarray, alpha: float
) -> np.ndarray:
    """Second Abel stage on a south cap, vectorized over phi in (alpha, pi]."""
    phi = np.asarray(phi, dtype=float)
    m_max = 2.0 * math.cos(0.5 * alpha) ** 2
    # rounding in phi can push the pole depth an ulp past its true maximum
    m = np.minimum(_depth(phi, alpha), m_max)
    step = _STEP_SECOND_STAGE_REL * m_max
    gm = _second_stage_integral(gvec, m, alpha)
    gp = richardson_derivative(
        lambda mm: _second_stage_integral(gvec, mm, alpha), m, 0.0, m_max, step
    )
    # (2/pi) * d/dm of 2*sqrt(m)*G(m); the 1/sin(phi) prefactor of the
    # original phi-derivative cancels against dm/dphi = sin(phi)
    return (2.0 * gm / np.sqrt(m) + 4.0 * np.sqrt(m) * gp) / PI


def _as_vectorized(g: Callable[[float], float]) -> Callable[[np.ndarray], np.ndarray]:
    def gvec(t: np.ndarray) -> np.ndarray:
        return np.array([g(float(ti)) for ti in np.asarray(t, dtype=float).ravel()])

    return gvec


def abel_stage_F(
    g: Callable[[float], float], phi: float, cap: SphericalCap
) -> float:
    """Second Abel stage: inhomogeneous density contribution at phi.

    `g` is the first-stage profile as a scalar callable on the cap's
    angular interval.  phi must stay clear of the cap rim by more than the
    guard band, since the result behaves like 1/sqrt(distance to rim) there
    and the caller is expected to use the analytic edge factor instead.
    """
    pp = _validated_angle(phi, name="evaluation angle")
    alpha = cap.alpha
    if cap.orientation is Orientation.SOUTH_CENTERED:
        if pp <= alpha + RIM_GUARD:
            raise ValueError(
                f"evaluation angle {phi!r} within the rim guard band of {alpha!r}"
            )
        return float(_stage_F_south_vec(_as_vectorized(g), np.array([pp]), alpha)[0])
    if pp >= alpha - RIM_GUARD:
        raise ValueError(
            f"evaluation angle {phi!r} within the rim guard band of {alpha!r}"
        )

    def g_reflected(t: float) -> float:
        return g(PI - t)

    return float(
        -_stage_F_south_vec(
            _as_vectorized(g_reflected), np.array([PI - pp]), PI - alpha
        )[0]
    )
