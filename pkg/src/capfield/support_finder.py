"""Support determination: cap rim angles, F-functional values, critical heights.

For an admissible axially symmetric field the equilibrium support is a
south-centered cap whose rim angle solves a transcendental equation; the
same angle minimizes the F-functional over cap families.  Both routes are
implemented so they can cross-check each other.  When the support equation
has no root in (0, pi) the support is the whole sphere.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .fields import (
    ExternalField,
    PointChargeField,
    QuadraticField,
)
from .geometry import _validated_angle

PI = math.pi

# rim angles this close to 0 are reported as a full-sphere support; the
# distinction below this scale is numerically meaningless
_FULL_SPHERE_CUTOFF = 1e-6


class SupportMethod(enum.Enum):
    TRANSCENDENTAL_ROOT = "TranscendentalRoot"
    FFUNCTIONAL_MIN = "FFunctionalMin"
    FULL_SPHERE = "FullSphere"


@dataclass(frozen=True)
class SupportSolution:
    """Support rim angle with the Robin constant of the resulting problem.

    residual is the value of the solved equation at alpha0 (root methods)
    or the final bracket width (minimization); iterations counts solver
    steps.  alpha0 == 0 exactly when method is FULL_SPHERE.
    """

    alpha0: float
    robin_constant: float
    method: SupportMethod
    residual: float
    iterations: int


@dataclass(frozen=True)
class GoncharHeights:
    """Critical charge heights for unit-charge support transitions.

    A charge q at height h > 1 outside the sphere leaves a proper cap
    support exactly when h < h_plus; a charge inside (h < 1) does so
    exactly when h > h_minus.
    """

    q: float
    h_plus: float
    h_minus: float


def gonchar_heights(q: float) -> GoncharHeights:
    """Critical heights for the point charge of strength q."""
    if not (q > 0.0 and math.isfinite(q)):
        raise ValueError(f"charge must be positive, got q={q!r}")

    # outside: h_plus is the unique root in (1, inf) of
    # h^3 - 2h^2 + (1 - 3q)h + q
    def cubic(h: float) -> float:
        return ((h - 2.0) * h + (1.0 - 3.0 * q)) * h + q

    hi = 3.0 + 3.0 * q
    while cubic(hi) <= 0.0:
        hi *= 2.0
    h_plus = brentq(cubic, 1.0, hi, xtol=1e-15, rtol=8.9e-16)

    # inside: smaller root of (1+q)h^2 - (2+3q)h + 1, which lies in (0, 1)
    disc = math.sqrt(q * (9.0 * q + 8.0))
    h_minus = ((2.0 + 3.0 * q) - disc) / (2.0 * (1.0 + q))

    return GoncharHeights(q=q, h_plus=float(h_plus), h_minus=float(h_minus))


def _surface_factor(alpha: float) -> float:
    # pi over the cap capacity normalizer
    return PI / (PI - alpha + math.sin(alpha))


def ffunctional_pointcharge(q: float, h: float, alpha: float) -> float:
    """F-functional of the south cap with rim alpha under a point charge.

    Valid for any h > 0 including h = 1 as long as alpha > 0; at alpha = 0
    the h = 1 value is the two-sided limit.
    """
    if not (q > 0.0 and h > 0.0):
        raise ValueError("need q > 0 and h > 0")
    a = _validated_angle(alpha, name="rim angle")
    if a >= PI:
        raise ValueError("rim angle must be below pi")
    if a == 0.0:
        if h > 1.0:
            return 1.0 + q / h
        if h < 1.0:
            return 1.0 + q
        return 1.0 + q
    t = math.atan((1.0 / math.tan(0.5 * a)) * (h - 1.0) / (h + 1.0))
    inner = (
        1.0
        + q * (h + 1.0) / (2.0 * h) * (1.0 - a / PI)
        - q * (h - 1.0) / (PI * h) * t
    )
    return _surface_factor(a) * inner


def ffunctional_quadratic(a: float, b: float, c: float, alpha: float) -> float:
    """F-functional of the south cap with rim alpha under the quadratic field."""
    QuadraticField(a, b, c)  # coefficient admissibility
    al = _validated_angle(alpha, name="rim angle")
    if al >= PI:
        raise ValueError("rim angle must be below pi")
    ca = math.cos(al)
    bracket = (
        math.tan(0.5 * al)
        * (
            32.0 * a * ca**3
            + 4.0 * (2.0 * a + 9.0 * b) * ca**2
            + 4.0 * (9.0 * c - 5.0 * a) * ca
            + 4.0 * a
            - 36.0 * b
            + 36.0 * c
        )
        + 12.0 * (a + 3.0 * c) * (PI - al)
        + 36.0 * PI
    )
    return bracket / (36.0 * (PI - al + math.sin(al)))


def ffunctional_numeric(field: ExternalField, alpha: float, tol: float = 1e-10) -> float:
    """F-functional of the south cap with rim alpha by direct quadrature.

    The two edge-weighted field integrals are evaluated in the variable
    s = sqrt(cos(alpha) - cos(phi)), which absorbs the rim singularity of
    the weight; all three integrands are then bounded.
    """
    a = _validated_angle(alpha, name="rim angle")
    if a >= PI:
        raise ValueError("rim angle must be below pi")
    ca = math.cos(a)
    r1 = 1.0 - ca
    smax = math.sqrt(1.0 + ca)

    def qhat(x: float) -> float:
        return float(field.value_at_x3(min(1.0, max(-1.0, x))))

    # plain field mass over the cap, in x3
    i1 = quad(qhat, -1.0, ca, epsabs=0.1 * tol, epsrel=1e-12, limit=200)[0]

    if r1 == 0.0:
        return 0.5 * _surface_factor(a) * (2.0 + i1)

    sq_r1 = math.sqrt(r1)

    def w2(s: float) -> float:
        return 2.0 * sq_r1 * qhat(ca - s * s)

    def w3(s: float) -> float:
        return 2.0 * s * math.atan(sq_r1 / s) * qhat(ca - s * s) if s > 0.0 else 0.0

    i2 = quad(w2, 0.0, smax, epsabs=0.1 * tol, epsrel=1e-12, limit=200)[0]
    i3 = quad(w3, 0.0, smax, epsabs=0.1 * tol, epsrel=1e-12, limit=200)[0]

    return 0.5 * _surface_factor(a) * (2.0 + i1 + (2.0 / PI) * (i2 - i3))


def _ffunctional_evaluator(field: ExternalField):
    if isinstance(field, PointChargeField):
        return lambda a: ffunctional_pointcharge(field.q, field.h, a)
    if isinstance(field, QuadraticField):
        return lambda a: ffunctional_quadratic(field.a, field.b, field.c, a)
    return lambda a: ffunctional_numeric(field, a)


def minimize_ffunctional(
    field: ExternalField,
    lo: float = 0.0,
    hi: float = PI - 1e-6,
    xtol: float = 1e-8,
) -> SupportSolution:
    """Rim angle minimizing the F-functional, by golden-section search.

    The functional is unimodal on [0, pi) for admissible fields; a minimum
    pinned to the left edge means the support is the whole sphere.
    """
    f = _ffunctional_evaluator(field)
    invphi = 0.5 * (math.sqrt(5.0) - 1.0)
    a, b = float(lo), float(hi)
    if not 0.0 <= a < b < PI:
        raise ValueError("need 0 <= lo < hi < pi")

    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    iterations = 0
    while b - a > xtol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        iterations += 1

    alpha0 = 0.5 * (a + b)
    width = b - a
    # boundary minimum: near the left edge the functional is cubically
    # flat, so the iterate can stall on a rounding plateau well away from
    # zero; compare function values rather than trusting the iterate
    f_edge = f(lo)
    f_star = f(alpha0)
    at_boundary = alpha0 <= _FULL_SPHERE_CUTOFF or (
        lo == 0.0 and f_edge <= f_star + 1e-12 * max(1.0, abs(f_edge))
    )
    if at_boundary:
        return SupportSolution(
            alpha0=0.0,
            robin_constant=f_edge,
            method=SupportMethod.FULL_SPHERE,
            residual=width,
            iterations=iterations,
        )
    return SupportSolution(
        alpha0=float(alpha0),
        robin_constant=f(alpha0),
        method=SupportMethod.FFUNCTIONAL_MIN,
        residual=width,
        iterations=iterations,
    )


def _root_solution(
    residual,
    robin_at,
    lo: float,
    hi: float,
) -> SupportSolution:
    """Root of a support equation on [lo, hi], or a full-sphere verdict.

    The residual is negative at 0+ exactly when a proper cap exists and
    grows to +inf toward pi, so a sign scan over a rim-refined grid finds
    the unique bracket.
    """
    grid = np.concatenate(
        [
            np.geomspace(lo, 0.1, 80),
            np.linspace(0.1, hi, 320)[1:],
        ]
    )
    vals = np.array([residual(x) for x in grid])
    exact = np.flatnonzero(vals == 0.0)
    if exact.size:
        root = float(grid[int(exact[0])])
        return SupportSolution(
            alpha0=root,
            robin_constant=robin_at(root),
            method=SupportMethod.TRANSCENDENTAL_ROOT,
            residual=0.0,
            iterations=0,
        )
    sign_change = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    if sign_change.size == 0:
        return SupportSolution(
            alpha0=0.0,
            robin_constant=robin_at(0.0),
            method=SupportMethod.FULL_SPHERE,
            residual=float(vals[0]),
            iterations=0,
        )
    i = int(sign_change[0])
    root, info = brentq(
        residual, grid[i], grid[i + 1], xtol=1e-14, rtol=8.9e-16, full_output=True
    )
    return SupportSolution(
        alpha0=float(root),
        robin_constant=robin_at(float(root)),
        method=SupportMethod.TRANSCENDENTAL_ROOT,
        residual=float(residual(float(root))),
        iterations=int(info.iterations),
    )


def solve_support_pointcharge(q: float, h: float) -> SupportSolution:
    """Support rim angle for a point charge q at height h on the axis.

    Solves the rim condition equating the F-functional to the field value
    at the rim.  h = 1 is delegated to the on-sphere solver, whose equation
    is the two-sided limit of this one.
    """
    if not (q > 0.0 and h > 0.0):
        raise ValueError("need q > 0 and h > 0")
    if h == 1.0:
        return solve_support_northpole(q)

    def residual(a: float) -> float:
        rim_field = q * (h + 1.0) / (h * h + 1.0 - 2.0 * h * math.cos(a))
        return ffunctional_pointcharge(q, h, a) - rim_field

    return _root_solution(
        residual,
        lambda a: ffunctional_pointcharge(q, h, a),
        1e-7,
        PI - 1e-6,
    )


def _robin_northpole(q: float, a: float) -> float:
    return (PI + q * (PI - a)) / (math.sin(a) + PI - a)


def solve_support_northpole(q: float) -> SupportSolution:
    """Support rim angle for a charge q sitting at the north pole.

    The rim condition, multiplied through by cos(alpha), is
    pi*(1 - cos a) - q*(pi - a)*cos a - q*sin a = 0, which is negative at 0
    and positive at pi for every q > 0, so a root always exists: the
    support is never the whole sphere.
    """
    if not (q > 0.0 and math.isfinite(q)):
        raise ValueError(f"charge must be positive, got q={q!r}")

    def residual(a: float) -> float:
        return PI * (1.0 - math.cos(a)) - q * (PI - a) * math.cos(a) - q * math.sin(a)

    root, info = brentq(
        residual, 1e-12, PI, xtol=1e-14, rtol=8.9e-16, full_output=True
    )
    return SupportSolution(
        alpha0=float(root),
        robin_constant=_robin_northpole(q, float(root)),
        method=SupportMethod.TRANSCENDENTAL_ROOT,
        residual=float(residual(float(root))),
        iterations=int(info.iterations),
    )


def solve_support_quadratic(a: float, b: float, c: float) -> SupportSolution:
    """Support rim angle for the quadratic field.

    The rim condition is polynomial-trigonometric and has alpha = 0 as a
    spurious root for every admissible coefficient triple, so the scan
    starts away from zero; no interior sign change means the support is the
    whole sphere.
    """
    QuadraticField(a, b, c)

    def residual(al: float) -> float:
        ca, sa = math.cos(al), math.sin(al)
        tail = PI - al
        lhs = (
            8.0 * a * ca**3 * (2.0 * sa + 3.0 * tail)
            + ca**2 * ((2.0 * a + 9.0 * b) * sa - 6.0 * (2.0 * a - 3.0 * b) * tail)
            + 0.5 * math.sin(2.0 * al) * (9.0 * b - 22.0 * a)
            + 3.0 * (2.0 * a - 3.0 * b) * tail
            + 9.0 * PI
        )
        rhs = 9.0 * ca * (PI + (2.0 * a + b) * tail) - 2.0 * sa * (2.0 * a - 9.0 * b)
        return lhs - rhs

    return _root_solution(
        residual,
        lambda al: ffunctional_quadratic(a, b, c, al),
        1e-4,
        PI - 1e-6,
    )
