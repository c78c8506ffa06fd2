"""Equilibrium densities on spherical caps and their masses.

Densities are radial profiles f(phi) of the rotation-invariant equilibrium
measure d(mass) = f * dS restricted to a cap; every profile carries the
inverse-square-root edge factor near the rim.  Closed forms cover the
no-field, point-charge, on-sphere-charge, and quadratic cases; the general
pipeline handles any admissible field through the two Abel stages.

All integrations near the rim use the variable s = sqrt(|cos(alpha) -
cos(phi)|), in which f*ds-densities are smooth and bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .fields import ExternalField, PointChargeField, QuadraticField, ReflectedField
from .geometry import (
    Orientation,
    PhiGrid,
    SphericalCap,
    _validated_angle,
    south_cap,
)
from .singular_quadrature import (
    _depth,
    _g_south_vec,
    _second_stage_integral,
    _stage_F_south_vec,
)
from .support_finder import ffunctional_pointcharge, ffunctional_quadratic

PI = math.pi

# grid nodes must keep this clearance from the cap rim, where the density
# model switches to the analytic edge factor
RIM_GUARD_BAND = 1e-6

# sample count for the sigma interpolant of pipeline-backed profiles
_SIGMA_SAMPLES = 256


def capacity_south_cap(alpha: float) -> float:
    """Newtonian capacity of the south cap with rim angle alpha."""
    a = _validated_angle(alpha, name="rim angle")
    return (PI - a + math.sin(a)) / PI


def edge_factor(alpha, phi):
    """Universal rim profile 1 + (2/pi)*(sqrt(r) - atan(sqrt(r))).

    r = (1 - cos alpha)/(cos alpha - cos phi) measures inverse depth into
    the cap; the factor tends to 1 deep inside and diverges like one over
    the square root of the rim distance.  Scalar in, scalar out.
    """
    a = _validated_angle(alpha, name="rim angle")
    p = np.asarray(phi, dtype=float)
    if np.any(p < 0.0) or np.any(p > PI):
        raise ValueError("polar angle must lie in [0, pi]")
    r1 = 2.0 * math.sin(0.5 * a) ** 2
    depth = _depth(p, a)
    if np.any(depth < 0.0):
        raise ValueError("angle lies outside the south cap")
    if r1 == 0.0:
        out = np.ones_like(p)
    else:
        with np.errstate(divide="ignore"):
            root = np.sqrt(r1 / depth)
        out = 1.0 + (2.0 / PI) * (root - np.arctan(root))
    if p.ndim == 0:
        return float(out)
    return out


def nofield_density(alpha: float, phi):
    """Equilibrium density of the bare south cap with rim angle alpha.

    Normalized to unit total mass; reduces to the uniform density 1/(4*pi)
    at alpha = 0.  Finite for phi > alpha, infinite at the rim itself.
    """
    a = _validated_angle(alpha, name="rim angle")
    e = edge_factor(a, phi)
    return e / (4.0 * (PI - a + math.sin(a)))


def _validated_support_angles(alpha0: float, phi) -> np.ndarray:
    a0 = _validated_angle(alpha0, name="support rim angle")
    p = np.asarray(phi, dtype=float)
    if np.any(p <= a0) or np.any(p > PI):
        raise ValueError("density is defined for angles strictly inside the support")
    return p


def pointcharge_density(q: float, h: float, alpha0: float, phi):
    """Density and Robin constant for a point charge q at axis height h != 1.

    The support rim alpha0 is taken as given (see the support finder); the
    density is evaluated at phi in (alpha0, pi].  Returns (f, F_Q) with f
    matching the shape of phi.
    """
    if not (q > 0.0 and h > 0.0):
        raise ValueError("need q > 0 and h > 0")
    if h == 1.0:
        raise ValueError("charge sits on the sphere; use northpole_density")
    a0 = _validated_angle(alpha0, name="support rim angle")
    p = _validated_support_angles(a0, phi)

    fq = ffunctional_pointcharge(q, h, a0)
    e = edge_factor(a0, p)

    r1 = 2.0 * math.sin(0.5 * a0) ** 2
    depth = _depth(p, a0)
    cp = np.cos(p)
    d2 = 1.0 + h * h - 2.0 * h * cp
    with np.errstate(divide="ignore"):
        ratio = np.sqrt(r1 / depth)
        inv_ratio = np.sqrt(depth / r1) if r1 > 0.0 else np.full_like(depth, np.inf)
    term1 = ratio / d2
    term2 = (h - 1.0) / d2**1.5 * np.arctan((h - 1.0) / np.sqrt(d2) * inv_ratio)
    inhomog = -q * (h + 1.0) / (2.0 * PI * PI) * (term1 + term2)

    f = fq / (4.0 * PI) * e + inhomog
    if np.asarray(phi).ndim == 0:
        return float(f), float(fq)
    return f, float(fq)


def northpole_density(q: float, alpha0: float, phi):
    """Density for a charge q sitting at the north pole itself.

    The support rim alpha0 is always positive here; the charge excavates a
    neighborhood of the pole for every q > 0.
    """
    if not (q > 0.0 and math.isfinite(q)):
        raise ValueError(f"charge must be positive, got q={q!r}")
    a0 = _validated_angle(alpha0, name="support rim angle")
    if a0 == 0.0:
        raise ValueError("on-sphere charge support excludes the pole; need alpha0 > 0")
    p = _validated_support_angles(a0, phi)

    fq = (PI + q * (PI - a0)) / (math.sin(a0) + PI - a0)
    e = edge_factor(a0, p)
    r1 = 2.0 * math.sin(0.5 * a0) ** 2
    depth = _depth(p, a0)
    f = fq / (4.0 * PI) * e - q / (2.0 * PI * PI) * np.sqrt(r1 / depth) / (
        1.0 - np.cos(p)
    )
    if np.asarray(phi).ndim == 0:
        return float(f)
    return f


def quadratic_density(a: float, b: float, c: float, alpha0: float, phi):
    """Density and Robin constant for the quadratic field on a given support."""
    QuadraticField(a, b, c)  # admissibility
    a0 = _validated_angle(alpha0, name="support rim angle")
    p = _validated_support_angles(a0, phi)

    fq = ffunctional_quadratic(a, b, c, a0)
    e = edge_factor(a0, p)

    ca = math.cos(a0)
    r1 = 1.0 - ca
    depth = _depth(p, a0)
    cp = np.cos(p)
    t1 = math.sqrt(r1) * np.sqrt(depth) * (
        20.0 * a * ca + 60.0 * a * cp + 10.0 * a + 27.0 * b
    )
    t2 = np.sqrt(r1 / depth) * (
        8.0 * a * ca * ca
        + 10.0 * a * ca * cp
        + (4.0 * a + 9.0 * b) * ca
        + (20.0 * a + 27.0 * b) * cp
        + 15.0 * a * np.cos(2.0 * p)
        + 9.0 * a
        + 18.0 * b
        + 18.0 * c
    )
    t3 = (
        6.0
        * np.arctan(np.sqrt(depth / r1))
        * (15.0 * a * cp * cp + 9.0 * b * cp - 4.0 * a + 3.0 * c)
    )
    inhomog = (t1 - t2 - t3) / (36.0 * PI * PI)

    f = fq / (4.0 * PI) * e + inhomog
    if np.asarray(phi).ndim == 0:
        return float(f), float(fq)
    return f, float(fq)


@dataclass(frozen=True, eq=False)
class DensityProfile:
    """Radial density samples on a cap, with metadata.

    values[i] is the surface density at grid.nodes[i]; negative_nodes lists
    indices where the computed density came out negative (flagged, never
    clamped).  density_fn, when present, evaluates the same density at
    arbitrary angles inside the cap (vectorized).
    """

    cap: SphericalCap
    grid: PhiGrid
    values: np.ndarray
    robin_constant: Optional[float]
    mass: float
    negative_nodes: tuple[int, ...]
    density_fn: Optional[Callable[[np.ndarray], np.ndarray]] = dataclass_field(
        default=None, repr=False
    )

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != (len(self.grid),):
            raise ValueError("values must match the grid node count")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


def _edge_coordinate_maps(cap: SphericalCap):
    """(s_of_phi, phi_of_s, smax) for the cap's rim variable."""
    alpha = cap.alpha
    if cap.orientation is Orientation.SOUTH_CENTERED:
        smax = math.sqrt(2.0) * math.cos(0.5 * alpha)

        def s_of_phi(p):
            return np.sqrt(np.maximum(_depth(np.asarray(p, float), alpha), 0.0))

        def phi_of_s(s):
            u = math.cos(alpha) - np.square(np.asarray(s, float))
            return np.arccos(np.clip(u, -1.0, 1.0))

    else:
        smax = math.sqrt(2.0) * math.sin(0.5 * alpha)

        def s_of_phi(p):
            return np.sqrt(np.maximum(-_depth(np.asarray(p, float), alpha), 0.0))

        def phi_of_s(s):
            u = math.cos(alpha) + np.square(np.asarray(s, float))
            return np.arccos(np.clip(u, -1.0, 1.0))

    return s_of_phi, phi_of_s, smax


def sigma_interpolant(profile: DensityProfile) -> PchipInterpolator:
    """Shape-preserving interpolant of sigma(s) = f(phi(s)) * s.

    sigma is smooth and bounded up to s = 0 even though f itself blows up
    at the rim, so this is the right variable for potentials and masses.
    The interpolant is cached on the profile.
    """
    cached = getattr(profile, "_sigma_cache", None)
    if cached is not None:
        return cached
    s_of_phi, phi_of_s, smax = _edge_coordinate_maps(profile.cap)
    if profile.density_fn is not None:
        # keep clear of the rim guard band when sampling the density
        alpha = profile.cap.alpha
        if profile.cap.orientation is Orientation.SOUTH_CENTERED:
            guard_angle = min(alpha + 2.0 * RIM_GUARD_BAND, PI)
        else:
            guard_angle = max(alpha - 2.0 * RIM_GUARD_BAND, 0.0)
        s_lo = max(1e-3 * smax, float(s_of_phi(guard_angle)))
        s = np.linspace(s_lo, smax, _SIGMA_SAMPLES)
        sig = np.asarray(profile.density_fn(phi_of_s(s)), dtype=float) * s
    else:
        s = np.asarray(s_of_phi(profile.grid.nodes))
        sig = profile.values * s
        if profile.cap.orientation is Orientation.NORTH_CENTERED:
            s, sig = s[::-1], sig[::-1]
    interp = PchipInterpolator(s, sig, extrapolate=True)
    object.__setattr__(profile, "_sigma_cache", interp)
    return interp


def total_mass(profile: DensityProfile) -> float:
    """Total mass 2*pi * integral of f(phi) sin(phi) over the cap.

    Integrated in the rim variable, where the integrand is smooth; linear
    extension covers the short untabulated stretches at both ends.
    """
    _, _, smax = _edge_coordinate_maps(profile.cap)
    interp = sigma_interpolant(profile)
    return float(4.0 * PI * interp.integrate(0.0, smax))


def _build_profile(
    cap: SphericalCap,
    grid: PhiGrid,
    values: np.ndarray,
    robin: float,
    density_fn: Optional[Callable[[np.ndarray], np.ndarray]],
) -> DensityProfile:
    values = np.asarray(values, dtype=float)
    negative = tuple(int(i) for i in np.flatnonzero(values < 0.0))
    profile = DensityProfile(
        cap=cap,
        grid=grid,
        values=values,
        robin_constant=None if robin is None else float(robin),
        mass=math.nan,
        negative_nodes=negative,
        density_fn=density_fn,
    )
    object.__setattr__(profile, "mass", total_mass(profile))
    return profile


def profile_from_callable(
    cap: SphericalCap,
    grid: PhiGrid,
    fn: Callable[[np.ndarray], np.ndarray],
    robin_constant: Optional[float],
) -> DensityProfile:
    """Profile backed by a vectorized density callable."""
    values = np.asarray(fn(grid.nodes), dtype=float)
    return _build_profile(cap, grid, values, robin_constant, fn)


def profile_from_values(
    cap: SphericalCap,
    grid: PhiGrid,
    values: np.ndarray,
    robin_constant: Optional[float],
) -> DensityProfile:
    """Profile backed by node samples only."""
    values = np.asarray(values, dtype=float)
    if values.shape != (len(grid),):
        raise ValueError("values must match the grid node count")
    return _build_profile(cap, grid, values, robin_constant, None)


def _check_grid_inside(cap: SphericalCap, grid: PhiGrid) -> None:
    lo, hi = cap.angular_interval()
    nodes = grid.nodes
    if cap.orientation is Orientation.SOUTH_CENTERED:
        if nodes[0] < lo + RIM_GUARD_BAND:
            raise ValueError(
                f"grid reaches within {RIM_GUARD_BAND} of the cap rim at {lo!r}"
            )
    else:
        if nodes[-1] > hi - RIM_GUARD_BAND:
            raise ValueError(
                f"grid reaches within {RIM_GUARD_BAND} of the cap rim at {hi!r}"
            )


def _density_general_south(
    field: ExternalField, alpha: float, phi: np.ndarray
) -> tuple[np.ndarray, float]:
    """Pipeline density values and Robin constant on a south cap."""

    def gvec(t: np.ndarray) -> np.ndarray:
        return _g_south_vec(field, t)

    m_max = 2.0 * math.cos(0.5 * alpha) ** 2
    g_end = float(_second_stage_integral(gvec, np.array([m_max]), alpha)[0])
    fq = PI / (math.sin(alpha) + PI - alpha) * (
        1.0 - 8.0 * math.sqrt(m_max) * g_end
    )
    inhomog = _stage_F_south_vec(gvec, phi, alpha)
    values = fq / (4.0 * PI) * edge_factor(alpha, phi) + inhomog
    return values, fq


def density_general(
    field: ExternalField, cap: SphericalCap, grid: PhiGrid
) -> DensityProfile:
    """Equilibrium density on a prescribed cap support for any field.

    Runs the two Abel stages on the supplied grid and assembles the density
    as Robin-weighted edge factor plus the field-driven correction.  The
    grid must stay clear of the rim guard band.  Negative node values are
    flagged in the result, not clamped: they signal that the prescribed cap
    is not the true support.
    """
    _check_grid_inside(cap, grid)
    if cap.orientation is Orientation.SOUTH_CENTERED:
        alpha = cap.alpha
        values, fq = _density_general_south(field, alpha, grid.nodes)

        def density_fn(p):
            return _density_general_south(field, alpha, np.asarray(p, float))[0]

        return _build_profile(cap, grid, values, fq, density_fn)

    # north cap: reflect through the equator, solve south, map back
    reflected = ReflectedField(field)
    alpha_s = PI - cap.alpha
    nodes_s = np.sort(PI - grid.nodes)
    values_s, fq = _density_general_south(reflected, alpha_s, nodes_s)
    values = values_s[::-1]

    def density_fn(p):
        p = np.atleast_1d(np.asarray(p, float))
        return _density_general_south(reflected, alpha_s, PI - p)[0]

    return _build_profile(cap, grid, values, fq, density_fn)
