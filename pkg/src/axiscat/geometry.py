"""Axisymmetric obstacle geometry.

An obstacle is a body of revolution about the z-axis described by a
generating curve (rho(t), z(t)) for t in [0, pi], meeting the axis smoothly
at both ends. This module builds the standard test shapes, midpoint-rule
boundary collocation nodes with outward normals, and the ring-source sets
used by the fundamental-solutions representation (three displacement
schemes, interior or exterior side).

Sign conventions are detected, not assumed: the outward normal and the
displacement direction that lands inside the obstacle are both resolved by
point-in-region tests against the closed curve, so new shapes cannot
silently flip them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import erf

SHAPE_TAGS = ("smooth", "wiggly", "cup", "sphere", "custom")

# dense parameter grid used for orientation/containment polygon tests
_POLY_SAMPLES = 4096


@dataclass(frozen=True)
class GeneratingCurve:
    """Planar generating curve of a body of revolution.

    The callables accept real or complex ndarray arguments; complex support
    is what the complexified source-placement scheme relies on and is absent
    for sampled custom shapes (analytic flag False).
    """

    shape_tag: str
    rho: Callable
    z: Callable
    drho: Callable
    dz: Callable
    analytic: bool
    params: dict = field(default_factory=dict)
    min_samples: int = 0  # custom shapes: resolution limit of the input table

    def speed(self, t):
        return np.sqrt(self.drho(t) ** 2 + self.dz(t) ** 2)

    def max_rho(self) -> float:
        t = np.linspace(0.0, np.pi, _POLY_SAMPLES)
        return float(np.max(self.rho(t)))

    def half_height(self) -> float:
        t = np.linspace(0.0, np.pi, _POLY_SAMPLES)
        return float(np.max(np.abs(self.z(t))))


@dataclass(frozen=True)
class BoundaryNodes:
    """Midpoint-rule collocation nodes t_m = pi(m-1/2)/M with outward normals."""

    M: int
    t: np.ndarray
    rho: np.ndarray
    z: np.ndarray
    nrho: np.ndarray
    nz: np.ndarray
    speed: np.ndarray


@dataclass(frozen=True)
class RingSourceSet:
    """Ring-source locations in the rho-z plane with their provenance."""

    N: int
    rho: np.ndarray
    z: np.ndarray
    tau: float
    scheme: str
    side: str


def _polygon(curve: GeneratingCurve) -> np.ndarray:
    """Closed polygon in the (rho, z) plane: curve plus its axis mirror."""
    t = np.linspace(0.0, np.pi, _POLY_SAMPLES)
    r = curve.rho(t)
    zz = curve.z(t)
    fwd = np.column_stack([r, zz])
    back = np.column_stack([-r[::-1], zz[::-1]])
    return np.vstack([fwd, back])


def _inside_polygon(poly: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Even-odd ray-casting test, vectorized over edges and query points."""
    x, y = pts[:, 0], pts[:, 1]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1 = np.roll(x0, -1)
    y1 = np.roll(y0, -1)
    dy = y1 - y0
    safe = np.where(dy == 0, 1.0, dy)
    # edges x points
    cond = (y0[:, None] > y[None, :]) != (y1[:, None] > y[None, :])
    xcross = x0[:, None] + (y[None, :] - y0[:, None]) * ((x1 - x0) / safe)[:, None]
    hits = cond & (x[None, :] < xcross) & (dy != 0)[:, None]
    return np.bitwise_xor.reduce(hits, axis=0)


def _inside_curve(curve: GeneratingCurve, rho, z) -> np.ndarray:
    pts = np.column_stack([np.atleast_1d(rho), np.atleast_1d(z)])
    return _inside_polygon(_polygon(curve), pts)


def _validate_curve(curve: GeneratingCurve) -> None:
    t = np.linspace(0.0, np.pi, 712)
    r = curve.rho(t)
    scale = float(np.max(r))
    if abs(curve.rho(0.0)) > 1e-10 * scale or abs(curve.rho(np.pi)) > 1e-10 * scale:
        raise ValueError("generating curve must meet the axis at t=0 and t=pi")
    if np.any(r[1:-1] <= 0):
        raise ValueError("generating curve must have rho > 0 away from the poles")
    s = curve.speed(t)
    if np.any(s <= 0) or np.any(~np.isfinite(s)):
        raise ValueError("generating curve speed must be positive and finite")
    dzmax = float(np.max(np.abs(curve.dz(t))))
    if abs(curve.dz(0.0)) > 1e-12 * dzmax or abs(curve.dz(np.pi)) > 1e-12 * dzmax:
        raise ValueError("curve must close smoothly at the poles (z'(0)=z'(pi)=0)")


def _cup_callables(a: float, b: float):
    # r(t) = 1 - a*erf((t-pi/2)/a); theta(t) runs from pi around the rim
    # (polar angle b-a at t=pi/2) and back to pi, using the rounded-abs
    # function s_a(x) = x*erf(x/a) + (a/sqrt(pi)) exp(-x^2/a^2), whose
    # derivative erf(x/a) is continuous and which tends to |x|.
    c = 2.0 * (1.0 - (b - a) / np.pi)

    def s_a(x):
        return x * erf(x / a) + (a / np.sqrt(np.pi)) * np.exp(-(x / a) ** 2)

    def ds_a(x):
        return erf(x / a)

    def r(t):
        return 1.0 - a * erf((t - np.pi / 2) / a)

    def dr(t):
        return -(2.0 / np.sqrt(np.pi)) * np.exp(-((t - np.pi / 2) / a) ** 2)

    def theta(t):
        return (b - a) + c * s_a(t - np.pi / 2)

    def dtheta(t):
        return c * ds_a(t - np.pi / 2)

    def rho(t):
        return r(t) * np.sin(theta(t))

    def z(t):
        return r(t) * np.cos(theta(t))

    def drho(t):
        return dr(t) * np.sin(theta(t)) + r(t) * dtheta(t) * np.cos(theta(t))

    def dz(t):
        return dr(t) * np.cos(theta(t)) - r(t) * dtheta(t) * np.sin(theta(t))

    return rho, z, drho, dz


def _polar_callables(amplitude: float, lobes: int):
    def r(t):
        return 1.0 + amplitude * np.cos(lobes * t)

    def dr(t):
        return -amplitude * lobes * np.sin(lobes * t)

    def rho(t):
        return r(t) * np.sin(t)

    def z(t):
        return r(t) * np.cos(t)

    def drho(t):
        return dr(t) * np.sin(t) + r(t) * np.cos(t)

    def dz(t):
        return dr(t) * np.cos(t) - r(t) * np.sin(t)

    return rho, z, drho, dz


def make_curve(shape_tag: str, **shape_params) -> GeneratingCurve:
    """Construct a generating curve for one of the built-in shapes.

    Parameters
    ----------
    shape_tag : str
        One of ``smooth`` (polar radius 1 + 0.3 cos 4t), ``wiggly``
        (1 + 0.3 cos 8t), ``cup`` (params ``a`` half-thickness, ``b``
        opening half-angle), ``sphere`` (param ``radius``), ``custom``
        (param ``table``: array of columns t, rho, z, drho, dz).
        Every tag also accepts ``scale``, a uniform size multiplier
        (grating studies often run the same shape at a fraction of the
        lattice period).

    Returns
    -------
    GeneratingCurve
        Validated curve with analytic (or spline) derivatives.
    """
    if shape_tag == "smooth":
        rho, z, drho, dz = _polar_callables(0.3, 4)
        curve = GeneratingCurve("smooth", rho, z, drho, dz, analytic=True)
    elif shape_tag == "wiggly":
        rho, z, drho, dz = _polar_callables(0.3, 8)
        curve = GeneratingCurve("wiggly", rho, z, drho, dz, analytic=True)
    elif shape_tag == "sphere":
        R = float(shape_params.get("radius", 1.0))
        if R <= 0:
            raise ValueError("sphere radius must be positive")
        curve = GeneratingCurve(
            "sphere",
            lambda t: R * np.sin(t),
            lambda t: R * np.cos(t),
            lambda t: R * np.cos(t),
            lambda t: -R * np.sin(t),
            analytic=True,
            params={"radius": R},
        )
    elif shape_tag == "cup":
        a = float(shape_params.get("a", 0.2))
        b = float(shape_params.get("b", np.pi / 6))
        if a <= 0:
            raise ValueError("cup half-thickness a must be positive")
        if not 0 < b < np.pi / 2:
            raise ValueError("cup opening half-angle b must lie in (0, pi/2)")
        if b - a <= 0:
            raise ValueError("cup parameters self-intersect (need b > a)")
        rho, z, drho, dz = _cup_callables(a, b)
        curve = GeneratingCurve("cup", rho, z, drho, dz, analytic=True,
                                params={"a": a, "b": b})
    elif shape_tag == "custom":
        table = np.asarray(shape_params["table"], dtype=float)
        if table.ndim != 2 or table.shape[1] != 5:
            raise ValueError("custom table must have columns t, rho, z, drho, dz")
        t, r, zz, dr, dzz = table.T
        sp_r = CubicSpline(t, r)
        sp_z = CubicSpline(t, zz)
        sp_dr = CubicSpline(t, dr)
        sp_dz = CubicSpline(t, dzz)
        curve = GeneratingCurve("custom", sp_r, sp_z, sp_dr, sp_dz,
                                analytic=False, min_samples=table.shape[0])
    else:
        raise ValueError(f"unknown shape tag {shape_tag!r}")
    s = float(shape_params.get("scale", 1.0))
    if s <= 0:
        raise ValueError("scale must be positive")
    if s != 1.0:
        r, zz, dr, dzz = curve.rho, curve.z, curve.drho, curve.dz
        curve = GeneratingCurve(
            curve.shape_tag,
            lambda t: s * r(t),
            lambda t: s * zz(t),
            lambda t: s * dr(t),
            lambda t: s * dzz(t),
            analytic=curve.analytic,
            params={**curve.params, "scale": s},
            min_samples=curve.min_samples,
        )
    _validate_curve(curve)
    return curve


def _outward_sign(curve: GeneratingCurve) -> float:
    """Sign s such that s*(z', -rho')/speed points out of the obstacle."""
    t = np.linspace(0.0, np.pi, _POLY_SAMPLES)[1:-1]
    r = curve.rho(t)
    i = int(np.argmax(r))
    t0 = t[i]
    s = curve.speed(t0)
    n = np.array([curve.dz(t0), -curve.drho(t0)]) / s
    eps = 1e-3 * curve.max_rho()
    probe = np.array([r[i], curve.z(t0)]) + eps * n
    inside = _inside_curve(curve, probe[0], probe[1])[0]
    return -1.0 if inside else 1.0


def boundary_nodes(curve: GeneratingCurve, M: int) -> BoundaryNodes:
    """Collocation nodes at t_m = pi(m-1/2)/M with unit outward normals."""
    if M < 2:
        raise ValueError("need at least two boundary nodes")
    t = np.pi * (np.arange(M) + 0.5) / M
    s = curve.speed(t)
    sign = _outward_sign(curve)
    return BoundaryNodes(
        M=M,
        t=t,
        rho=curve.rho(t),
        z=curve.z(t),
        nrho=sign * curve.dz(t) / s,
        nz=-sign * curve.drho(t) / s,
        speed=s,
    )


def place_sources(curve: GeneratingCurve, N: int, tau: float,
                  scheme: str = "complexified",
                  side: str = "interior") -> RingSourceSet:
    """Place N ring sources near the curve by one of the displacement schemes.

    Parameters
    ----------
    curve : GeneratingCurve
    N : int
        Ring count; parameters t_j = pi(j-1/2)/N.
    tau : float
        Displacement magnitude (dimensionless for scheme complexified,
        length-like otherwise). Must be nonzero.
    scheme : {"normal_const", "normal_speed", "complexified"}
        y = x - tau*n, y = x - tau*s(t)*n, or the analytic continuation
        y = (Re zeta(t + i tau_eff), Im zeta(t + i tau_eff)) with
        zeta = rho + i z.
    side : {"interior", "exterior"}
        Which side of the surface the sources land on. The displacement
        sign for each scheme is resolved by a containment test, so the
        caller only ever states intent.
    """
    if tau == 0:
        raise ValueError("tau must be nonzero")
    if side not in ("interior", "exterior"):
        raise ValueError(f"unknown side {side!r}")
    if curve.min_samples and N > curve.min_samples // 16:
        raise ValueError("custom shape table too coarse: need at least 16*N samples")
    tau = abs(tau)
    t = np.pi * (np.arange(N) + 0.5) / N
    if scheme in ("normal_const", "normal_speed"):
        s = curve.speed(t)
        sign = _outward_sign(curve)
        nr = sign * curve.dz(t) / s
        nz = -sign * curve.drho(t) / s
        step = tau * s if scheme == "normal_speed" else tau
        if side == "interior":
            step = -step
        rho = curve.rho(t) + step * nr
        z = curve.z(t) + step * nz
    elif scheme == "complexified":
        if not curve.analytic:
            raise ValueError("complexified scheme needs an analytic curve")
        cand = {}
        for sgn in (+1.0, -1.0):
            zeta = curve.rho(t + 1j * sgn * tau) + 1j * curve.z(t + 1j * sgn * tau)
            cand[sgn] = (np.real(zeta), np.imag(zeta))
        # pick the sign whose midpoint ring lands inside; the other is exterior
        mid = N // 2
        inside_plus = _inside_curve(curve, cand[+1.0][0][mid], cand[+1.0][1][mid])[0]
        want_inside = side == "interior"
        use = +1.0 if inside_plus == want_inside else -1.0
        rho, z = cand[use]
    else:
        raise ValueError(f"unknown source scheme {scheme!r}")

    bad = np.nonzero(rho <= 0)[0]
    if bad.size:
        raise ValueError(f"source ring {bad[0]} crossed the axis (rho <= 0); reduce tau")
    inside = _inside_curve(curve, rho, z)
    want = side == "interior"
    wrong = np.nonzero(inside != want)[0]
    if wrong.size:
        raise ValueError(
            f"source ring {wrong[0]} landed on the wrong side for side={side!r}; "
            "reduce tau or adjust the shape"
        )
    return RingSourceSet(N=N, rho=rho, z=z, tau=tau, scheme=scheme, side=side)


def ring_points(rho: float, z: float, phis: np.ndarray) -> np.ndarray:
    """3D points of a ring at cylindrical (rho, z) sampled at angles phis."""
    return np.column_stack([rho * np.cos(phis), rho * np.sin(phis),
                            np.full(len(phis), z)])


def rings_to_points(rhos, zs, q: int):
    """Expand rings to q equispaced points each; returns ((len*q), 3) array.

    Points are ordered ring-major: ring j occupies rows j*q..(j+1)*q-1, with
    the angle index l fastest, phi_l = 2 pi l / q.
    """
    phis = 2 * np.pi * np.arange(q) / q
    cos, sin = np.cos(phis), np.sin(phis)
    rhos = np.asarray(rhos, dtype=float)
    zs = np.asarray(zs, dtype=float)
    n = len(rhos)
    pts = np.empty((n * q, 3))
    pts[:, 0] = (rhos[:, None] * cos[None, :]).ravel()
    pts[:, 1] = (rhos[:, None] * sin[None, :]).ravel()
    pts[:, 2] = np.repeat(zs, q)
    return pts


def surface_points_and_normals(nodes: BoundaryNodes, q: int):
    """3D surface points and outward normals on the (t_m, phi_l) grid.

    Returns (points, normals), each ((M*q), 3), ring-major like
    rings_to_points.
    """
    phis = 2 * np.pi * np.arange(q) / q
    cos, sin = np.cos(phis), np.sin(phis)
    M = nodes.M
    pts = np.empty((M * q, 3))
    nrm = np.empty((M * q, 3))
    pts[:, 0] = (nodes.rho[:, None] * cos[None, :]).ravel()
    pts[:, 1] = (nodes.rho[:, None] * sin[None, :]).ravel()
    pts[:, 2] = np.repeat(nodes.z, q)
    nrm[:, 0] = (nodes.nrho[:, None] * cos[None, :]).ravel()
    nrm[:, 1] = (nodes.nrho[:, None] * sin[None, :]).ravel()
    nrm[:, 2] = np.repeat(nodes.nz, q)
    return pts, nrm
