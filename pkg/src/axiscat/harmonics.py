"""Orthonormal spherical harmonics and the regular spherical-wave basis.

Conventions used throughout the package:

* ``Y_lm(theta, phi) = Pbar_l^m(cos theta) e^{i m phi}`` with the
  Condon-Shortley phase folded into ``Pbar`` and unit L2 norm over the
  sphere, so ``integral |Y_lm|^2 dOmega = 1``.
* Basis functions are packed degree-major at column ``l*l + l + m`` for
  ``0 <= l <= p``, ``-l <= m <= l``; ``(p+1)**2`` columns total.
* Angular derivatives are evaluated with ladder identities that involve
  no division by ``sin theta``, so values stay finite on the z-axis.
"""

import numpy as np
from scipy.special import spherical_jn


def num_harmonics(p: int) -> int:
    return (p + 1) ** 2


def harmonic_index(l: int, m: int) -> int:
    """Column index of (l, m) in the packed basis."""
    return l * l + l + m


def harmonic_degrees(p: int):
    """Degree and order arrays aligned with the packed columns.

    Returns
    -------
    ls, ms : (``(p+1)**2``,) int arrays with ``ls[idx(l,m)] = l`` etc.
    """
    ls = np.concatenate([np.full(2 * l + 1, l, dtype=np.int64) for l in range(p + 1)])
    ms = np.concatenate([np.arange(-l, l + 1, dtype=np.int64) for l in range(p + 1)])
    return ls, ms


def _tri(l, m):
    # index into the m>=0 triangular table
    return l * (l + 1) // 2 + m


def _legendre_tri(p, ct, st):
    """Normalized associated Legendre table for 0 <= m <= l <= p.

    Parameters are cos(theta) and sin(theta) as arrays of equal shape;
    sin(theta) is passed separately (always >= 0 for theta in [0, pi])
    so callers can supply it exactly from Cartesian data.

    Returns an array of shape (*ct.shape, (p+1)(p+2)/2) holding
    Pbar_l^m with the Condon-Shortley sign, packed at l(l+1)/2 + m.
    """
    ct = np.asarray(ct, dtype=np.float64)
    st = np.asarray(st, dtype=np.float64)
    out = np.empty(ct.shape + ((p + 1) * (p + 2) // 2,))
    out[..., 0] = 1.0 / np.sqrt(4.0 * np.pi)
    # diagonal Pbar_m^m, then first superdiagonal, then three-term in l
    for m in range(1, p + 1):
        out[..., _tri(m, m)] = (
            -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * st * out[..., _tri(m - 1, m - 1)]
        )
    for m in range(0, p):
        out[..., _tri(m + 1, m)] = np.sqrt(2.0 * m + 3.0) * ct * out[..., _tri(m, m)]
    for m in range(0, p - 1):
        for l in range(m + 2, p + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            out[..., _tri(l, m)] = a * (
                ct * out[..., _tri(l - 1, m)] - b * out[..., _tri(l - 2, m)]
            )
    return out


def _signed_tables(p, ct, st, want_theta_deriv=False, want_m_over_sin=False):
    """Real angular tables packed over all (l, m), signed-m convention.

    The signed extension is ``Pbar_l^{-m} = (-1)^m Pbar_l^m`` so that
    ``Y_lm = table * e^{i m phi}`` holds verbatim for negative orders.
    Optionally also returns d/dtheta of the table and ``m/sin(theta)``
    times the table, both via pole-safe ladder identities (the latter
    needs degree p+1 internally).
    """
    pmax = p + 1 if want_m_over_sin else p
    tri = _legendre_tri(pmax, ct, st)
    npts_shape = tri.shape[:-1]
    nb = num_harmonics(p)
    pb = np.empty(npts_shape + (nb,))
    for l in range(p + 1):
        for m in range(l + 1):
            v = tri[..., _tri(l, m)]
            pb[..., harmonic_index(l, m)] = v
            if m:
                pb[..., harmonic_index(l, -m)] = v if m % 2 == 0 else -v
    results = [pb]

    if want_theta_deriv:
        # d/dtheta Pbar_l^m = (Cp Pbar^{m+1} - Cm Pbar^{m-1}) / 2 with the
        # convention Pbar_l^{-1} = -Pbar_l^1; no sin(theta) division.
        dpb = np.empty(npts_shape + (nb,))
        for l in range(p + 1):
            for m in range(l + 1):
                cp = np.sqrt((l - m) * (l + m + 1.0))
                cm = np.sqrt((l + m) * (l - m + 1.0))
                hi = tri[..., _tri(l, m + 1)] if m + 1 <= l else 0.0
                if m == 0:
                    lo = -tri[..., _tri(l, 1)] if l >= 1 else 0.0
                else:
                    lo = tri[..., _tri(l, m - 1)]
                v = 0.5 * (cp * hi - cm * lo)
                dpb[..., harmonic_index(l, m)] = v
                if m:
                    dpb[..., harmonic_index(l, -m)] = v if m % 2 == 0 else -v
        results.append(dpb)

    if want_m_over_sin:
        # m/sin(theta) * Pbar_l^m from the degree-raising identity; the
        # sin(theta) factor inside Pbar_{l+1}^{m+-1} absorbs the division.
        vb = np.empty(npts_shape + (nb,))
        for l in range(p + 1):
            fac = -0.5 * np.sqrt((2.0 * l + 1.0) / (2.0 * l + 3.0))
            for m in range(l + 1):
                hi = np.sqrt((l + m + 1.0) * (l + m + 2.0)) * tri[..., _tri(l + 1, m + 1)]
                if m == 0:
                    lo = -np.sqrt((l + 1.0) * (l + 2.0)) * tri[..., _tri(l + 1, 1)]
                else:
                    lo = np.sqrt((l - m + 1.0) * (l - m + 2.0)) * tri[..., _tri(l + 1, m - 1)]
                v = fac * (hi + lo)
                vb[..., harmonic_index(l, m)] = v
                if m:
                    # order flips sign along with the parity factor
                    vb[..., harmonic_index(l, -m)] = -v if m % 2 == 0 else v
        results.append(vb)

    return results


def _azimuthal_phases(p, phi):
    """e^{i m phi} for every packed column, shape (*phi.shape, (p+1)^2)."""
    phi = np.asarray(phi, dtype=np.float64)
    _, ms = harmonic_degrees(p)
    return np.exp(1j * phi[..., None] * ms)


def sph_harm_table(p, theta, phi):
    """All Y_lm for l <= p at the given angles.

    Parameters
    ----------
    p : int
        Maximum degree.
    theta, phi : array_like
        Polar and azimuthal angles, broadcast together.

    Returns
    -------
    (*angles.shape, (p+1)**2) complex array, columns packed at l*l+l+m.
    """
    theta = np.asarray(theta, dtype=np.float64)
    (pb,) = _signed_tables(p, np.cos(theta), np.sin(theta))
    return pb * _azimuthal_phases(p, np.broadcast_to(phi, theta.shape))


def sph_harm_angular(p, theta, phi):
    """Y_lm together with its pole-safe angular derivative fields.

    Returns
    -------
    y : complex table of Y_lm values
    dy_dtheta : complex table of dY_lm/dtheta
    imy_over_sin : complex table of i*m*Y_lm/sin(theta)

    The third output is the phi-derivative divided by sin(theta), the
    combination that enters the unit-vector gradient; it is evaluated
    by a degree-raising identity and stays finite at theta = 0, pi.
    """
    theta = np.asarray(theta, dtype=np.float64)
    pb, dpb, vb = _signed_tables(
        p, np.cos(theta), np.sin(theta), want_theta_deriv=True, want_m_over_sin=True
    )
    ph = _azimuthal_phases(p, np.broadcast_to(phi, theta.shape))
    return pb * ph, dpb * ph, 1j * vb * ph


def _to_spherical(points):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must have shape (n, 3)")
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    rho = np.hypot(x, y)
    r = np.hypot(rho, z)
    if np.any(r < 1e-12):
        raise ValueError("evaluation point at the expansion center")
    ct, st = z / r, rho / r
    safe = np.where(rho > 0.0, rho, 1.0)
    cphi = np.where(rho > 0.0, x / safe, 1.0)
    sphi = np.where(rho > 0.0, y / safe, 0.0)
    return r, ct, st, cphi, sphi


def regular_basis(k, p, points, want_grad=False):
    """Regular spherical waves j_l(kr) Y_lm at Cartesian points.

    Parameters
    ----------
    k : float
        Wavenumber.
    p : int
        Maximum degree; ``(p+1)**2`` basis columns.
    points : (n, 3) array
    want_grad : bool
        Also return analytic Cartesian gradients.

    Returns
    -------
    vals : (n, (p+1)**2) complex
    grads : (n, 3, (p+1)**2) complex, only when ``want_grad``.
    """
    r, ct, st, cphi, sphi = _to_spherical(points)
    ls, _ = harmonic_degrees(p)
    kr = k * r
    orders = np.arange(p + 1)
    jl = spherical_jn(orders[None, :], kr[:, None])

    if not want_grad:
        pb, = _signed_tables(p, ct, st)
        phi = np.arctan2(sphi, cphi)
        return jl[:, ls] * (pb * _azimuthal_phases(p, phi))

    pb, dpb, vb = _signed_tables(p, ct, st, want_theta_deriv=True, want_m_over_sin=True)
    phi = np.arctan2(sphi, cphi)
    ph = _azimuthal_phases(p, phi)
    y = pb * ph
    dy = dpb * ph
    ty = 1j * vb * ph

    djl = spherical_jn(orders[None, :], kr[:, None], derivative=True)
    vals = jl[:, ls] * y
    g_r = k * djl[:, ls] * y
    jl_over_r = jl[:, ls] / r[:, None]
    g_t = jl_over_r * dy
    g_p = jl_over_r * ty

    rhat = np.stack([st * cphi, st * sphi, ct], axis=1)
    that = np.stack([ct * cphi, ct * sphi, -st], axis=1)
    phat = np.stack([-sphi, cphi, np.zeros_like(sphi)], axis=1)
    grads = (
        rhat[:, :, None] * g_r[:, None, :]
        + that[:, :, None] * g_t[:, None, :]
        + phat[:, :, None] * g_p[:, None, :]
    )
    return vals, grads


def ring_regular_modes(k, p, rho, z, nrho=None, nz=None):
    """Azimuthal-mode coefficients of the regular basis on target rings.

    A ring centered on the z-axis sees j_l(kr) Y_lm as a pure e^{i m phi}
    harmonic, so its only nonzero Fourier coefficient sits in mode m and
    can be written in closed form; no azimuthal quadrature is involved.

    Parameters
    ----------
    k : float
    p : int
    rho, z : (nr,) ring coordinates in the half-plane (rho > 0)
    nrho, nz : optional (nr,) in-plane unit normal components

    Returns
    -------
    vals : (nr, (p+1)**2) complex
        Coefficient of e^{i m phi} for column (l, m); the basis function
        contributes nothing to any other mode.
    derivs : (nr, (p+1)**2) complex, only when normals are given
        Same coefficients for the normal derivative n . grad.
    """
    rho = np.asarray(rho, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    r = np.hypot(rho, z)
    if np.any(r < 1e-12):
        raise ValueError("ring at the expansion center")
    ct, st = z / r, rho / r
    ls, _ = harmonic_degrees(p)
    orders = np.arange(p + 1)
    kr = k * r
    jl = spherical_jn(orders[None, :], kr[:, None])

    if nrho is None:
        pb, = _signed_tables(p, ct, st)
        return jl[:, ls] * pb

    pb, dpb = _signed_tables(p, ct, st, want_theta_deriv=True)
    djl = spherical_jn(orders[None, :], kr[:, None], derivative=True)
    vals = jl[:, ls] * pb
    dr = k * djl[:, ls] * pb
    dt = (jl[:, ls] / r[:, None]) * dpb
    nrho = np.asarray(nrho, dtype=np.float64)[:, None]
    nz = np.asarray(nz, dtype=np.float64)[:, None]
    ct, st = ct[:, None], st[:, None]
    # d/drho = sin(t) d/dr + cos(t)/r d/dt ; d/dz = cos(t) d/dr - sin(t)/r d/dt
    derivs = nrho * (st * dr + ct * dt) + nz * (ct * dr - st * dt)
    return vals, derivs
