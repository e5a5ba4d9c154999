"""Azimuthal-mode ring kernels of the Helmholtz Green's function.

A unit-strength source ring at cylindrical (rho', z') interacts with a
target at (rho, z) through one complex number per azimuthal mode n:

    A_n(target; ring) = (1/2pi) int_0^{2pi} G_k(x, y(phi)) e^{in phi} dphi

with the target placed at azimuth zero (mean-over-circle normalization).
These integrals are evaluated with the q-node periodic trapezoid rule,
which converges like exp(-alpha q) with a computable rate alpha; high
modes |n| cost about |n| extra nodes. Everything here is absolute-accuracy
oriented: the kernels decay fast with |n| and relative accuracy of tiny
entries is neither achievable nor needed.

The batch filler shares the q kernel evaluations across all modes through
one FFT per target-source pair, so a full mode-block fill costs
M*N*q kernel evaluations regardless of P.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .summation import _sincos, FOUR_PI


def greens(k: float, x, y) -> complex:
    """Free-space kernel e^{ik r}/(4 pi r) between 3D points x and y."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = float(np.sqrt((d ** 2).sum()))
    if r == 0.0:
        raise ValueError("coincident source and target")
    return np.exp(1j * k * r) / (FOUR_PI * r)


def rate_bound(target, source) -> float:
    """Trapezoid-rule convergence rate alpha for a target-source pair.

    Parameters
    ----------
    target, source : pair of floats
        (rho, z) and (rho', z') in the generating half-plane, both radii
        positive.

    Returns
    -------
    float
        alpha = arccosh(1 + d^2/(2 rho rho')), d the in-plane separation.
        Computed in log1p form so the small-separation limit alpha ~ d/rho
        comes out without cancellation.
    """
    rho, z = target
    rho_s, z_s = source
    if rho <= 0 or rho_s <= 0:
        raise ValueError("rate bound needs strictly positive radii")
    d2 = (rho - rho_s) ** 2 + (z - z_s) ** 2
    if d2 == 0.0:
        raise ValueError("coincident pair has no convergence rate")
    u = d2 / (2.0 * rho * rho_s)
    return float(np.log1p(u + np.sqrt(u * (u + 2.0))))


def suggest_q(targets, sources, tol: float, max_abs_n: int = 0) -> int:
    """Even node count reaching absolute tolerance tol for all pairs.

    targets and sources are (rho, z) arrays of shape (*, 2); the worst
    (smallest) rate over the full cross product sets the budget, and
    max_abs_n adds the mode shift.
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    s = np.atleast_2d(np.asarray(sources, dtype=float))
    d2 = (t[:, None, 0] - s[None, :, 0]) ** 2 + (t[:, None, 1] - s[None, :, 1]) ** 2
    rr = 2.0 * t[:, None, 0] * s[None, :, 0]
    if np.any(d2 == 0.0):
        raise ValueError("coincident target-source pair")
    # A target on the axis couples to mode 0 only; its rate is effectively
    # infinite, so it must not drag the minimum down (or divide by zero).
    u = np.divide(d2, rr, out=np.full_like(d2, np.inf), where=rr > 0.0)
    alpha = np.log1p(u + np.sqrt(u * (u + 2.0)))
    a_min = float(alpha.min())
    q = int(max_abs_n + np.ceil(-np.log(tol) / a_min))
    return q + (q % 2)


@njit(cache=True, fastmath=True)
def _ring_samples(k, t_rho, t_z, s_rho, s_z, q, vals_r, vals_i, gr_r, gr_i, gz_r, gz_i, want_grad):
    """Kernel samples around source rings for targets at azimuth zero.

    vals[m, j, l] = G_k((t_rho[m],0,t_z[m]), ring_j point at angle phi_l),
    and optionally the target-gradient components along x (= rho at azimuth
    zero) and z.
    """
    M = t_rho.shape[0]
    N = s_rho.shape[0]
    for m in range(M):
        x0 = t_rho[m]
        z0 = t_z[m]
        for j in range(N):
            rs = s_rho[j]
            zs = s_z[j]
            dz = z0 - zs
            dz2 = dz * dz
            for l in range(q):
                phi = 2.0 * np.pi * l / q
                sphi, cphi = _sincos(phi)
                dx = x0 - rs * cphi
                dy = -rs * sphi
                r2 = dx * dx + dy * dy + dz2
                rinv = 1.0 / np.sqrt(r2)
                r = r2 * rinv
                g = rinv * (1.0 / FOUR_PI)
                sn, cs = _sincos(k * r)
                cs *= g
                sn *= g
                vals_r[m, j, l] = cs
                vals_i[m, j, l] = sn
                if want_grad:
                    fr = -rinv
                    fi = k
                    br = (cs * fr - sn * fi) * rinv
                    bi = (cs * fi + sn * fr) * rinv
                    gr_r[m, j, l] = br * dx
                    gr_i[m, j, l] = bi * dx
                    gz_r[m, j, l] = br * dz
                    gz_i[m, j, l] = bi * dz


def fill_ring_blocks(k, t_rho, t_z, s_rho, s_z, q, nmax,
                     normals=None, want_value=True, chunk_rows=None):
    """Mode blocks of ring kernels for a grid of targets and source rings.

    Parameters
    ----------
    k : float
        Wavenumber.
    t_rho, t_z : arrays (M,)
        Target positions in the half-plane.
    s_rho, s_z : arrays (N,)
        Source ring positions.
    q : int
        Trapezoid nodes per ring.
    nmax : int
        Highest mode; blocks are returned for n = 0..nmax and apply to -n
        as well (the kernels are even in n).
    normals : array (M, 2) or None
        In-plane unit normals (n_rho, n_z) per target; when given, the
        normal-derivative blocks are produced.
    want_value : bool
        Whether to produce the value blocks.

    Returns
    -------
    dict
        "value" and/or "nderiv": complex arrays of shape (nmax+1, M, N).
    """
    t_rho = np.ascontiguousarray(t_rho, dtype=float)
    t_z = np.ascontiguousarray(t_z, dtype=float)
    s_rho = np.ascontiguousarray(s_rho, dtype=float)
    s_z = np.ascontiguousarray(s_z, dtype=float)
    M, N = len(t_rho), len(s_rho)
    if q < 2 * nmax + 4:
        raise ValueError(f"q={q} is inside the aliased regime for nmax={nmax}")
    want_grad = normals is not None
    if chunk_rows is None:
        # keep the per-chunk sample buffers around ~100 MB
        chunk_rows = max(1, min(M, int(2.0e6 // (N * q)) or 1))
    out = {}
    if want_value:
        out["value"] = np.empty((nmax + 1, M, N), dtype=np.complex128)
    if want_grad:
        out["nderiv"] = np.empty((nmax + 1, M, N), dtype=np.complex128)
        nr = np.ascontiguousarray(normals[:, 0], dtype=float)
        nz = np.ascontiguousarray(normals[:, 1], dtype=float)
    dummy = np.empty((0, 0, 0))
    for lo in range(0, M, chunk_rows):
        hi = min(lo + chunk_rows, M)
        mm = hi - lo
        vr = np.empty((mm, N, q))
        vi = np.empty((mm, N, q))
        if want_grad:
            grr = np.empty((mm, N, q))
            gri = np.empty((mm, N, q))
            gzr = np.empty((mm, N, q))
            gzi = np.empty((mm, N, q))
        else:
            grr = gri = gzr = gzi = dummy
        _ring_samples(k, t_rho[lo:hi], t_z[lo:hi], s_rho, s_z, q,
                      vr, vi, grr, gri, gzr, gzi, want_grad)
        if want_value:
            coeff = np.fft.ifft(vr + 1j * vi, axis=2)
            out["value"][:, lo:hi, :] = np.transpose(coeff[:, :, :nmax + 1], (2, 0, 1))
        if want_grad:
            proj = (nr[lo:hi, None, None] * (grr + 1j * gri)
                    + nz[lo:hi, None, None] * (gzr + 1j * gzi))
            coeff = np.fft.ifft(proj, axis=2)
            out["nderiv"][:, lo:hi, :] = np.transpose(coeff[:, :, :nmax + 1], (2, 0, 1))
    return out


def ring_value(k, n, target, source, q) -> complex:
    """Single ring-kernel coefficient A_n via the q-node trapezoid rule."""
    n = int(n)
    if q < 2 * abs(n) + 4:
        raise ValueError(f"q={q} guarantees aliasing for mode n={n}")
    blocks = fill_ring_blocks(k, [target[0]], [target[1]], [source[0]], [source[1]],
                              q, abs(n))
    return complex(blocks["value"][abs(n), 0, 0])


def ring_normal_deriv(k, n, target, normal, source, q) -> complex:
    """Target-normal derivative ring coefficient A'_n."""
    n = int(n)
    if q < 2 * abs(n) + 4:
        raise ValueError(f"q={q} guarantees aliasing for mode n={n}")
    blocks = fill_ring_blocks(k, [target[0]], [target[1]], [source[0]], [source[1]],
                              q, abs(n), normals=np.array([normal], dtype=float),
                              want_value=False)
    return complex(blocks["nderiv"][abs(n), 0, 0])
