"""Wall-collocation periodization of the ring-source representation.

The periodic scattered field is written as the sum of three pieces: the
3x3 block of phased near copies of the one-body ansatz, an auxiliary
expansion (regular spherical waves or exterior proxy monopoles) that mops
up the influence of everything farther away, and upward/downward
plane-wave (Rayleigh-Bloch) expansions that carry the field out of the
slab |z| <= z0.  Quasiperiodicity and the two Cauchy matching conditions
are imposed on the six walls of one unit cell by collocation.

This module owns the geometric objects (lattice, unit-cell wall grids,
Rayleigh-Bloch mode sets, auxiliary bases) and the coupling matrices

    B : auxiliary coefficients   -> boundary-condition rows (mode space)
    C : ring-source mode vector  -> wall discrepancy rows
    Q : [aux | up | down] waves  -> wall discrepancy rows

consumed by the solver's Schur complement.  A key cost saving is baked
into fill_C: after the shift identity, the quasiperiodicity rows on the
side walls need only 6 distant image groups instead of the naive 18
evaluations (9 images on each of the two paired walls).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .harmonics import harmonic_degrees, num_harmonics, regular_basis, ring_regular_modes
from .onebody import mode_numbers
from .summation import fill_image_matrices


@dataclass(frozen=True)
class Lattice:
    """Rectangular lattice with vectors e1 = (e_x,0,0), e2 = (0,e_y,0)."""

    e_x: float
    e_y: float

    def __post_init__(self):
        if not (self.e_x > 0.0 and self.e_y > 0.0):
            raise ValueError("lattice periods must be positive")

    @property
    def e1(self) -> np.ndarray:
        return np.array([self.e_x, 0.0, 0.0])

    @property
    def e2(self) -> np.ndarray:
        return np.array([0.0, self.e_y, 0.0])

    @property
    def min_period(self) -> float:
        return min(self.e_x, self.e_y)


def bloch_phases(wave, lattice):
    """Quasiperiodicity phases (alpha, beta) = (e^{i k.e1}, e^{i k.e2})."""
    kv = np.asarray(wave.k_vec, dtype=np.float64)
    alpha = complex(np.exp(1j * kv[0] * lattice.e_x))
    beta = complex(np.exp(1j * kv[1] * lattice.e_y))
    return alpha, beta


@dataclass(frozen=True)
class RayleighBlochSet:
    """Plane-wave mode set kappa_mn = (kappa_x, kappa_y, +-kappa_z).

    kappa_z is the principal square root of k^2 - kappa_x^2 - kappa_y^2,
    so it is positive real for propagating orders and positive imaginary
    for evanescent ones.  Orders are sorted lexicographically by (m, n).
    """

    k: float
    ms: np.ndarray
    ns: np.ndarray
    kappa_x: np.ndarray
    kappa_y: np.ndarray
    kappa_z: np.ndarray
    propagating: np.ndarray
    wood: np.ndarray

    @property
    def count(self) -> int:
        return int(self.ms.size)

    @property
    def n_propagating(self) -> int:
        return int(np.count_nonzero(self.propagating))

    def order_index(self, m: int, n: int) -> int:
        hit = np.nonzero((self.ms == m) & (self.ns == n))[0]
        if hit.size != 1:
            raise KeyError(f"order ({m}, {n}) not in the mode set")
        return int(hit[0])


def rb_modes(wave, lattice, n0, wood_margin=1e-3):
    """Enumerate all orders with |kappa_xy| <= pi*n0.

    The cutoff is the one used for the wall expansions: every (m, n) with
    (k_x + 2 pi m / e_x)^2 + (k_y + 2 pi n / e_y)^2 <= (pi n0)^2 is kept,
    whether propagating or evanescent.  Orders with |kappa_z| < wood_margin*k
    are flagged as Wood-critical; the solve itself is still attempted.
    """
    if n0 < 1:
        raise ValueError("n0 must be at least 1")
    kv = np.asarray(wave.k_vec, dtype=np.float64)
    k = float(np.linalg.norm(kv))
    kx, ky = kv[0], kv[1]
    cut = np.pi * n0

    mlo = int(np.ceil((-cut - kx) * lattice.e_x / (2.0 * np.pi)))
    mhi = int(np.floor((cut - kx) * lattice.e_x / (2.0 * np.pi)))
    nlo = int(np.ceil((-cut - ky) * lattice.e_y / (2.0 * np.pi)))
    nhi = int(np.floor((cut - ky) * lattice.e_y / (2.0 * np.pi)))
    mm, nn = np.meshgrid(np.arange(mlo, mhi + 1), np.arange(nlo, nhi + 1),
                         indexing="ij")
    mm, nn = mm.ravel(), nn.ravel()
    kapx = kx + 2.0 * np.pi * mm / lattice.e_x
    kapy = ky + 2.0 * np.pi * nn / lattice.e_y
    keep = kapx * kapx + kapy * kapy <= cut * cut
    mm, nn, kapx, kapy = mm[keep], nn[keep], kapx[keep], kapy[keep]

    order = np.lexsort((nn, mm))
    mm, nn, kapx, kapy = mm[order], nn[order], kapx[order], kapy[order]

    kz2 = k * k - kapx * kapx - kapy * kapy
    kapz = np.sqrt(kz2.astype(np.complex128))
    return RayleighBlochSet(
        k=k, ms=mm, ns=nn, kappa_x=kapx, kappa_y=kapy, kappa_z=kapz,
        propagating=kz2 > 0.0,
        wood=np.abs(kapz) < wood_margin * k,
    )


@dataclass(frozen=True)
class UnitCell:
    """Collocation walls of one unit cell over |z| <= z0.

    Nodes are generated on the left (x = -e_x/2), bottom (y = -e_y/2) and
    down (z = -z0) walls as m1 x m1 tensor products of the 1D rules held
    in x/y/z_nodes; the paired right/front/top sets are exact translates
    by e1, e2 and (0,0,2*z0).  Node ordering within a wall is first-axis
    major, e.g. the left wall runs over y outer, z inner.
    """

    lattice: Lattice
    z0: float
    m1: int
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    z_nodes: np.ndarray
    x_weights: np.ndarray
    y_weights: np.ndarray
    z_weights: np.ndarray
    left: np.ndarray
    right: np.ndarray
    bottom: np.ndarray
    front: np.ndarray
    down: np.ndarray
    top: np.ndarray
    w_lr: np.ndarray
    w_bf: np.ndarray
    w_td: np.ndarray

    @property
    def nodes_per_wall(self) -> int:
        return int(self.m1 * self.m1)


def _walls_from_1d(lattice, z0, m1, x, y, z, wx, wy, wz) -> UnitCell:
    yy, zz = np.meshgrid(y, z, indexing="ij")
    left = np.column_stack([np.full(yy.size, -lattice.e_x / 2.0),
                            yy.ravel(), zz.ravel()])
    xx, zz2 = np.meshgrid(x, z, indexing="ij")
    bottom = np.column_stack([xx.ravel(),
                              np.full(xx.size, -lattice.e_y / 2.0),
                              zz2.ravel()])
    xx3, yy3 = np.meshgrid(x, y, indexing="ij")
    down = np.column_stack([xx3.ravel(), yy3.ravel(),
                            np.full(xx3.size, -z0)])
    return UnitCell(
        lattice=lattice, z0=z0, m1=m1,
        x_nodes=x, y_nodes=y, z_nodes=z,
        x_weights=wx, y_weights=wy, z_weights=wz,
        left=left, right=left + lattice.e1,
        bottom=bottom, front=bottom + lattice.e2,
        down=down, top=down + np.array([0.0, 0.0, 2.0 * z0]),
        w_lr=np.outer(wy, wz).ravel(),
        w_bf=np.outer(wx, wz).ravel(),
        w_td=np.outer(wx, wy).ravel(),
    )


def build_unit_cell(lattice, z0, m1) -> UnitCell:
    """Gauss-Legendre m1 x m1 collocation grids on all six walls."""
    if m1 < 2:
        raise ValueError("m1 must be at least 2")
    if z0 <= 0.0:
        raise ValueError("z0 must be positive")
    g, w = leggauss(m1)
    return _walls_from_1d(
        lattice, z0, m1,
        g * (lattice.e_x / 2.0), g * (lattice.e_y / 2.0), g * z0,
        w * (lattice.e_x / 2.0), w * (lattice.e_y / 2.0), w * z0,
    )


def midpoint_test_cell(cell: UnitCell) -> UnitCell:
    """Test grids at midpoints of consecutive collocation nodes.

    Used for a posteriori wall-error estimates on nodes distinct from the
    collocation points; each midpoint carries the gap it bridges as its
    quadrature weight, which slightly under-covers the two edge strips of
    every wall but is adequate for an error norm.
    """
    def mids(v):
        return 0.5 * (v[1:] + v[:-1]), np.diff(v)

    x, wx = mids(cell.x_nodes)
    y, wy = mids(cell.y_nodes)
    z, wz = mids(cell.z_nodes)
    return _walls_from_1d(cell.lattice, cell.z0, cell.m1 - 1,
                          x, y, z, wx, wy, wz)


def default_m1(k) -> int:
    """Smallest wall grid honoring the ~4 points-per-wavelength floor."""
    return max(int(np.ceil(4.0 * k / np.pi)), 4)


def default_z0(curve, lattice) -> float:
    """Wall half-height: clear the obstacle by a quarter period at least."""
    e = lattice.min_period
    return max(curve.half_height() + 0.25 * e, 0.5 * e)


@dataclass(frozen=True)
class AuxBasis:
    """Auxiliary cell basis: regular spherical waves or proxy monopoles.

    kind "spherical_harmonics" uses all (p+1)^2 regular solid harmonics
    j_l(kr) Y_lm up to degree p.  kind "proxy_points" uses n2^2 outgoing
    monopoles G_k(., y_s) at the stored exterior points (one column per
    point); the layout of the points is up to the caller.
    """

    kind: str
    p: Optional[int] = None
    n2: Optional[int] = None
    radius: Optional[float] = None
    points: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "spherical_harmonics":
            if self.p is None or self.p < 0:
                raise ValueError("spherical-harmonics basis needs degree p >= 0")
        elif self.kind == "proxy_points":
            if self.points is None:
                raise ValueError("proxy basis needs its point set")
            pts = np.asarray(self.points, dtype=np.float64)
            if pts.ndim != 2 or pts.shape[1] != 3:
                raise ValueError("proxy points must be an (n, 3) array")
            if self.n2 is not None and pts.shape[0] != self.n2 * self.n2:
                raise ValueError("proxy point count must equal n2**2")
        else:
            raise ValueError(f"unknown auxiliary basis kind {self.kind!r}")

    @property
    def count(self) -> int:
        if self.kind == "spherical_harmonics":
            return num_harmonics(self.p)
        return int(np.asarray(self.points).shape[0])


def spherical_aux(p) -> AuxBasis:
    return AuxBasis(kind="spherical_harmonics", p=int(p))


def eval_aux(basis, k, points, want_grad=False):
    """Values (n, count) and optionally gradients (n, 3, count) of the basis."""
    if basis.kind == "spherical_harmonics":
        return regular_basis(k, basis.p, points, want_grad=want_grad)
    pts = np.asarray(points, dtype=np.float64)
    src = np.asarray(basis.points, dtype=np.float64)
    diff = pts[:, None, :] - src[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.any(r < 1e-12):
        raise ValueError("evaluation point coincides with a proxy point")
    vals = np.exp(1j * k * r) / (4.0 * np.pi * r)
    if not want_grad:
        return vals
    radial = vals * (1j * k - 1.0 / r) / r
    grads = np.ascontiguousarray((radial[:, :, None] * diff).transpose(0, 2, 1))
    return vals, grads


def fill_B(nodes, p, k, P, kind="neumann"):
    """Auxiliary-basis trace on the obstacle boundary, in mode space.

    Rows are mode-major over the P retained modes: for the sound-hard
    problem each mode block holds the M normal-derivative rows; for the
    transmission problem each block holds M value rows then M derivative
    rows (the interior representation never sees the auxiliary basis, so
    its unknowns simply do not appear here).  Because a ring centered on
    the z axis sees j_l(kr) Y_lm as a pure e^{i m phi} harmonic, column
    (l, m) lands in mode block m exactly and every other block is zero;
    entries come from the closed form, with no azimuthal quadrature.
    """
    if P % 2:
        raise ValueError("P must be even")
    if 2 * p >= P:
        raise ValueError("need p < P/2 so every basis order maps to a "
                         "retained mode")
    if kind not in ("neumann", "transmission"):
        raise ValueError(f"unknown boundary-condition kind {kind!r}")
    modes = mode_numbers(P)
    vals, ders = ring_regular_modes(k, p, nodes.rho, nodes.z,
                                    nodes.nrho, nodes.nz)
    _, ms = harmonic_degrees(p)
    M = nodes.M
    mode_slot = {int(n): i for i, n in enumerate(modes)}
    rows_per = M if kind == "neumann" else 2 * M
    B = np.zeros((P * rows_per, num_harmonics(p)), dtype=np.complex128)
    for col, m in enumerate(ms):
        base = mode_slot[int(m)] * rows_per
        if kind == "neumann":
            B[base:base + M, col] = ders[:, col]
        else:
            B[base:base + M, col] = vals[:, col]
            B[base + M:base + 2 * M, col] = ders[:, col]
    return B


_XHAT = np.array([1.0, 0.0, 0.0])
_YHAT = np.array([0.0, 1.0, 0.0])
_ZHAT = np.array([0.0, 0.0, 1.0])


def _image_rows(k, src_pts, targets, normal, shifts, phases):
    nrm = np.tile(normal, (targets.shape[0], 1))
    return fill_image_matrices(k, src_pts, targets, nrm,
                               np.asarray(shifts, dtype=np.float64),
                               np.asarray(phases, dtype=np.complex128),
                               want_value=True)


def _points_to_mode_columns(rows, N, P, q):
    """Collapse a (rows, N*q) point-source matrix to mode-major columns."""
    T = rows.shape[0]
    modal = np.fft.ifft(rows.reshape(T, N, q), axis=2)
    sel = modal[:, :, mode_numbers(P) % q]
    return np.ascontiguousarray(sel.transpose(0, 2, 1)).reshape(T, P * N)


def fill_C(sources, cell, k, P, q, alpha, beta):
    """Near-copy wall discrepancies of the ring-source representation.

    Row layout, M1^2 rows per group:

        [L/R value, L/R x-deriv, B/F value, B/F y-deriv,
         T value, T z-deriv, D value, D z-deriv]

    The side-wall groups use the 6 surviving image terms per pair: writing
    the 3x3 phased copy sum at both paired walls and shifting one of them
    by a lattice vector telescopes 18 evaluations down to, for L/R,

        sum_n beta^n [ alpha^{-1} phi(. ; y - e1 + n e2)
                       - alpha^2  phi(. ; y + 2 e1 + n e2) ]

    collocated on the right-wall nodes only (B/F analogously with the
    roles of alpha and beta swapped).  The top/down groups evaluate the
    plain 9-copy sum.  Columns follow the mode-major coefficient layout;
    each ring is expanded at q >= P equispaced points, so q controls the
    azimuthal quadrature error of every image interaction.
    """
    if q < P:
        raise ValueError("ring expansion needs q >= P")
    from .geometry import rings_to_points

    pts = rings_to_points(sources.rho, sources.z, q)
    e1, e2 = cell.lattice.e1, cell.lattice.e2
    ia = 1.0 / alpha
    ib = 1.0 / beta

    sh_lr, ph_lr = [], []
    sh_bf, ph_bf = [], []
    sh_td, ph_td = [], []
    for n in (-1, 0, 1):
        bn = beta ** n
        sh_lr.append(-e1 + n * e2)
        ph_lr.append(ia * bn)
        sh_lr.append(2.0 * e1 + n * e2)
        ph_lr.append(-(alpha ** 2) * bn)
    for m in (-1, 0, 1):
        am = alpha ** m
        sh_bf.append(m * e1 - e2)
        ph_bf.append(am * ib)
        sh_bf.append(m * e1 + 2.0 * e2)
        ph_bf.append(-am * beta ** 2)
        for n in (-1, 0, 1):
            sh_td.append(m * e1 + n * e2)
            ph_td.append(am * beta ** n)

    # Stream one wall group at a time into mode space; holding all eight
    # point-space blocks at production sizes costs gigabytes.
    m2 = cell.nodes_per_wall
    N = sources.N
    out = np.empty((8 * m2, P * N), dtype=np.complex128)
    specs = [(cell.right, _XHAT, sh_lr, ph_lr),
             (cell.front, _YHAT, sh_bf, ph_bf),
             (cell.top, _ZHAT, sh_td, ph_td),
             (cell.down, _ZHAT, sh_td, ph_td)]
    for i, (wall, nhat, sh, ph) in enumerate(specs):
        v, d = _image_rows(k, pts, wall, nhat, sh, ph)
        out[(2 * i) * m2:(2 * i + 1) * m2] = _points_to_mode_columns(v, N, P, q)
        del v
        out[(2 * i + 1) * m2:(2 * i + 2) * m2] = _points_to_mode_columns(d, N, P, q)
        del d
    return out


def fill_Q(cell, basis, rb, k, alpha, beta):
    """Wall response of the auxiliary and Rayleigh-Bloch unknowns.

    Column blocks are [aux | upward set | downward set]; rows follow the
    fill_C layout.  The auxiliary block holds quasiperiodic discrepancies
    on the side-wall rows and plain traces on T/D.  Each plane-wave
    column is anchored on its own wall (so evanescent entries have unit
    magnitude there) and enters with a minus sign, since the T/D rows
    express (cell-side field) - (radiating expansion) = 0:

        T rows:  value  -e^{i(kx x + ky y)},  z-deriv  -i kz * value
        D rows:  value  -e^{i(kx x + ky y)},  z-deriv  +i kz * value

    Side-wall rows are exactly zero in both plane-wave blocks, as are the
    T rows of the downward block and the D rows of the upward block.
    """
    m2 = cell.nodes_per_wall
    nb = basis.count
    nrb = rb.count
    Q = np.zeros((8 * m2, nb + 2 * nrb), dtype=np.complex128)

    vr, gr = eval_aux(basis, k, cell.right, want_grad=True)
    vl, gl = eval_aux(basis, k, cell.left, want_grad=True)
    vf, gf = eval_aux(basis, k, cell.front, want_grad=True)
    vb, gb = eval_aux(basis, k, cell.bottom, want_grad=True)
    vt, gt = eval_aux(basis, k, cell.top, want_grad=True)
    vd, gd = eval_aux(basis, k, cell.down, want_grad=True)
    Q[0 * m2:1 * m2, :nb] = vr - alpha * vl
    Q[1 * m2:2 * m2, :nb] = gr[:, 0, :] - alpha * gl[:, 0, :]
    Q[2 * m2:3 * m2, :nb] = vf - beta * vb
    Q[3 * m2:4 * m2, :nb] = gf[:, 1, :] - beta * gb[:, 1, :]
    Q[4 * m2:5 * m2, :nb] = vt
    Q[5 * m2:6 * m2, :nb] = gt[:, 2, :]
    Q[6 * m2:7 * m2, :nb] = vd
    Q[7 * m2:8 * m2, :nb] = gd[:, 2, :]

    # T and D nodes share their (x, y) grid, so one phase table serves both.
    phase = np.exp(1j * (cell.down[:, :1] * rb.kappa_x[None, :]
                         + cell.down[:, 1:2] * rb.kappa_y[None, :]))
    ikz = 1j * rb.kappa_z[None, :]
    Q[4 * m2:5 * m2, nb:nb + nrb] = -phase
    Q[5 * m2:6 * m2, nb:nb + nrb] = -ikz * phase
    Q[6 * m2:7 * m2, nb + nrb:] = -phase
    Q[7 * m2:8 * m2, nb + nrb:] = ikz * phase
    return Q
