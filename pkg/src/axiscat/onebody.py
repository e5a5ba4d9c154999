"""Per-azimuthal-mode MFS systems for an isolated axisymmetric obstacle.

The scattered field of a body of revolution is represented by ring
sources offset from the boundary; azimuthal Fourier transforming both
the collocation data and the unknown ring densities decouples the
least-squares problem into P independent small dense blocks, one per
mode n in (-P/2, P/2]. The kernels are even in n, so blocks (and their
SVD factors) are stored once per |n|.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import BoundaryNodes, GeneratingCurve, RingSourceSet, boundary_nodes, rings_to_points
from .ringkernel import fill_ring_blocks, suggest_q
from .summation import DirectSummation


def mode_numbers(P: int) -> np.ndarray:
    """Stacking order of azimuthal modes: n = -P/2+1, ..., P/2."""
    if P % 2:
        raise ValueError("P must be even")
    half = P // 2
    return np.arange(-half + 1, half + 1)


@dataclass(frozen=True)
class IncidentWave:
    """Plane wave amplitude * e^{i k_vec . x}, optionally with an interior
    wavenumber for transmission problems."""

    k_vec: tuple
    k_minus: Optional[float] = None
    amplitude: complex = 1.0

    def __post_init__(self):
        kv = np.asarray(self.k_vec, dtype=float)
        if kv.shape != (3,):
            raise ValueError("k_vec must have three components")
        if np.linalg.norm(kv) <= 0.0:
            raise ValueError("wavenumber must be positive")
        object.__setattr__(self, "k_vec", tuple(float(c) for c in kv))

    @property
    def k(self) -> float:
        return float(np.linalg.norm(self.k_vec))

    @classmethod
    def from_angles(cls, k, theta, phi=0.0, k_minus=None, amplitude=1.0):
        """Build from wavenumber and (theta, phi); theta < 0 travels downward."""
        if k <= 0:
            raise ValueError("wavenumber must be positive")
        kv = (
            k * np.cos(theta) * np.cos(phi),
            k * np.cos(theta) * np.sin(phi),
            k * np.sin(theta),
        )
        return cls(kv, k_minus, amplitude)

    def field(self, points):
        pts = np.asarray(points, dtype=float)
        return self.amplitude * np.exp(1j * (pts @ np.asarray(self.k_vec)))

    def normal_deriv(self, points, normals):
        kv = np.asarray(self.k_vec)
        return 1j * (np.asarray(normals, dtype=float) @ kv) * self.field(points)


@dataclass
class ModeBlockSystem:
    """Dense per-mode blocks, stored once per |n| (kernels are even in n).

    kind "neumann": block(n) is the M x N normal-derivative matrix A'_n.
    kind "transmission": block(n) is the 2M x 2N matrix
    [[A_n, -Aminus_n], [A'_n, -A'minus_n]] acting on [eta_n; etaminus_n].
    """

    P: int
    kind: str
    blocks: np.ndarray  # (P//2 + 1, rows, cols)

    def block(self, n: int) -> np.ndarray:
        return self.blocks[abs(n)]

    @property
    def rows(self) -> int:
        return self.blocks.shape[1]

    @property
    def cols(self) -> int:
        return self.blocks.shape[2]


@dataclass
class ModeBlockFactor:
    """Truncated SVD factors per |n|; applies the pseudoinverse blockwise."""

    P: int
    kind: str
    tol: float
    rows: int
    cols: int
    U: list
    sinv: list
    V: list

    @property
    def ranks(self):
        return [len(s) for s in self.sinv]


def factor(system: ModeBlockSystem, tol: float = 1e-10) -> ModeBlockFactor:
    """SVD-factor every stored block, truncating below tol * sigma_max."""
    U, sinv, V = [], [], []
    for i in range(system.blocks.shape[0]):
        try:
            u, s, vh = np.linalg.svd(system.blocks[i], full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"SVD failed for mode block |n|={i}: {exc}")
        keep = s > tol * s[0]
        U.append(np.ascontiguousarray(u[:, keep]))
        sinv.append(1.0 / s[keep])
        V.append(np.ascontiguousarray(vh[keep].conj().T))
    return ModeBlockFactor(
        system.P, system.kind, tol, system.rows, system.cols, U, sinv, V
    )


def apply_pinv(fac: ModeBlockFactor, vector: np.ndarray) -> np.ndarray:
    """Blockwise pseudoinverse: project, scale, expand; never densified.

    vector is stacked mode-major over n = -P/2+1..P/2 with fac.rows
    entries per mode; the result has fac.cols entries per mode.
    """
    x = np.asarray(vector)
    if x.shape != (fac.P * fac.rows,):
        raise ValueError(
            f"expected stacked length {fac.P * fac.rows}, got {x.shape}"
        )
    x = x.reshape(fac.P, fac.rows)
    out = np.empty((fac.P, fac.cols), dtype=np.complex128)
    for i, n in enumerate(mode_numbers(fac.P)):
        j = abs(int(n))
        out[i] = fac.V[j] @ (fac.sinv[j] * (fac.U[j].conj().T @ x[i]))
    return out.ravel()


def rhs_fourier(samples: np.ndarray, P: int) -> np.ndarray:
    """Azimuthal Fourier coefficients of ring-sampled boundary data.

    Parameters
    ----------
    samples : (M, q) complex
        f(rho_m, 2 pi l / q, z_m) with q = P equispaced angles per ring.
    P : int
        Mode count (even).

    Returns
    -------
    (P, M) array; row i holds coefficient of mode mode_numbers(P)[i],
    f_n = (1/q) sum_l f(phi_l) e^{-2 pi i n l / q}.
    """
    if P % 2:
        raise ValueError("P must be even")
    samples = np.asarray(samples)
    if samples.ndim != 2 or samples.shape[1] != P:
        raise ValueError(f"need P={P} azimuthal samples per ring")
    fhat = np.fft.fft(samples, axis=1) / P
    bins = mode_numbers(P) % P
    return np.ascontiguousarray(fhat[:, bins].T)


def _node_normals(nodes: BoundaryNodes) -> np.ndarray:
    return np.stack([nodes.nrho, nodes.nz], axis=1)


def fill_neumann(nodes: BoundaryNodes, sources: RingSourceSet, k: float,
                 P: int, q: int) -> ModeBlockSystem:
    """Normal-derivative blocks A'_n for the sound-hard problem."""
    got = fill_ring_blocks(
        k, nodes.rho, nodes.z, sources.rho, sources.z, q, P // 2,
        normals=_node_normals(nodes), want_value=False,
    )
    return ModeBlockSystem(P, "neumann", got["nderiv"])


def fill_transmission(nodes: BoundaryNodes, sources_in: RingSourceSet,
                      sources_out: RingSourceSet, k: float, k_minus: float,
                      P: int, q: int) -> ModeBlockSystem:
    """Stacked value/derivative blocks for the transmission problem.

    The exterior field uses rings inside the obstacle at wavenumber k;
    the interior field uses rings outside at k_minus. Rows are ordered
    [value conditions; derivative conditions], columns [eta; eta_minus].
    """
    if sources_in.side != "interior" or sources_out.side != "exterior":
        raise ValueError(
            "transmission needs interior-side sources for the exterior field "
            "and exterior-side sources for the interior field"
        )
    normals = _node_normals(nodes)
    ext = fill_ring_blocks(k, nodes.rho, nodes.z, sources_in.rho,
                           sources_in.z, q, P // 2, normals=normals)
    itr = fill_ring_blocks(k_minus, nodes.rho, nodes.z, sources_out.rho,
                           sources_out.z, q, P // 2, normals=normals)
    nb, M, N = ext["value"].shape
    blocks = np.empty((nb, 2 * M, 2 * N), dtype=np.complex128)
    blocks[:, :M, :N] = ext["value"]
    blocks[:, :M, N:] = -itr["value"]
    blocks[:, M:, :N] = ext["nderiv"]
    blocks[:, M:, N:] = -itr["nderiv"]
    return ModeBlockSystem(P, "transmission", blocks)


def ring_strengths(eta: np.ndarray, P: int, N: int, q: int) -> np.ndarray:
    """Equivalent point-source strengths on q azimuthal nodes per ring.

    Returns (N, q) sigma with sigma_{j,l} = (1/q) sum_n c_{nj} e^{2 pi i n l / q},
    ordered to match rings_to_points.
    """
    if q < P:
        raise ValueError("q must be at least the mode count P")
    c = np.asarray(eta).reshape(P, N)
    bins = np.zeros((q, N), dtype=np.complex128)
    bins[mode_numbers(P) % q] = c
    return np.ascontiguousarray(np.fft.ifft(bins, axis=0).T)


def eval_field_onebody(eta, sources: RingSourceSet, k: float, points,
                       q: Optional[int] = None, backend=None):
    """Scattered field sum_j sum_n c_nj Phi_nj at off-surface points.

    Rings are expanded into q equispaced point sources (default q = P,
    adequate once targets are a ring radius or more away).
    """
    eta = np.asarray(eta)
    N = sources.N
    if eta.size % N:
        raise ValueError("coefficient length is not a multiple of the ring count")
    P = eta.size // N
    if q is None:
        q = P
    sigma = ring_strengths(eta, P, N, q)
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
    src = rings_to_points(sources.rho, sources.z, q)
    if backend is None:
        backend = DirectSummation()
    try:
        out = backend.potentials(k, src, sigma.ravel(), pts)
    except ZeroDivisionError:
        raise ValueError("evaluation point coincides with a source quadrature point")
    if not np.all(np.isfinite(out)):
        raise ValueError("evaluation point coincides with a source quadrature point")
    return out


@dataclass
class OneBodyParams:
    """Discretization knobs for the isolated-obstacle solve."""

    P: int
    M: Optional[int] = None          # boundary nodes; default ceil(1.2 N)
    q: Optional[int] = None          # ring quadrature; default suggest_q at 1e-12
    svd_tol: float = 1e-10
    grid: int = 128                  # residual-check grid is grid x grid
    far_point: tuple = (10.0, 10.0, 10.0)
    reference_far_value: Optional[complex] = None


@dataclass
class OneBodyResult:
    eta: np.ndarray
    eta_minus: Optional[np.ndarray]
    P: int
    N: int
    q: int
    eps1: float
    eps2: Optional[float]
    far_value: complex
    coef_norm: float


def _surface_rhs(wave: IncidentWave, nodes: BoundaryNodes, P: int, want_value: bool):
    """Incident-wave data sampled on the M x P surface grid, as mode arrays."""
    pts = rings_to_points(nodes.rho, nodes.z, P).reshape(nodes.M, P, 3)
    phis = 2.0 * np.pi * np.arange(P) / P
    normals = np.empty_like(pts)
    normals[:, :, 0] = nodes.nrho[:, None] * np.cos(phis)
    normals[:, :, 1] = nodes.nrho[:, None] * np.sin(phis)
    normals[:, :, 2] = nodes.nz[:, None]
    flat = pts.reshape(-1, 3)
    ui = wave.field(flat).reshape(nodes.M, P)
    dui = wave.normal_deriv(flat, normals.reshape(-1, 3)).reshape(nodes.M, P)
    fhat_d = rhs_fourier(-dui, P)
    if not want_value:
        return fhat_d
    fhat_v = rhs_fourier(-ui, P)
    return fhat_v, fhat_d


def _modal_surface_field(coef, blocks, phis):
    """Physical-space field on a (t, phi) product grid from modal data.

    coef: (P, N) mode coefficients; blocks: (P//2+1, T, N) even-in-n ring
    blocks; phis: azimuthal grid. Returns (T, nphi) complex values.
    """
    P, N = coef.shape
    modes = mode_numbers(P)
    g = np.empty((P, blocks.shape[1]), dtype=np.complex128)
    for i, n in enumerate(modes):
        g[i] = blocks[abs(int(n))] @ coef[i]
    ph = np.exp(1j * np.outer(modes, phis))
    return g.T @ ph


def solve_onebody(curve: GeneratingCurve, sources, wave: IncidentWave,
                  params: OneBodyParams) -> OneBodyResult:
    """Fill, factor, and solve the per-mode systems; report residual metrics.

    sources is a RingSourceSet for the sound-hard problem, or a pair
    (interior-side, exterior-side) when wave.k_minus is set. eps1 is the
    absolute L2 boundary-condition error on a grid x grid surface mesh;
    eps2 is populated when params.reference_far_value is given, as the
    relative mismatch of the scattered field at params.far_point.
    """
    transmission = wave.k_minus is not None
    if transmission:
        src_in, src_out = sources
        N = src_in.N
        if src_out.N != N:
            raise ValueError("interior and exterior ring counts must match")
    else:
        src_in = sources
        N = src_in.N
    P = params.P
    M = params.M if params.M is not None else int(np.ceil(1.2 * N))
    nodes = boundary_nodes(curve, M)

    tpairs = np.stack([nodes.rho, nodes.z], axis=1)
    if params.q is None:
        spairs = np.stack([src_in.rho, src_in.z], axis=1)
        if transmission:
            spairs = np.concatenate(
                [spairs, np.stack([src_out.rho, src_out.z], axis=1)]
            )
        q = max(P, suggest_q(tpairs, spairs, 1e-12, max_abs_n=P // 2))
    else:
        q = params.q

    if transmission:
        system = fill_transmission(nodes, src_in, src_out, wave.k, wave.k_minus, P, q)
        fhat_v, fhat_d = _surface_rhs(wave, nodes, P, want_value=True)
        rhs = np.concatenate([fhat_v, fhat_d], axis=1).ravel()
    else:
        system = fill_neumann(nodes, src_in, wave.k, P, q)
        rhs = _surface_rhs(wave, nodes, P, want_value=False).ravel()

    fac = factor(system, params.svd_tol)
    sol = apply_pinv(fac, rhs).reshape(P, -1)
    eta = np.ascontiguousarray(sol[:, :N])
    eta_minus = np.ascontiguousarray(sol[:, N:]) if transmission else None

    # boundary-condition residual on a fresh product grid; the t-grid is
    # the midpoint rule again, just at a different (coprime-ish) count
    G = params.grid
    phig = 2.0 * np.pi * (np.arange(G) + 0.5) / G
    gnodes = boundary_nodes(curve, G)
    gnormals = _node_normals(gnodes)
    blocks = fill_ring_blocks(
        wave.k, gnodes.rho, gnodes.z, src_in.rho, src_in.z, q, P // 2,
        normals=gnormals, want_value=transmission,
    )
    pts3 = _grid_points(gnodes, phig)
    nrm3 = _grid_point_normals(gnodes, phig)
    dui = wave.normal_deriv(pts3, nrm3).reshape(G, G)
    resid_d = _modal_surface_field(eta, blocks["nderiv"], phig) + dui
    if transmission:
        iblocks = fill_ring_blocks(
            wave.k_minus, gnodes.rho, gnodes.z, src_out.rho, src_out.z,
            q, P // 2, normals=gnormals,
        )
        ui = wave.field(pts3).reshape(G, G)
        resid_v = (
            _modal_surface_field(eta, blocks["value"], phig)
            - _modal_surface_field(eta_minus, iblocks["value"], phig)
            + ui
        )
        resid_d = resid_d - _modal_surface_field(eta_minus, iblocks["nderiv"], phig)
    area = (gnodes.rho * gnodes.speed)[:, None] * (np.pi / G) * (2.0 * np.pi / G)
    eps1 = float(np.sqrt(np.sum(np.abs(resid_d) ** 2 * area)))
    if transmission:
        eps1 = float(np.sqrt(eps1**2 + np.sum(np.abs(resid_v) ** 2 * area)))

    far = eval_field_onebody(eta.ravel(), src_in, wave.k,
                             np.asarray(params.far_point, dtype=float), q=P)[0]
    eps2 = None
    if params.reference_far_value is not None:
        ref = complex(params.reference_far_value)
        eps2 = float(abs(far - ref) / abs(ref))

    return OneBodyResult(
        eta=eta.ravel(), eta_minus=None if eta_minus is None else eta_minus.ravel(),
        P=P, N=N, q=q, eps1=eps1, eps2=eps2, far_value=complex(far),
        coef_norm=float(np.linalg.norm(sol)),
    )


def _grid_points(gnodes: BoundaryNodes, phis: np.ndarray) -> np.ndarray:
    T, L = gnodes.M, len(phis)
    pts = np.empty((T, L, 3))
    pts[:, :, 0] = gnodes.rho[:, None] * np.cos(phis)
    pts[:, :, 1] = gnodes.rho[:, None] * np.sin(phis)
    pts[:, :, 2] = gnodes.z[:, None]
    return pts.reshape(-1, 3)


def _grid_point_normals(gnodes: BoundaryNodes, phis: np.ndarray) -> np.ndarray:
    T, L = gnodes.M, len(phis)
    out = np.empty((T, L, 3))
    out[:, :, 0] = gnodes.nrho[:, None] * np.cos(phis)
    out[:, :, 1] = gnodes.nrho[:, None] * np.sin(phis)
    out[:, :, 2] = gnodes.nz[:, None]
    return out.reshape(-1, 3)
