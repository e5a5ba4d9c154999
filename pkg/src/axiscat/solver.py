"""Schur-complement GMRES solver for the periodized scattering system.

The full linear system couples the ring-source coefficients eta on the
obstacle with the wall unknowns xi = [d; a; b] (auxiliary plus upward and
downward plane-wave amplitudes):

    [ A  B~ ] [eta]   [f]        A  = A0 + A_else,   B~ = [B, 0, 0]
    [ C  Q  ] [xi ] = [0]

Eliminating xi = -Q^+ C eta and right-preconditioning with the one-body
pseudoinverse A0^+ (treating A0 A0^+ as the identity on its range) gives

    (I + A_else A0^+ - B Q^+ C A0^+) eta~ = f,     eta = A0^+ eta~,

which GMRES solves to a tight relative tolerance; iteration counts stay
small because the periodization terms are compact perturbations of the
preconditioned one-body operator.

All pseudoinverse applications are truncated-SVD in the V Sigma^+ (U* x)
order.  A_else is cached densely in mode space (falling back to a
disk-backed memmap above a byte budget) because its build costs the same
as a single matrix-free application, after which every GMRES iteration
is a plain matrix-vector product.
"""

from __future__ import annotations

import os
import tempfile
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .geometry import (
    GeneratingCurve,
    RingSourceSet,
    _inside_curve,
    boundary_nodes,
    place_sources,
    rings_to_points,
    surface_points_and_normals,
)
from .onebody import (
    IncidentWave,
    ModeBlockFactor,
    _surface_rhs,
    apply_pinv,
    factor,
    fill_neumann,
    fill_transmission,
    mode_numbers,
    ring_strengths,
)
from .periodizer import (
    AuxBasis,
    Lattice,
    RayleighBlochSet,
    UnitCell,
    bloch_phases,
    build_unit_cell,
    default_m1,
    default_z0,
    eval_aux,
    fill_B,
    fill_C,
    fill_Q,
    rb_modes,
    spherical_aux,
)
from .ringkernel import suggest_q
from .summation import DirectSummation, fill_image_matrices


class GmresNotConverged(RuntimeError):
    """Raised when the Arnoldi loop exhausts maxit; carries the best iterate."""

    def __init__(self, history, solution):
        super().__init__(
            f"GMRES did not reach tolerance in {len(history) - 1} iterations "
            f"(last relative residual {history[-1]:.3e})")
        self.history = history
        self.solution = solution


def gmres(operator, rhs, tol=1e-12, maxit=300):
    """No-restart GMRES: modified Gram-Schmidt plus one reorthogonalization.

    Returns (solution, history) where history[j] is the relative residual
    after j Arnoldi steps; the least-squares residual is recomputed from
    the Hessenberg factor each step, so the history is monotone.
    """
    b = np.asarray(rhs, dtype=np.complex128).ravel()
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), [0.0]
    maxit = min(maxit, b.size)
    V = [b / bnorm]
    H = np.zeros((maxit + 1, maxit), dtype=np.complex128)
    history = [1.0]
    y = np.zeros(0)
    for j in range(maxit):
        # np.array, not asarray: an operator that hands back its input
        # (e.g. the identity) must not let MGS zero the basis in place
        w = np.array(operator(V[j]), dtype=np.complex128).ravel()
        for _ in range(2):
            for i in range(j + 1):
                hij = np.vdot(V[i], w)
                H[i, j] += hij
                w -= hij * V[i]
        hnext = np.linalg.norm(w)
        H[j + 1, j] = hnext
        e1 = np.zeros(j + 2, dtype=np.complex128)
        e1[0] = bnorm
        y = np.linalg.lstsq(H[:j + 2, :j + 1], e1, rcond=None)[0]
        res = float(np.linalg.norm(H[:j + 2, :j + 1] @ y - e1) / bnorm)
        history.append(res)
        if res <= tol or hnext == 0.0:
            return np.stack(V[:j + 1], axis=1) @ y, history
        V.append(w / hnext)
    raise GmresNotConverged(history, np.stack(V[:maxit], axis=1) @ y)


_NEIGHBORS = [(m, n) for m in (-1, 0, 1) for n in (-1, 0, 1) if (m, n) != (0, 0)]


def _neighbor_shifts_phases(lattice, alpha, beta):
    shifts = np.array([m * lattice.e1 + n * lattice.e2 for m, n in _NEIGHBORS])
    phases = np.array([alpha ** m * beta ** n for m, n in _NEIGHBORS],
                      dtype=np.complex128)
    return shifts, phases


def _mode_coefficients(samples, P, q):
    """Per-ring Fourier coefficients of (R, q) angle samples: (P, R)."""
    fhat = np.fft.fft(samples, axis=1) / q
    return fhat[:, mode_numbers(P) % q].T


def fill_A_else(nodes, sources, k, P, q, lattice, alpha, beta,
                kind="neumann", out=None):
    """Dense mode-space matrix of the eight phased neighbor copies.

    Rows are mode-major with M rows per mode (normal derivative) for the
    sound-hard problem, or 2M rows per mode (values then derivatives) for
    transmission; columns follow the mode-major coefficient layout of the
    central representation.  Interior transmission unknowns never couple
    to the copies, so they simply have no columns here.

    out may be a preallocated complex array or memmap of the right shape,
    which the fill streams into one target ring at a time.
    """
    M, N = nodes.M, sources.N
    want_value = kind == "transmission"
    rows_per = 2 * M if want_value else M
    shape = (P * rows_per, P * N)
    if out is None:
        out = np.empty(shape, dtype=np.complex128)
    if out.shape != shape:
        raise ValueError(f"output array must have shape {shape}")

    src_pts = rings_to_points(sources.rho, sources.z, q)
    shifts, phases = _neighbor_shifts_phases(lattice, alpha, beta)
    phis = 2.0 * np.pi * np.arange(q) / q
    cphi, sphi = np.cos(phis), np.sin(phis)
    bins = mode_numbers(P) % q
    row0 = np.arange(P) * rows_per

    def to_modes(K):
        block = np.fft.ifft(K.reshape(q, N, q), axis=2)[:, :, bins]
        block = (np.fft.fft(block, axis=0) / q)[bins]
        return block.transpose(0, 2, 1).reshape(P, P * N)

    for t in range(M):
        tpts = np.column_stack([nodes.rho[t] * cphi, nodes.rho[t] * sphi,
                                np.full(q, nodes.z[t])])
        tnrm = np.column_stack([nodes.nrho[t] * cphi, nodes.nrho[t] * sphi,
                                np.full(q, nodes.nz[t])])
        V, D = fill_image_matrices(k, src_pts, tpts, tnrm, shifts, phases,
                                   want_value=want_value)
        if want_value:
            out[row0 + t, :] = to_modes(V)
            out[row0 + M + t, :] = to_modes(D)
        else:
            out[row0 + t, :] = to_modes(D)
    return out


def apply_A_else(nodes, sources, k, P, q, lattice, alpha, beta, eta,
                 kind="neumann", backend=None):
    """Matrix-free reference application of the neighbor-copy operator.

    Pipeline: FFT the mode coefficients to q point strengths per ring,
    evaluate the 8 q N phased image sources at the q M boundary targets
    through the summation backend, and FFT the boundary traces back to
    mode coefficients.  fill_A_else must agree with this to rounding; the
    dense path exists purely as an iteration-speed cache.
    """
    backend = backend or DirectSummation()
    M, N = nodes.M, sources.N
    eta = np.asarray(eta, dtype=np.complex128).ravel()
    if eta.size != P * N:
        raise ValueError("eta must hold P*N exterior coefficients")
    if np.all(eta == 0.0):
        rows = 2 * M if kind == "transmission" else M
        return np.zeros(P * rows, dtype=np.complex128)

    sig = ring_strengths(eta, P, N, q)
    src = rings_to_points(sources.rho, sources.z, q)
    shifts, phases = _neighbor_shifts_phases(lattice, alpha, beta)
    all_src = (src[None, :, :] + shifts[:, None, :]).reshape(-1, 3)
    weights = (phases[:, None] * sig.ravel()[None, :]).ravel()
    tpts, tnrm = surface_points_and_normals(nodes, q)
    vals, grads = backend.potentials_and_gradients(k, all_src, weights, tpts)
    dn = np.einsum("tc,tc->t", grads, tnrm).reshape(M, q)
    dhat = _mode_coefficients(dn, P, q)
    if kind == "neumann":
        return np.ascontiguousarray(dhat).ravel()
    vhat = _mode_coefficients(vals.reshape(M, q), P, q)
    return np.concatenate([vhat, dhat], axis=1).ravel()


def fill_aux_boundary(nodes, basis, k, P, q, kind="neumann"):
    """Auxiliary-basis boundary coupling for either basis kind.

    Spherical harmonics use the exact single-mode closed form; proxy
    monopoles need the q-point azimuthal quadrature per target ring since
    each exterior point source excites every mode.
    """
    if basis.kind == "spherical_harmonics":
        return fill_B(nodes, basis.p, k, P, kind=kind)
    M, nb = nodes.M, basis.count
    want_value = kind == "transmission"
    rows_per = 2 * M if want_value else M
    out = np.empty((P * rows_per, nb), dtype=np.complex128)
    phis = 2.0 * np.pi * np.arange(q) / q
    cphi, sphi = np.cos(phis), np.sin(phis)
    row0 = np.arange(P) * rows_per
    bins = mode_numbers(P) % q
    zero = np.zeros((1, 3))
    one = np.ones(1, dtype=np.complex128)
    for t in range(M):
        tpts = np.column_stack([nodes.rho[t] * cphi, nodes.rho[t] * sphi,
                                np.full(q, nodes.z[t])])
        tnrm = np.column_stack([nodes.nrho[t] * cphi, nodes.nrho[t] * sphi,
                                np.full(q, nodes.nz[t])])
        V, D = fill_image_matrices(k, basis.points, tpts, tnrm, zero, one,
                                   want_value=want_value)
        if want_value:
            out[row0 + t, :] = (np.fft.fft(V, axis=0) / q)[bins]
            out[row0 + M + t, :] = (np.fft.fft(D, axis=0) / q)[bins]
        else:
            out[row0 + t, :] = (np.fft.fft(D, axis=0) / q)[bins]
    return out


@dataclass
class PeriodicParams:
    """Numerical knobs for the periodized solve; None means auto."""

    N: int
    P: int
    M: Optional[int] = None
    q_self: Optional[int] = None
    q_dist: Optional[int] = None
    tau: float = 0.1
    scheme: str = "complexified"
    p: int = 24
    n0: int = 13
    m1: Optional[int] = None
    z0: Optional[float] = None
    svd_tol: float = 1e-10
    gmres_tol: float = 1e-12
    gmres_maxit: int = 300
    wood_margin: float = 1e-3
    storage: str = "auto"
    dense_budget_bytes: int = 1_200_000_000


@dataclass
class PeriodicProblem:
    """Everything assembled and factored, ready for (repeated) solves."""

    kind: str
    curve: GeneratingCurve
    wave: IncidentWave
    lattice: Lattice
    cell: UnitCell
    rb: RayleighBlochSet
    basis: AuxBasis
    nodes: object
    sources: RingSourceSet
    sources_out: Optional[RingSourceSet]
    P: int
    N: int
    M: int
    q_self: int
    q_dist: int
    alpha: complex
    beta: complex
    a0_fac: ModeBlockFactor
    a_else: np.ndarray
    B: np.ndarray
    C: np.ndarray
    q_u: np.ndarray
    q_sinv: np.ndarray
    q_vh: np.ndarray
    q_scale: np.ndarray
    rhs: np.ndarray
    params: PeriodicParams
    timings: dict
    warnings: list
    memmap_path: Optional[str] = None

    @property
    def rows_per_mode(self) -> int:
        return 2 * self.M if self.kind == "transmission" else self.M

    def eta_exterior(self, y):
        """Exterior coefficient part (P*N,) of a stacked unknown vector."""
        if self.kind == "neumann":
            return y
        return np.ascontiguousarray(
            y.reshape(self.P, 2, self.N)[:, 0, :]).ravel()

    def eta_interior(self, y):
        if self.kind == "neumann":
            return None
        return np.ascontiguousarray(
            y.reshape(self.P, 2, self.N)[:, 1, :]).ravel()

    def apply_q_pinv(self, w):
        y = self.q_vh.conj().T @ (self.q_sinv * (self.q_u.conj().T @ w))
        return self.q_scale * y

    def close(self):
        """Release the disk-backed neighbor-copy cache, if any."""
        if self.memmap_path is not None:
            a = self.a_else
            self.a_else = None
            del a
            try:
                os.unlink(self.memmap_path)
            except OSError:
                pass
            self.memmap_path = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def _truncated_svd(A, tol):
    u, s, vh = np.linalg.svd(A, full_matrices=False)
    keep = s > tol * s[0]
    return u[:, keep], 1.0 / s[keep], vh[keep]


def _q_column_scale(Q, basis, rb, gap):
    """Diagonal right scaling for the wall least-squares solve.

    Every plane-wave column is anchored on its own wall, so a steeply
    evanescent order still samples at O(1) there even though its true
    coefficient can be no larger than exp(-|Im kz| * gap), with gap the
    clearance between the obstacle and that wall.  On a finite wall grid
    the steep orders alias onto smooth ones, and the plain min-norm
    solution smears weight across each aliased pair, which wrecks the
    recovered expansion.  Weighting column j by its coefficient bound
    makes the min-norm pick the smooth member (the spurious partner is
    suppressed by the squared weight ratio) and quietly truncates orders
    whose reach falls below the svd cutoff.

    Auxiliary columns get plain unit-norm scaling instead: the regular
    basis decays fast in degree once l exceeds k * (cell circumradius),
    and without rescaling the relative svd threshold would silently
    discard exactly the degrees a convergence sweep is trying to add.
    Rescaling costs nothing in precision because every recovered
    coefficient only ever multiplies its own column.
    """
    nb = basis.count
    aux = np.linalg.norm(Q[:, :nb], axis=0)
    aux[aux < 1e-280] = 1.0
    decay = np.exp(-np.abs(np.imag(rb.kappa_z)) * gap)
    return np.concatenate([1.0 / aux, decay, decay])


def assemble_periodic(curve, wave, lattice, params, kind="neumann",
                      basis=None):
    """Build and factor every block of the periodized system.

    Raises ValueError for geometric impossibilities (obstacle overlapping
    its neighbors or the top/bottom walls) and undersized wall grids.
    Wood-critical diffraction orders produce warning strings on the
    returned problem rather than a failure; the solve may lose digits.
    """
    t_fill = time.perf_counter()
    k = wave.k
    P, N = params.P, params.N
    if P % 2 or P < 2:
        raise ValueError("P must be a positive even integer")
    M = params.M or int(np.ceil(1.2 * N))
    if 2.0 * curve.max_rho() >= lattice.min_period:
        raise ValueError("obstacle diameter exceeds the lattice period")
    z0 = params.z0 or default_z0(curve, lattice)
    if curve.half_height() >= z0:
        raise ValueError("obstacle must sit strictly inside |z| < z0")
    m1 = params.m1 or default_m1(k)
    m1_floor = int(np.ceil(4.0 * k / np.pi))
    if m1 < m1_floor:
        raise ValueError(f"m1 must be at least {m1_floor} to resolve "
                         "oscillation across a wall at this wavenumber")
    if kind == "transmission" and wave.k_minus is None:
        raise ValueError("transmission problems need an interior wavenumber")
    if basis is None:
        basis = spherical_aux(params.p)
    if basis.kind == "spherical_harmonics" and 2 * basis.p >= P:
        raise ValueError(f"auxiliary degree p={basis.p} needs P > 2p so "
                         "every harmonic order lands on a retained mode")

    nodes = boundary_nodes(curve, M)
    sources = place_sources(curve, N, params.tau, scheme=params.scheme,
                            side="interior")
    sources_out = None
    if kind == "transmission":
        sources_out = place_sources(curve, N, params.tau,
                                    scheme=params.scheme, side="exterior")

    cell = build_unit_cell(lattice, z0, m1)
    rb = rb_modes(wave, lattice, params.n0, params.wood_margin)
    alpha, beta = bloch_phases(wave, lattice)

    tg = np.column_stack([nodes.rho, nodes.z])
    sg = np.column_stack([sources.rho, sources.z])
    q_self = params.q_self or max(P, suggest_q(tg, sg, 1e-12, P // 2))
    if params.q_dist is None:
        img_t = np.column_stack([lattice.min_period - nodes.rho, nodes.z])
        wall_t = np.column_stack([np.hypot(cell.top[:, 0], cell.top[:, 1]),
                                  cell.top[:, 2]])
        q_dist = max(P, suggest_q(img_t, sg, 1e-12, P // 2),
                     suggest_q(wall_t, sg, 1e-12, P // 2))
    else:
        q_dist = params.q_dist
    if q_dist < P:
        raise ValueError("q_dist must be at least P")

    warnings = []
    if np.any(rb.wood):
        orders = list(zip(rb.ms[rb.wood].tolist(), rb.ns[rb.wood].tolist()))
        margin = float(np.min(np.abs(rb.kappa_z[rb.wood])) / k)
        warnings.append(
            f"Wood-critical orders {orders}: min |kappa_z|/k = {margin:.2e}; "
            "the scheme loses roughly half the margin's digits here")

    if kind == "transmission":
        system = fill_transmission(nodes, sources, sources_out, k,
                                   wave.k_minus, P, q_self)
        fv, fd = _surface_rhs(wave, nodes, P, want_value=True)
        rhs = np.concatenate([fv, fd], axis=1).ravel()
    else:
        system = fill_neumann(nodes, sources, k, P, q_self)
        rhs = np.ascontiguousarray(_surface_rhs(wave, nodes, P,
                                                want_value=False)).ravel()

    B = fill_aux_boundary(nodes, basis, k, P, q_dist, kind=kind)
    C = fill_C(sources, cell, k, P, q_dist, alpha, beta)
    Q = fill_Q(cell, basis, rb, k, alpha, beta)

    rows_per = 2 * M if kind == "transmission" else M
    a_shape = (P * rows_per, P * N)
    nbytes = a_shape[0] * a_shape[1] * 16
    memmap_path = None
    if params.storage == "memmap" or (params.storage == "auto"
                                      and nbytes > params.dense_budget_bytes):
        fd_, memmap_path = tempfile.mkstemp(prefix="axiscat_aelse_",
                                            suffix=".bin")
        os.close(fd_)
        a_else = np.memmap(memmap_path, dtype=np.complex128, mode="w+",
                           shape=a_shape)
    else:
        a_else = np.empty(a_shape, dtype=np.complex128)
    fill_A_else(nodes, sources, k, P, q_dist, lattice, alpha, beta,
                kind=kind, out=a_else)
    t_factor = time.perf_counter()

    a0_fac = factor(system, tol=params.svd_tol)
    q_scale = _q_column_scale(Q, basis, rb, z0 - curve.half_height())
    q_u, q_sinv, q_vh = _truncated_svd(Q * q_scale[None, :], params.svd_tol)
    t_done = time.perf_counter()

    return PeriodicProblem(
        kind=kind, curve=curve, wave=wave, lattice=lattice, cell=cell,
        rb=rb, basis=basis, nodes=nodes, sources=sources,
        sources_out=sources_out, P=P, N=N, M=M, q_self=q_self,
        q_dist=q_dist, alpha=alpha, beta=beta, a0_fac=a0_fac,
        a_else=a_else, B=B, C=C, q_u=q_u, q_sinv=q_sinv, q_vh=q_vh,
        q_scale=q_scale, rhs=rhs, params=params,
        timings={"fill": t_factor - t_fill, "factor": t_done - t_factor},
        warnings=warnings, memmap_path=memmap_path,
    )


def rebuild_walls(problem, p=None, n0=None, basis=None, m1=None):
    """New problem with a different auxiliary basis and/or mode cutoff.

    Reuses the obstacle-side blocks (A0 factor, A_else, right-hand side)
    and the C matrix whenever the wall grid is unchanged, which makes
    convergence sweeps over p and N0 far cheaper than re-assembly.
    """
    params = replace(problem.params,
                     p=p if p is not None else problem.params.p,
                     n0=n0 if n0 is not None else problem.params.n0,
                     m1=m1 if m1 is not None else problem.params.m1)
    if basis is None:
        basis = spherical_aux(params.p) \
            if problem.basis.kind == "spherical_harmonics" else problem.basis
    cell = problem.cell
    C = problem.C
    if m1 is not None and m1 != problem.cell.m1:
        cell = build_unit_cell(problem.lattice, problem.cell.z0, m1)
        C = fill_C(problem.sources, cell, problem.wave.k, problem.P,
                   problem.q_dist, problem.alpha, problem.beta)
    rb = problem.rb
    if n0 is not None and n0 != problem.params.n0:
        rb = rb_modes(problem.wave, problem.lattice, n0,
                      problem.params.wood_margin)
    t0 = time.perf_counter()
    B = problem.B
    if basis is not problem.basis:
        B = fill_aux_boundary(problem.nodes, basis, problem.wave.k,
                              problem.P, problem.q_dist, kind=problem.kind)
    Q = fill_Q(cell, basis, rb, problem.wave.k, problem.alpha, problem.beta)
    t1 = time.perf_counter()
    q_scale = _q_column_scale(Q, basis, rb,
                              cell.z0 - problem.curve.half_height())
    q_u, q_sinv, q_vh = _truncated_svd(Q * q_scale[None, :], params.svd_tol)
    t2 = time.perf_counter()
    return replace(problem, params=params, basis=basis, cell=cell, rb=rb,
                   B=B, C=C, q_u=q_u, q_sinv=q_sinv, q_vh=q_vh,
                   q_scale=q_scale,
                   timings={"fill": t1 - t0, "factor": t2 - t1},
                   memmap_path=None)


@dataclass
class SolveResult:
    """Coefficients and run records of one periodized solve."""

    problem: PeriodicProblem
    eta: np.ndarray
    eta_minus: Optional[np.ndarray]
    d: np.ndarray
    a: np.ndarray
    b: np.ndarray
    iterations: int
    residual: float
    residual_history: list
    timings: dict
    warnings: list
    diagnostics: Optional[object] = None


def schur_operator(problem):
    """The preconditioned map eta~ -> (I + A_else A0^+ - B Q^+ C A0^+) eta~."""
    nb = problem.basis.count

    def op(x):
        y = apply_pinv(problem.a0_fac, x)
        e = problem.eta_exterior(y)
        out = x + problem.a_else @ e
        xi = problem.apply_q_pinv(problem.C @ e)
        out -= problem.B @ xi[:nb]
        return out

    return op


def solve_periodic(problem) -> SolveResult:
    """Run GMRES on the Schur form and recover all coefficient sets."""
    t0 = time.perf_counter()
    op = schur_operator(problem)
    tilde, history = gmres(op, problem.rhs, tol=problem.params.gmres_tol,
                           maxit=problem.params.gmres_maxit)
    y = apply_pinv(problem.a0_fac, tilde)
    eta = problem.eta_exterior(y)
    xi = -problem.apply_q_pinv(problem.C @ eta)
    nb, nrb = problem.basis.count, problem.rb.count
    timings = dict(problem.timings)
    timings["solve"] = time.perf_counter() - t0
    return SolveResult(
        problem=problem,
        eta=eta,
        eta_minus=problem.eta_interior(y),
        d=xi[:nb],
        a=xi[nb:nb + nrb],
        b=xi[nb + nrb:],
        iterations=len(history) - 1,
        residual=history[-1],
        residual_history=history,
        timings=timings,
        warnings=list(problem.warnings),
    )


def rb_field(rb, coefs, points, z0, side):
    """Plane-wave expansion field, anchored at its own wall.

    side "up" evaluates sum_j a_j e^{i(kx x + ky y + kz (z - z0))}; side
    "down" uses the -kz branch anchored at -z0.  Valid for |z| >= z0 but
    well defined everywhere.
    """
    pts = np.asarray(points, dtype=np.float64)
    phase = pts[:, :1] * rb.kappa_x[None, :] + pts[:, 1:2] * rb.kappa_y[None, :]
    if side == "up":
        zfac = rb.kappa_z[None, :] * (pts[:, 2:3] - z0)
    elif side == "down":
        zfac = -rb.kappa_z[None, :] * (pts[:, 2:3] + z0)
    else:
        raise ValueError("side must be 'up' or 'down'")
    return np.exp(1j * (phase + zfac)) @ coefs


def _copies_field(problem, eta, points, q, backend):
    """All nine phased near copies of the central representation."""
    sig = ring_strengths(eta, problem.P, problem.N, q)
    src = rings_to_points(problem.sources.rho, problem.sources.z, q)
    vals = np.zeros(points.shape[0], dtype=np.complex128)
    for m in (-1, 0, 1):
        for n in (-1, 0, 1):
            shift = m * problem.lattice.e1 + n * problem.lattice.e2
            w = problem.alpha ** m * problem.beta ** n
            vals += w * backend.potentials(problem.wave.k, src + shift,
                                           sig.ravel(), points)
    return vals


def eval_field_periodic(result, points, total=False, q=None, backend=None,
                        neighbor="error"):
    """Scattered (or total) field and an inside-obstacle mask.

    Points with |z| <= z0 use the slab representation (nine phased copies
    plus the auxiliary basis); points beyond the walls use the upward or
    downward plane-wave expansion.  The slab representation is built
    around the central cell, so accuracy degrades for points far outside
    it.  Points inside the central obstacle are flagged: they get the
    interior field for transmission problems and zero for sound-hard
    ones.  Points inside a neighboring copy cannot be represented; they
    raise ValueError, or with neighbor="flag" are marked inside with NaN
    values (only the central copy carries an interior representation).
    """
    problem = result.problem
    backend = backend or DirectSummation()
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    vals = np.zeros(pts.shape[0], dtype=np.complex128)
    z0 = problem.cell.z0
    above = pts[:, 2] > z0
    below = pts[:, 2] < -z0
    slab = ~(above | below)

    if np.any(above):
        vals[above] = rb_field(problem.rb, result.a, pts[above], z0, "up")
    if np.any(below):
        vals[below] = rb_field(problem.rb, result.b, pts[below], z0, "down")

    inside = np.zeros(pts.shape[0], dtype=bool)
    in_neighbor = np.zeros(pts.shape[0], dtype=bool)
    if np.any(slab):
        sl = pts[slab]
        slab_idx = np.flatnonzero(slab)
        for m in (-1, 0, 1):
            for n in (-1, 0, 1):
                shift = m * problem.lattice.e1 + n * problem.lattice.e2
                hit = _inside_curve(problem.curve,
                                    np.hypot(sl[:, 0] - shift[0],
                                             sl[:, 1] - shift[1]), sl[:, 2])
                if (m, n) == (0, 0):
                    inside[slab_idx] = hit
                elif np.any(hit):
                    if neighbor == "error":
                        raise ValueError("point lies inside a neighboring "
                                         "copy of the obstacle")
                    in_neighbor[slab_idx[hit]] = True
        ext_idx = slab_idx[~inside[slab_idx] & ~in_neighbor[slab_idx]]
        if ext_idx.size:
            ext = pts[ext_idx]
            if q is None:
                tg = np.column_stack([np.hypot(ext[:, 0], ext[:, 1]),
                                      ext[:, 2]])
                sg = np.column_stack([problem.sources.rho, problem.sources.z])
                q = max(problem.q_dist,
                        min(suggest_q(tg, sg, 1e-12, problem.P // 2),
                            max(1200, problem.q_dist)))
            u = _copies_field(problem, result.eta, ext, q, backend)
            u += eval_aux(problem.basis, problem.wave.k, ext) @ result.d
            vals[ext_idx] = u

    if np.any(inside):
        ipts = pts[inside]
        if problem.kind == "transmission":
            qi = q if q is not None else problem.q_dist
            sig = ring_strengths(result.eta_minus, problem.P, problem.N, qi)
            src = rings_to_points(problem.sources_out.rho,
                                  problem.sources_out.z, qi)
            vals[inside] = backend.potentials(problem.wave.k_minus, src,
                                              sig.ravel(), ipts)
        else:
            vals[inside] = 0.0

    if np.any(in_neighbor):
        vals[in_neighbor] = np.nan * (1 + 1j)
        inside |= in_neighbor

    if total:
        out = ~inside
        vals[out] += problem.wave.field(pts[out])
    return vals, inside
