"""A-posteriori error measures for periodic scattering solutions.

Every measure here is computed from the solved coefficients on grids the
solver never collocated on, so they are genuine checks rather than echoes
of the linear-system residual:

* eps_per  - quasiperiodicity and radiation-matching defect, sampled on
  a staggered wall grid sitting between the collocation nodes.
* eps_bc   - boundary-condition defect on a dense offset surface grid.
* eps_flux - energy-conservation defect of the propagating reflection and
  transmission amplitudes (only meaningful when nothing absorbs).

A solution is trustworthy when all three sit at the same small level;
eps_flux alone can flatter a solution since it only sees propagating
orders.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import boundary_nodes, rings_to_points
from .onebody import mode_numbers, ring_strengths
from .periodizer import (
    eval_aux,
    fill_C,
    fill_Q,
    midpoint_test_cell,
    rb_modes,
)
from .ringkernel import fill_ring_blocks
from .summation import DirectSummation

_WALL_GROUPS = ["x_value", "x_deriv", "y_value", "y_deriv",
                "top_value", "top_deriv", "down_value", "down_deriv"]


@dataclass
class WoodReport:
    """Proximity of the configuration to a Wood anomaly."""

    critical: bool
    orders: list
    min_rel_kz: float
    digits_lost: float


@dataclass
class ErrorReport:
    """Independent error measures attached to a solve result."""

    eps_bc: float
    eps_per: float
    eps_flux: Optional[float]
    flux_applicable: bool
    per_wall: dict
    wall_norm: float
    wood: WoodReport


def wood_check(wave, lattice, margin: float = 1e-3) -> WoodReport:
    """Scan every order that could cut on for near-zero vertical wavenumber.

    Independent of any solve: the order list is enumerated from scratch
    with a cutoff wide enough to contain the whole propagating circle.
    The digit-loss figure reflects that wall matching degrades like the
    inverse square root of the relative margin.
    """
    k = wave.k
    n0 = int(np.ceil(k * max(lattice.e_x, lattice.e_y) / np.pi)) + 1
    rb = rb_modes(wave, lattice, n0, wood_margin=margin)
    rel = np.abs(rb.kappa_z) / k
    crit = rb.wood
    min_rel = float(rel.min()) if rel.size else 1.0
    # cap at the 16 digits a double holds so the figure stays finite at
    # an exact anomaly
    digits = min(16.0, max(0.0, -0.5 * np.log10(max(min_rel, 1e-32))))
    orders = list(zip(rb.ms[crit].tolist(), rb.ns[crit].tolist()))
    return WoodReport(bool(np.any(crit)), orders, min_rel, float(digits))


def flux_error(result):
    """Energy defect of the propagating amplitudes.

    For a lossless configuration the propagating power in the reflected
    and transmitted orders must add up to the incident power; the
    incident wave itself carries amplitude A e^{i kz00 z0} in whichever
    wall-anchored family shares its direction of travel.

    Returns (defect, applicable); applicable is False when no order
    propagates (fully evanescent drive), where the measure is undefined.
    """
    problem = result.problem
    rb = problem.rb
    pr = rb.propagating
    if not np.any(pr):
        return None, False
    i00 = rb.order_index(0, 0)
    kz00 = float(rb.kappa_z[i00].real)
    amp = problem.wave.amplitude
    a = result.a.copy()
    b = result.b.copy()
    anchored = amp * np.exp(1j * kz00 * problem.cell.z0)
    if problem.wave.k_vec[2] >= 0.0:
        a[i00] += anchored
    else:
        b[i00] += anchored
    total = np.sum(rb.kappa_z[pr].real
                   * (np.abs(a[pr]) ** 2 + np.abs(b[pr]) ** 2))
    return float(abs(total - kz00 * abs(amp) ** 2)), True


def midpoint_operator(problem):
    """Staggered test grid and its ring-source wall matrix.

    The pair is independent of the auxiliary basis and mode cutoff, so
    convergence sweeps can compute it once and pass it to wall_error.
    """
    test = midpoint_test_cell(problem.cell)
    C = fill_C(problem.sources, test, problem.wave.k, problem.P,
               problem.q_dist, problem.alpha, problem.beta)
    return test, C


def wall_error(result, mid=None):
    """Weighted side-wall quasiperiodicity defect on a staggered grid.

    Returns (eps_per, per_wall, wall_norm).  eps_per is the root of the
    gap-weighted square sum over the four side-wall condition groups
    (left/right and back/front, value and normal derivative); this is
    the periodicity error proper.  per_wall additionally breaks out the
    top and bottom radiation-matching defects, which are diagnostics of
    the plane-wave expansion rather than of quasiperiodicity and so do
    not enter the scalar.  wall_norm is the matching norm of the
    radiating field traces on the top and bottom walls for scale.  mid
    accepts a precomputed midpoint_operator pair.
    """
    problem = result.problem
    test, C = mid if mid is not None else midpoint_operator(problem)
    Q = fill_Q(test, problem.basis, problem.rb, problem.wave.k,
               problem.alpha, problem.beta)
    xi = np.concatenate([result.d, result.a, result.b])
    r = C @ result.eta + Q @ xi
    m2 = test.nodes_per_wall
    w = {"x": test.w_lr, "y": test.w_bf, "top": test.w_td,
         "down": test.w_td}
    per_wall = {}
    total = 0.0
    for i, name in enumerate(_WALL_GROUPS):
        wt = w[name.rsplit("_", 1)[0]]
        s = float(np.sum(wt * np.abs(r[i * m2:(i + 1) * m2]) ** 2))
        per_wall[name] = np.sqrt(s)
        if not name.startswith(("top", "down")):
            total += s
    rb = problem.rb
    up = np.exp(1j * (test.top[:, :1] * rb.kappa_x[None, :]
                      + test.top[:, 1:2] * rb.kappa_y[None, :])) @ result.a
    dn = np.exp(1j * (test.down[:, :1] * rb.kappa_x[None, :]
                      + test.down[:, 1:2] * rb.kappa_y[None, :])) @ result.b
    wall_norm = float(np.sqrt(np.sum(test.w_td * np.abs(up) ** 2)
                              + np.sum(test.w_td * np.abs(dn) ** 2)))
    return float(np.sqrt(total)), per_wall, wall_norm


def _modal_traces(k, gnodes, sources, eta, P, q, want_value):
    """Central-representation value/derivative grids via the mode blocks.

    Returns (value, deriv) arrays of shape (G, G_phi); value is None when
    not requested.  G_phi equals the ring count G.
    """
    G = gnodes.M
    normals = np.stack([gnodes.nrho, gnodes.nz], axis=1)
    got = fill_ring_blocks(k, gnodes.rho, gnodes.z, sources.rho, sources.z,
                           q, P // 2, normals=normals, want_value=want_value)
    modes = mode_numbers(P)
    c = np.asarray(eta).reshape(P, sources.N)
    E = np.exp(1j * modes[:, None] * (2.0 * np.pi * np.arange(G) / G)[None, :])

    def synth(blocks):
        tr = np.empty((P, G), dtype=np.complex128)
        for i, n in enumerate(modes):
            tr[i] = blocks[abs(int(n))] @ c[i]
        return tr.T @ E

    value = synth(got["value"]) if want_value else None
    return value, synth(got["nderiv"])


def boundary_error(result, grid: int = 96, backend=None):
    """Area-weighted L2 defect of the boundary condition.

    The surface is sampled on a grid x grid mesh in the generating
    parameter and azimuth, staggered off the collocation nodes.  All four
    field contributions (central representation, the eight phased
    copies, the auxiliary basis, the incident wave) are evaluated
    afresh; for transmission problems the value and derivative defects
    are combined in one norm.
    """
    problem = result.problem
    backend = backend or DirectSummation()
    wave = problem.wave
    k = wave.k
    G = grid
    gnodes = boundary_nodes(problem.curve, G)
    phis = 2.0 * np.pi * np.arange(G) / G
    want_value = problem.kind == "transmission"

    val_c, der_c = _modal_traces(k, gnodes, problem.sources, result.eta,
                                 problem.P, problem.q_self, want_value)

    cphi, sphi = np.cos(phis), np.sin(phis)
    pts = np.empty((G * G, 3))
    nrm = np.empty((G * G, 3))
    pts[:, 0] = (gnodes.rho[:, None] * cphi[None, :]).ravel()
    pts[:, 1] = (gnodes.rho[:, None] * sphi[None, :]).ravel()
    pts[:, 2] = np.repeat(gnodes.z, G)
    nrm[:, 0] = (gnodes.nrho[:, None] * cphi[None, :]).ravel()
    nrm[:, 1] = (gnodes.nrho[:, None] * sphi[None, :]).ravel()
    nrm[:, 2] = np.repeat(gnodes.nz, G)

    sig = ring_strengths(result.eta, problem.P, problem.N, problem.q_dist)
    src = rings_to_points(problem.sources.rho, problem.sources.z,
                          problem.q_dist)
    shifts = [(m, n) for m in (-1, 0, 1) for n in (-1, 0, 1)
              if (m, n) != (0, 0)]
    all_src = np.concatenate([src + m * problem.lattice.e1
                              + n * problem.lattice.e2 for m, n in shifts])
    wts = np.concatenate([problem.alpha ** m * problem.beta ** n
                          * sig.ravel() for m, n in shifts])
    vals_i, grads_i = backend.potentials_and_gradients(k, all_src, wts, pts)
    der_i = np.einsum("tc,tc->t", grads_i, nrm).reshape(G, G)

    av, ag = eval_aux(problem.basis, k, pts, want_grad=True)
    der_a = np.einsum("tcb,tc,b->t", ag, nrm, result.d).reshape(G, G)

    der = der_c + der_i + der_a + wave.normal_deriv(pts, nrm).reshape(G, G)
    if want_value:
        val = val_c + vals_i.reshape(G, G) + (av @ result.d).reshape(G, G) \
            + wave.field(pts).reshape(G, G)
        vi, di = _modal_traces(wave.k_minus, gnodes, problem.sources_out,
                               result.eta_minus, problem.P, problem.q_self,
                               True)
        resid2 = np.abs(val - vi) ** 2 + np.abs(der - di) ** 2
    else:
        resid2 = np.abs(der) ** 2

    dA = (gnodes.rho * gnodes.speed)[:, None] * (np.pi / G) * (2 * np.pi / G)
    return float(np.sqrt(np.sum(resid2 * dA)))


def error_report(result, grid: int = 96, wood_margin: float = 1e-3,
                 backend=None, mid=None) -> ErrorReport:
    """Compute all independent measures and attach them to the result."""
    eps_per, per_wall, wall_norm = wall_error(result, mid=mid)
    eps_bc = boundary_error(result, grid=grid, backend=backend)
    eps_flux, applicable = flux_error(result)
    wood = wood_check(result.problem.wave, result.problem.lattice,
                      wood_margin)
    report = ErrorReport(eps_bc=eps_bc, eps_per=eps_per, eps_flux=eps_flux,
                         flux_applicable=applicable, per_wall=per_wall,
                         wall_norm=wall_norm, wood=wood)
    result.diagnostics = report
    return report


def scan_parameter(run_one, values):
    """Run a user-supplied single-point solve over a list of values.

    run_one(value) must return a (result, report) pair; results are
    collected as a list of dicts ready for tabulation, one per value, in
    input order.  Failures propagate: a scan is only as good as its
    worst point.
    """
    rows = []
    for v in values:
        t0 = time.perf_counter()
        result, report = run_one(v)
        dt = time.perf_counter() - t0
        rows.append({
            "value": v,
            "eps_bc": report.eps_bc,
            "eps_per": report.eps_per,
            "eps_flux": report.eps_flux,
            "iters": result.iterations,
            "seconds": dt,
        })
    return rows
