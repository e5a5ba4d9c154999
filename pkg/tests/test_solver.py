import numpy as np
import pytest

from axiscat.geometry import boundary_nodes, make_curve, place_sources
from axiscat.onebody import IncidentWave, mode_numbers
from axiscat.periodizer import Lattice, bloch_phases
from axiscat.solver import (
    GmresNotConverged,
    PeriodicParams,
    apply_A_else,
    assemble_periodic,
    eval_field_periodic,
    fill_A_else,
    gmres,
    rebuild_walls,
    solve_periodic,
)


# ---------------------------------------------------------------- gmres


def test_gmres_identity_and_diagonal():
    rng = np.random.default_rng(3)
    b = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    x, hist = gmres(lambda v: v, b)
    assert np.allclose(x, b, atol=1e-14)
    assert len(hist) == 2 and hist[-1] < 1e-14

    d = np.linspace(1.0, 4.0, 8)
    x, hist = gmres(lambda v: d * v, b, tol=1e-13)
    assert np.max(np.abs(d * x - b)) < 1e-12 * np.linalg.norm(b)
    # residual history never increases
    assert all(h2 <= h1 + 1e-15 for h1, h2 in zip(hist, hist[1:]))


def test_gmres_zero_rhs_short_circuits():
    x, hist = gmres(lambda v: 2.0 * v, np.zeros(5, dtype=complex))
    assert np.all(x == 0) and hist == [0.0]


def test_gmres_dimension_cap_and_nonconvergence():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    b = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    # full-dimension Krylov space solves any nonsingular system
    x, hist = gmres(lambda v: A @ v, b, tol=1e-12, maxit=50)
    assert np.linalg.norm(A @ x - b) < 1e-10 * np.linalg.norm(b)
    assert len(hist) <= 7

    with pytest.raises(GmresNotConverged) as exc:
        gmres(lambda v: A @ v, b, tol=1e-14, maxit=2)
    err = exc.value
    assert len(err.history) == 3
    assert err.solution.shape == (6,)


# ------------------------------------------------- A_else dual route


@pytest.mark.parametrize("kind", ["neumann", "transmission"])
def test_fill_A_else_matches_matrix_free_route(kind):
    curve = make_curve("sphere", radius=0.2)
    wave = IncidentWave.from_angles(2.0, -0.6, 0.4,
                                    k_minus=3.0 if kind == "transmission"
                                    else None)
    lat = Lattice(1.0, 1.0)
    alpha, beta = bloch_phases(wave, lat)
    N, P, M, q = 10, 8, 14, 48
    nodes = boundary_nodes(curve, M)
    sources = place_sources(curve, N, 0.1)

    A = fill_A_else(nodes, sources, wave.k, P, q, lat, alpha, beta,
                    kind=kind)
    rng = np.random.default_rng(11)
    ncols = A.shape[1]
    eta = rng.standard_normal(ncols) + 1j * rng.standard_normal(ncols)
    direct = apply_A_else(nodes, sources, wave.k, P, q, lat, alpha, beta,
                          eta, kind=kind)
    scale = np.max(np.abs(A @ eta))
    assert np.max(np.abs(A @ eta - direct)) < 1e-11 * scale


def test_fill_A_else_symmetric_at_normal_incidence():
    # alpha = beta = 1 and a reflection-symmetric ring geometry: the
    # eight neighbor images come in +-x pairs, so the mode-n block and
    # the mode-(-n) block are equal.
    curve = make_curve("sphere", radius=0.2)
    wave = IncidentWave(k_vec=(0.0, 0.0, -2.0))
    lat = Lattice(1.0, 1.0)
    N, P, M, q = 8, 8, 12, 40
    nodes = boundary_nodes(curve, M)
    sources = place_sources(curve, N, 0.1)
    A = fill_A_else(nodes, sources, wave.k, P, q, lat, 1.0 + 0j, 1.0 + 0j)
    modes = mode_numbers(P)
    blocks = A.reshape(P, M, P, N)
    for n in range(1, P // 2):
        i = int(np.nonzero(modes == n)[0][0])
        j = int(np.nonzero(modes == -n)[0][0])
        assert np.allclose(blocks[i, :, i], blocks[j, :, j], atol=1e-13)


# ------------------------------------------------- periodic solves


@pytest.fixture(scope="module")
def small_neumann():
    curve = make_curve("sphere", radius=0.2)
    wave = IncidentWave.from_angles(2.0, -0.7, 0.3)
    lat = Lattice(1.0, 1.0)
    params = PeriodicParams(N=24, P=12, tau=0.1, p=5, n0=4, m1=6)
    problem = assemble_periodic(curve, wave, lat, params)
    result = solve_periodic(problem)
    from axiscat.diagnostics import error_report
    report = error_report(result, grid=32)
    yield problem, result, report
    problem.close()


def test_small_neumann_converges(small_neumann):
    problem, result, report = small_neumann
    assert result.iterations < 30
    assert result.residual < 1e-11
    # every coefficient family is populated and finite
    assert result.eta.shape == (problem.P * problem.N,)
    assert result.a.shape == (problem.rb.count,)
    assert np.all(np.isfinite(result.d)) and np.all(np.isfinite(result.b))


def test_small_neumann_quasiperiodic_field(small_neumann):
    problem, result, report = small_neumann
    rng = np.random.default_rng(2)
    # translated points sample the raw representation outside the cell, so
    # the budget includes the top/bottom matching defects alongside the
    # side-wall periodicity error
    defect = np.sqrt(report.eps_per ** 2
                     + sum(report.per_wall[g] ** 2
                           for g in ("top_value", "top_deriv",
                                     "down_value", "down_deriv")))
    tol = 10.0 * defect
    # left-wall points against their +e1 images on the right wall: this
    # is the shift identity exactly where the representation is trusted
    yz = rng.uniform(-0.45, 0.45, size=(20, 2))
    left = np.column_stack([np.full(20, -0.5), yz[:, 0], yz[:, 1]])
    u0, _ = eval_field_periodic(result, left)
    ux, _ = eval_field_periodic(result, left + problem.lattice.e1)
    assert np.max(np.abs(ux - problem.alpha * u0)) < tol
    # random exterior points a full period out still satisfy it to the
    # same budget (the representation degrades smoothly, not abruptly)
    pts = rng.uniform(-0.45, 0.45, size=(40, 3))
    pts = pts[np.linalg.norm(pts, axis=1) > 0.3][:12]
    u0, _ = eval_field_periodic(result, pts)
    ux, _ = eval_field_periodic(result, pts + problem.lattice.e1)
    uy, _ = eval_field_periodic(result, pts + problem.lattice.e2)
    assert np.max(np.abs(ux - problem.alpha * u0)) < tol
    assert np.max(np.abs(uy - problem.beta * u0)) < tol


def test_small_neumann_error_report(small_neumann):
    problem, result, report = small_neumann
    # coarse truncation: the absolute levels are loose, but every
    # measure must be finite and the flux defect applicable
    assert report.eps_bc < 5e-2
    assert report.eps_per < 2e-2
    assert report.flux_applicable
    assert report.eps_flux < 1e-3
    assert set(report.per_wall) == {
        "x_value", "x_deriv", "y_value", "y_deriv",
        "top_value", "top_deriv", "down_value", "down_deriv"}


def test_small_neumann_linearity(small_neumann):
    problem, result, report = small_neumann
    curve = make_curve("sphere", radius=0.2)
    wave2 = IncidentWave.from_angles(2.0, -0.7, 0.3, amplitude=2.0)
    params = PeriodicParams(N=24, P=12, tau=0.1, p=5, n0=4, m1=6)
    with assemble_periodic(curve, wave2, problem.lattice, params) as pb2:
        r2 = solve_periodic(pb2)
        assert np.allclose(r2.eta, 2.0 * result.eta, atol=1e-10)
        assert np.allclose(r2.a, 2.0 * result.a, atol=1e-10)


def test_zero_amplitude_solves_in_zero_iterations():
    curve = make_curve("sphere", radius=0.2)
    wave = IncidentWave.from_angles(2.0, -0.7, 0.3, amplitude=0.0)
    lat = Lattice(1.0, 1.0)
    params = PeriodicParams(N=16, P=8, tau=0.1, p=3, n0=3, m1=5)
    with assemble_periodic(curve, wave, lat, params) as pb:
        res = solve_periodic(pb)
        assert res.iterations == 0
        assert np.all(res.eta == 0) and np.all(res.a == 0)


@pytest.fixture(scope="module")
def small_transmission():
    curve = make_curve("sphere", radius=0.2)
    wave = IncidentWave.from_angles(2.0, -0.7, 0.3, k_minus=3.0)
    lat = Lattice(1.0, 1.0)
    params = PeriodicParams(N=20, P=12, tau=0.1, p=5, n0=4, m1=6)
    problem = assemble_periodic(curve, wave, lat, params,
                                kind="transmission")
    result = solve_periodic(problem)
    yield problem, result
    problem.close()


def test_small_transmission_converges(small_transmission):
    problem, result = small_transmission
    assert result.iterations < 30
    assert result.residual < 1e-11
    assert result.eta_minus is not None
    assert result.eta_minus.shape == result.eta.shape


def test_small_transmission_interior_field(small_transmission):
    problem, result = small_transmission
    # interior points get the interior representation, marked inside
    pts = np.array([[0.0, 0.0, 0.05], [0.05, 0.02, -0.03],
                    [0.4, 0.0, 0.0]])
    vals, inside = eval_field_periodic(result, pts)
    assert inside.tolist() == [True, True, False]
    assert np.all(np.isfinite(vals))
    assert np.any(np.abs(vals[:2]) > 0)


def test_eval_field_neighbor_policy(small_neumann):
    problem, result, report = small_neumann
    # a point inside the +e1 neighbor copy of the obstacle
    bad = np.array([[1.0, 0.0, 0.05], [0.4, 0.4, 0.3]])
    with pytest.raises(ValueError):
        eval_field_periodic(result, bad)
    vals, inside = eval_field_periodic(result, bad, neighbor="flag")
    assert inside.tolist() == [True, False]
    assert np.isnan(vals[0].real) and np.isfinite(vals[1])


def test_rebuild_walls_reuses_obstacle_blocks(small_neumann):
    problem, result, report = small_neumann
    pb2 = rebuild_walls(problem, p=4)
    assert pb2.a_else is problem.a_else
    assert pb2.C is problem.C
    assert pb2.basis.count == 25
    r2 = solve_periodic(pb2)
    assert r2.iterations < 30
    # m1 change rebuilds the wall grid and C
    pb3 = rebuild_walls(problem, m1=7)
    assert pb3.cell is not problem.cell
    assert pb3.C is not problem.C


# ------------------------------------------------- validation guards


def test_assemble_rejects_bad_geometry():
    curve = make_curve("sphere", radius=0.6)
    wave = IncidentWave.from_angles(2.0, -0.7)
    with pytest.raises(ValueError):
        assemble_periodic(curve, wave, Lattice(1.0, 1.0),
                          PeriodicParams(N=8, P=8, tau=0.1, p=3, n0=3))


def test_assemble_rejects_odd_P_and_large_p():
    curve = make_curve("sphere", radius=0.2)
    wave = IncidentWave.from_angles(2.0, -0.7)
    lat = Lattice(1.0, 1.0)
    with pytest.raises(ValueError):
        assemble_periodic(curve, wave, lat,
                          PeriodicParams(N=8, P=7, tau=0.1))
    with pytest.raises(ValueError):
        assemble_periodic(curve, wave, lat,
                          PeriodicParams(N=8, P=8, tau=0.1, p=4, n0=3))


def test_transmission_requires_interior_wavenumber():
    curve = make_curve("sphere", radius=0.2)
    wave = IncidentWave.from_angles(2.0, -0.7)
    with pytest.raises(ValueError):
        assemble_periodic(curve, wave, Lattice(1.0, 1.0),
                          PeriodicParams(N=8, P=8, tau=0.1, p=3, n0=3),
                          kind="transmission")
