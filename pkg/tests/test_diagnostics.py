import numpy as np
import pytest

from axiscat.diagnostics import (
    boundary_error,
    error_report,
    flux_error,
    midpoint_operator,
    scan_parameter,
    wall_error,
    wood_check,
)
from axiscat.geometry import make_curve
from axiscat.onebody import IncidentWave
from axiscat.periodizer import Lattice, build_unit_cell, fill_C, midpoint_test_cell
from axiscat.solver import PeriodicParams, SolveResult, assemble_periodic, solve_periodic


@pytest.fixture(scope="module")
def tiny():
    curve = make_curve("sphere", radius=0.2)
    wave = IncidentWave.from_angles(2.0, -0.7, 0.3)
    params = PeriodicParams(N=20, P=12, tau=0.1, p=5, n0=4, m1=6)
    problem = assemble_periodic(curve, wave, Lattice(1.0, 1.0), params)
    result = solve_periodic(problem)
    yield problem, result
    problem.close()


# ---------------------------------------------------------------- wood


def test_wood_check_square_cell_anomaly():
    wave = IncidentWave(k_vec=(0.0, 0.0, -2.0 * np.pi))
    rep = wood_check(wave, Lattice(1.0, 1.0))
    assert rep.critical
    assert set(rep.orders) == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert rep.min_rel_kz == 0.0
    assert rep.digits_lost == 16.0


def test_wood_check_off_anomaly():
    wave = IncidentWave.from_angles(2.0, -0.7, 0.3)
    rep = wood_check(wave, Lattice(1.0, 1.0))
    assert not rep.critical
    assert rep.orders == []
    assert 0.0 < rep.min_rel_kz <= 1.0
    assert rep.digits_lost < 1.0


def test_wood_check_margin_widens_flagging():
    # just off the anomaly: tiny margin passes, generous margin flags
    wave = IncidentWave(k_vec=(0.0, 0.0, -2.0 * np.pi * 1.001))
    assert not wood_check(wave, Lattice(1.0, 1.0), margin=1e-4).critical
    assert wood_check(wave, Lattice(1.0, 1.0), margin=0.1).critical


# ---------------------------------------------------------------- flux


@pytest.mark.parametrize("theta", [-0.7, 0.7])
def test_flux_families_conserve_both_directions(theta):
    # the incident power enters the upward family when the wave travels
    # up and the downward family when it travels down; both bookkeepings
    # must close the energy balance
    curve = make_curve("sphere", radius=0.2)
    wave = IncidentWave.from_angles(2.0, theta, 0.3)
    params = PeriodicParams(N=20, P=12, tau=0.1, p=5, n0=4, m1=6)
    with assemble_periodic(curve, wave, Lattice(1.0, 1.0), params) as pb:
        res = solve_periodic(pb)
        defect, ok = flux_error(res)
        assert ok
        assert defect < 1e-3


def test_flux_not_applicable_without_propagating_orders(tiny):
    problem, result = tiny
    # fabricate a mode set with the propagating flags cleared
    import dataclasses
    rb = problem.rb
    rb_ev = dataclasses.replace(rb, propagating=np.zeros(rb.count, bool))
    pb_ev = dataclasses.replace(problem, rb=rb_ev)
    res_ev = dataclasses.replace(result, problem=pb_ev)
    defect, ok = flux_error(res_ev)
    assert not ok and defect is None


# ------------------------------------------------------------ walls


def test_pure_rb_trial_is_quasiperiodic(tiny):
    problem, result = tiny
    import dataclasses
    rng = np.random.default_rng(4)
    nrb = problem.rb.count
    trial = dataclasses.replace(
        result,
        eta=np.zeros_like(result.eta),
        d=np.zeros_like(result.d),
        a=rng.standard_normal(nrb) + 1j * rng.standard_normal(nrb),
        b=rng.standard_normal(nrb) + 1j * rng.standard_normal(nrb),
    )
    _, per_wall, wall_norm = wall_error(trial)
    # plane-wave identity: the side-wall discrepancies vanish to machine
    # precision for any radiating coefficients; the top/down groups
    # instead measure the anchoring traces themselves
    side = max(per_wall["x_value"], per_wall["x_deriv"],
               per_wall["y_value"], per_wall["y_deriv"])
    assert side < 1e-12 * wall_norm
    assert wall_norm > 0


def test_wall_error_accepts_cached_operator(tiny):
    problem, result = tiny
    direct = wall_error(result)
    cached = wall_error(result, mid=midpoint_operator(problem))
    assert direct[0] == cached[0]
    assert direct[2] == cached[2]


def test_wall_error_stable_under_test_grid_refinement(tiny):
    problem, result = tiny
    eps1, _, _ = wall_error(result)
    fine_cell = build_unit_cell(problem.lattice, problem.cell.z0,
                                2 * problem.cell.m1)
    test2 = midpoint_test_cell(fine_cell)
    C2 = fill_C(problem.sources, test2, problem.wave.k, problem.P,
                problem.q_dist, problem.alpha, problem.beta)
    eps2, _, _ = wall_error(result, mid=(test2, C2))
    assert eps2 < 3.0 * eps1
    assert eps1 < 3.0 * eps2


# ----------------------------------------------------------- report


def test_error_report_attaches_diagnostics(tiny):
    problem, result = tiny
    rep = error_report(result, grid=24)
    assert result.diagnostics is rep
    assert rep.eps_bc > 0 and rep.eps_per > 0
    assert rep.flux_applicable
    assert not rep.wood.critical
    # boundary error is reproducible on the same grid
    assert boundary_error(result, grid=24) == rep.eps_bc


def test_scan_parameter_collects_rows():
    calls = []

    class _Rep:
        eps_bc, eps_per, eps_flux = 1e-3, 2e-3, 3e-4

    class _Res:
        iterations = 5
        diagnostics = _Rep()

    def run_one(v):
        calls.append(v)
        return _Res(), _Rep()

    rows = scan_parameter(run_one, [4, 8])
    assert calls == [4, 8]
    assert [r["value"] for r in rows] == [4, 8]
    assert rows[0]["eps_per"] == 2e-3
    assert rows[1]["iters"] == 5
    assert "seconds" in rows[0]
