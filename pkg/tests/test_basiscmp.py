import numpy as np
import pytest

from axiscat.basiscmp import (
    compare_bases,
    exterior_probe,
    matched_size,
    proxy_points,
)
from axiscat.geometry import make_curve
from axiscat.onebody import IncidentWave
from axiscat.periodizer import Lattice
from axiscat.solver import PeriodicParams, assemble_periodic, solve_periodic


def test_proxy_points_layout():
    basis = proxy_points(6, radius=2.5)
    assert basis.kind == "proxy_points"
    assert basis.count == 36
    r = np.linalg.norm(basis.points, axis=1)
    assert np.allclose(r, 2.5, atol=1e-13)
    # midpoint polar rule never touches the axis, so no duplicates
    d = np.linalg.norm(basis.points[:, None, :] - basis.points[None, :, :],
                       axis=2)
    np.fill_diagonal(d, np.inf)
    assert d.min() > 1e-3

    with pytest.raises(ValueError):
        proxy_points(0)
    with pytest.raises(ValueError):
        proxy_points(4, radius=-1.0)


@pytest.fixture(scope="module")
def solved():
    curve = make_curve("sphere", radius=0.2)
    wave = IncidentWave.from_angles(2.0, -0.7, 0.3)
    params = PeriodicParams(N=20, P=12, tau=0.1, p=5, n0=4, m1=6)
    problem = assemble_periodic(curve, wave, Lattice(1.0, 1.0), params)
    result = solve_periodic(problem)
    yield problem, result
    problem.close()


def test_exterior_probe_relocates_out_of_obstacle(solved):
    problem, result = solved
    pt, val, note = exterior_probe(result, (0.35, 0.0, 0.2))
    assert note is None
    assert np.allclose(pt, (0.35, 0.0, 0.2))

    pt2, val2, note2 = exterior_probe(result, (0.05, 0.0, 0.05))
    assert note2 is not None
    assert np.linalg.norm(pt2) > 0.2
    assert np.isfinite(val2)


def test_compare_bases_requires_enclosing_sphere(solved):
    problem, result = solved
    with pytest.raises(ValueError):
        compare_bases(problem, [3], [4], radius=0.5)


def test_compare_bases_cross_validates(solved):
    problem, result = solved
    rows, notes = compare_bases(problem, [3, 5], [6, 8], radius=2.0,
                                probe=(0.3, 0.3, 0.45))
    assert [r["basis"] for r in rows] == ["spherical_harmonics"] * 2 + \
        ["proxy_points"] * 2
    assert [r["unknowns"] for r in rows] == [16, 36, 36, 64]
    assert notes == []
    for r in rows:
        assert r["eps_per"] > 0 and r["q_factor_seconds"] > 0
    # richer bases do not do worse
    assert rows[1]["eps_per"] <= rows[0]["eps_per"]
    assert rows[3]["eps_per"] <= rows[2]["eps_per"]
    # the two routes agree on the probe to a few percent at this size
    sh = complex(rows[1]["probe_re"], rows[1]["probe_im"])
    px = complex(rows[3]["probe_re"], rows[3]["probe_im"])
    assert abs(sh - px) < 5e-2 * abs(sh)

    target = 2.0 * max(rows[1]["eps_per"], rows[3]["eps_per"])
    assert matched_size(rows, "spherical_harmonics", target) in (3, 5)
    assert matched_size(rows, "proxy_points", 0.0) is None
