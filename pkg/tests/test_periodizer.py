import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import sph_harm_y, spherical_jn

from axiscat.geometry import RingSourceSet, boundary_nodes, make_curve
from axiscat.onebody import IncidentWave, mode_numbers
from axiscat.periodizer import (
    AuxBasis,
    Lattice,
    bloch_phases,
    build_unit_cell,
    default_m1,
    default_z0,
    eval_aux,
    fill_B,
    fill_C,
    fill_Q,
    midpoint_test_cell,
    rb_modes,
    spherical_aux,
)


def test_lattice_and_bloch_phases():
    lat = Lattice(2.5, 1.75)
    assert np.allclose(lat.e1, [2.5, 0, 0])
    assert np.allclose(lat.e2, [0, 1.75, 0])
    with pytest.raises(ValueError):
        Lattice(1.0, -2.0)

    wave = IncidentWave(k_vec=(1.1, -0.4, -2.0))
    alpha, beta = bloch_phases(wave, lat)
    assert abs(alpha - np.exp(1j * 1.1 * 2.5)) < 1e-15
    assert abs(beta - np.exp(1j * -0.4 * 1.75)) < 1e-15

    normal = IncidentWave(k_vec=(0.0, 0.0, -3.0))
    a0, b0 = bloch_phases(normal, lat)
    assert a0 == 1.0 and b0 == 1.0


def test_rb_modes_propagating_count_unit_cell():
    # e = 1, k = 10, normal incidence: 4 pi^2 (m^2 + n^2) <= 100 keeps
    # m^2 + n^2 <= 2, i.e. 9 propagating orders.
    rb = rb_modes(IncidentWave(k_vec=(0.0, 0.0, -10.0)), Lattice(1.0, 1.0), n0=5)
    assert rb.n_propagating == 9
    prop = rb.propagating
    assert np.all(rb.kappa_z[prop].imag == 0.0)
    assert np.all(rb.kappa_z[prop].real > 0.0)
    ev = ~prop
    assert np.all(rb.kappa_z[ev].real == 0.0)
    assert np.all(rb.kappa_z[ev].imag > 0.0)


def test_rb_modes_against_brute_enumeration():
    wave = IncidentWave.from_angles(4.0, theta=-0.8, phi=0.5)
    lat = Lattice(3.0, 3.0)
    n0 = 13
    rb = rb_modes(wave, lat, n0)

    kx, ky = wave.k_vec[0], wave.k_vec[1]
    cut = np.pi * n0
    expected = set()
    for m in range(-60, 61):
        for n in range(-60, 61):
            qx = kx + 2 * np.pi * m / lat.e_x
            qy = ky + 2 * np.pi * n / lat.e_y
            if qx * qx + qy * qy <= cut * cut:
                expected.add((m, n))
    got = set(zip(rb.ms.tolist(), rb.ns.tolist()))
    assert got == expected

    j = rb.order_index(0, 0)
    assert abs(rb.kappa_x[j] - kx) < 1e-15
    assert abs(rb.kappa_y[j] - ky) < 1e-15
    # dispersion relation holds for every retained order
    s = rb.kappa_x**2 + rb.kappa_y**2 + rb.kappa_z**2
    assert np.max(np.abs(s - rb.k**2)) < 1e-10


def test_rb_plane_waves_quasiperiodic_and_helmholtz():
    wave = IncidentWave.from_angles(3.0, theta=-0.6, phi=1.1)
    lat = Lattice(1.8, 2.2)
    rb = rb_modes(wave, lat, n0=3)
    alpha, beta = bloch_phases(wave, lat)
    z0 = 1.0
    rng = np.random.default_rng(7)
    pts = rng.uniform(-1.0, 1.0, size=(6, 3))

    def up(j, x):
        return np.exp(1j * (rb.kappa_x[j] * x[..., 0] + rb.kappa_y[j] * x[..., 1]
                            + rb.kappa_z[j] * (x[..., 2] - z0)))

    for j in [0, rb.count // 2, rb.count - 1]:
        f = up(j, pts)
        assert np.max(np.abs(up(j, pts + lat.e1) - alpha * f)) < 1e-12 * np.max(np.abs(f))
        assert np.max(np.abs(up(j, pts + lat.e2) - beta * f)) < 1e-12 * np.max(np.abs(f))

    # FD Laplacian on one evanescent column at its anchoring height
    ev = np.nonzero(~rb.propagating)[0]
    j = int(ev[0])
    x0 = np.array([0.3, -0.2, z0])
    h = 1e-4
    lap = 0.0 + 0.0j
    for ax in range(3):
        e = np.zeros(3)
        e[ax] = h
        lap += (up(j, x0 + e) + up(j, x0 - e) - 2 * up(j, x0)) / h**2
    assert abs(lap + rb.k**2 * up(j, x0)) < 1e-5 * rb.k**2 * abs(up(j, x0))


def test_wood_flags_square_cell():
    rb = rb_modes(IncidentWave(k_vec=(0.0, 0.0, -2 * np.pi)), Lattice(1.0, 1.0),
                  n0=4)
    flagged = set(zip(rb.ms[rb.wood].tolist(), rb.ns[rb.wood].tolist()))
    assert flagged == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    j = rb.order_index(0, 0)
    assert rb.propagating[j] and not rb.wood[j]


def test_unit_cell_geometry_and_weights():
    lat = Lattice(2.0, 3.0)
    cell = build_unit_cell(lat, z0=1.25, m1=6)
    assert cell.left.shape == (36, 3)
    assert np.allclose(cell.right - cell.left, lat.e1)
    assert np.allclose(cell.front - cell.bottom, lat.e2)
    assert np.allclose(cell.top - cell.down, [0, 0, 2.5])
    assert np.all(cell.left[:, 0] == -1.0)
    assert np.all(cell.down[:, 2] == -1.25)

    # tensor weights integrate smooth polynomials on each wall exactly
    assert abs(cell.w_lr.sum() - 3.0 * 2.5) < 1e-12
    got = np.sum(cell.w_lr * cell.left[:, 1] ** 2 * cell.left[:, 2] ** 2)
    want = (2 * 1.5**3 / 3) * (2 * 1.25**3 / 3)
    assert abs(got - want) < 1e-12 * want

    with pytest.raises(ValueError):
        build_unit_cell(lat, z0=0.0, m1=6)
    with pytest.raises(ValueError):
        build_unit_cell(lat, z0=1.0, m1=1)


def test_midpoint_test_cell_sits_between_nodes():
    cell = build_unit_cell(Lattice(2.0, 2.0), z0=1.0, m1=5)
    mid = midpoint_test_cell(cell)
    assert mid.nodes_per_wall == 16
    # every midpoint x-coordinate strictly interleaves the parent nodes
    assert np.all(mid.x_nodes > cell.x_nodes[:-1])
    assert np.all(mid.x_nodes < cell.x_nodes[1:])
    # no shared nodes with the parent grid
    assert np.min(np.abs(mid.x_nodes[:, None] - cell.x_nodes[None, :])) > 1e-3
    assert abs(mid.w_lr.sum() - (cell.y_nodes[-1] - cell.y_nodes[0])
               * (cell.z_nodes[-1] - cell.z_nodes[0])) < 1e-12


def test_default_sizes():
    lat = Lattice(3.0, 3.0)
    assert abs(default_z0(make_curve("smooth"), lat) - 2.05) < 1e-12
    assert default_z0(make_curve("sphere", radius=0.2), Lattice(1.0, 1.0)) == 0.5
    assert default_m1(4.0) == 6
    assert default_m1(0.1) == 4


def test_aux_basis_validation():
    with pytest.raises(ValueError):
        AuxBasis(kind="fourier")
    with pytest.raises(ValueError):
        AuxBasis(kind="spherical_harmonics")
    with pytest.raises(ValueError):
        AuxBasis(kind="proxy_points")
    with pytest.raises(ValueError):
        AuxBasis(kind="proxy_points", n2=3, points=np.zeros((4, 3)))
    assert spherical_aux(4).count == 25
    pts = np.random.default_rng(0).normal(size=(9, 3)) + 5.0
    assert AuxBasis(kind="proxy_points", n2=3, points=pts).count == 9


def test_eval_aux_proxy_gradients_and_helmholtz():
    rng = np.random.default_rng(3)
    src = rng.normal(size=(7, 3))
    src *= 4.0 / np.linalg.norm(src, axis=1, keepdims=True)
    basis = AuxBasis(kind="proxy_points", points=src)
    k = 2.3
    pts = rng.uniform(-0.8, 0.8, size=(5, 3))
    vals, grads = eval_aux(basis, k, pts, want_grad=True)
    assert vals.shape == (5, 7) and grads.shape == (5, 3, 7)

    h = 1e-5
    for ax in range(3):
        e = np.zeros(3)
        e[ax] = h
        fd = (eval_aux(basis, k, pts + e) - eval_aux(basis, k, pts - e)) / (2 * h)
        assert np.max(np.abs(fd - grads[:, ax, :])) < 1e-6 * np.max(np.abs(grads))

    h = 1e-4
    lap = np.zeros_like(vals)
    for ax in range(3):
        e = np.zeros(3)
        e[ax] = h
        lap += (eval_aux(basis, k, pts + e) + eval_aux(basis, k, pts - e)
                - 2 * vals) / h**2
    assert np.max(np.abs(lap + k * k * vals)) < 1e-4 * k * k * np.max(np.abs(vals))

    # spherical kind simply defers to the regular wave basis
    sb = spherical_aux(2)
    v2 = eval_aux(sb, k, pts)
    from axiscat.harmonics import regular_basis
    assert np.array_equal(v2, regular_basis(k, 2, pts))


def _quad_mode_coefficient(k, l, m, n, rho, z, nrho, nz, want_value):
    """Adaptive-quadrature Fourier coefficient of j_l Y_lm (or its normal
    derivative) around a ring, written only with scipy special functions."""
    r = np.hypot(rho, z)
    theta = np.arctan2(rho, z)
    jl = spherical_jn(l, k * r)
    djl = spherical_jn(l, k * r, derivative=True)
    st, ct = rho / r, z / r

    def integrand(phi):
        y, (dy_dth, _) = sph_harm_y(l, m, theta, phi, diff_n=1)
        if want_value:
            f = jl * y
        else:
            du_dr = k * djl * y
            du_dth = jl * dy_dth
            du_drho = st * du_dr + ct / r * du_dth
            du_dz = ct * du_dr - st / r * du_dth
            f = nrho * du_drho + nz * du_dz
        return f * np.exp(-1j * n * phi) / (2 * np.pi)

    re = quad(lambda p: integrand(p).real, 0.0, 2 * np.pi,
              epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    im = quad(lambda p: integrand(p).imag, 0.0, 2 * np.pi,
              epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    return re + 1j * im


def test_fill_B_matches_adaptive_quadrature():
    nodes = boundary_nodes(make_curve("smooth"), 6)
    k, p, P = 1.7, 5, 16
    B = fill_B(nodes, p, k, P, kind="neumann")
    assert B.shape == (P * nodes.M, (p + 1) ** 2)

    modes = mode_numbers(P)
    slot = {int(n): i for i, n in enumerate(modes)}
    rng = np.random.default_rng(11)
    for _ in range(10):
        l = int(rng.integers(0, p + 1))
        m = int(rng.integers(-l, l + 1))
        i = int(rng.integers(0, nodes.M))
        col = l * l + l + m
        want = _quad_mode_coefficient(k, l, m, m, nodes.rho[i], nodes.z[i],
                                      nodes.nrho[i], nodes.nz[i],
                                      want_value=False)
        got = B[slot[m] * nodes.M + i, col]
        assert abs(got - want) < 1e-12 * max(1.0, abs(want))
        # off-mode rows are exactly zero, including adjacent blocks
        other = [slot[nn] * nodes.M + i for nn in modes if nn != m]
        assert np.all(B[other, col] == 0.0)

    # a fully axisymmetric column only feeds the n = 0 block
    col0 = 0
    live = np.nonzero(np.abs(B[:, col0]) > 0)[0]
    assert np.all(live // nodes.M == slot[0])


def test_fill_B_transmission_rows_and_guards():
    nodes = boundary_nodes(make_curve("smooth"), 5)
    k, p, P = 1.3, 3, 12
    B = fill_B(nodes, p, k, P, kind="transmission")
    assert B.shape == (P * 2 * nodes.M, (p + 1) ** 2)

    slot = {int(n): i for i, n in enumerate(mode_numbers(P))}
    l, m, i = 2, -1, 3
    col = l * l + l + m
    base = slot[m] * 2 * nodes.M
    val = _quad_mode_coefficient(k, l, m, m, nodes.rho[i], nodes.z[i],
                                 nodes.nrho[i], nodes.nz[i], want_value=True)
    der = _quad_mode_coefficient(k, l, m, m, nodes.rho[i], nodes.z[i],
                                 nodes.nrho[i], nodes.nz[i], want_value=False)
    assert abs(B[base + i, col] - val) < 1e-12
    assert abs(B[base + nodes.M + i, col] - der) < 1e-12

    with pytest.raises(ValueError):
        fill_B(nodes, 8, k, P)  # p >= P/2
    with pytest.raises(ValueError):
        fill_B(nodes, 2, k, 9)
    with pytest.raises(ValueError):
        fill_B(nodes, 2, k, P, kind="robin")


def _ring_points_and_strengths(rho, z, coef, P, q):
    """Equispaced ring points and the point strengths realizing the modal
    coefficient vector, built from first principles (no FFT conventions)."""
    N = len(rho)
    phi = 2 * np.pi * np.arange(q) / q
    pts = np.empty((N, q, 3))
    pts[:, :, 0] = np.asarray(rho)[:, None] * np.cos(phi)
    pts[:, :, 1] = np.asarray(rho)[:, None] * np.sin(phi)
    pts[:, :, 2] = np.asarray(z)[:, None]
    modes = mode_numbers(P)
    c = coef.reshape(P, N)
    sig = np.einsum("nj,nl->jl", c, np.exp(1j * modes[:, None] * phi[None, :])) / q
    return pts.reshape(N * q, 3), sig.ravel()


def _brute_potential(k, src, sig, targets, shift):
    d = targets[:, None, :] - (src[None, :, :] + shift[None, None, :])
    r = np.sqrt(np.sum(d * d, axis=-1))
    g = np.exp(1j * k * r) / (4 * np.pi * r)
    vals = g @ sig
    gr = (g * (1j * k - 1.0 / r) / r)[:, :, None] * d
    grads = np.einsum("tsc,s->tc", gr, sig)
    return vals, grads


def _brute_copy_sum(k, src, sig, targets, lat, alpha, beta):
    """Field of all nine phased copies, the naive way."""
    vals = np.zeros(targets.shape[0], dtype=complex)
    grads = np.zeros((targets.shape[0], 3), dtype=complex)
    for m in (-1, 0, 1):
        for n in (-1, 0, 1):
            v, g = _brute_potential(k, src, sig, targets, m * lat.e1 + n * lat.e2)
            vals += alpha**m * beta**n * v
            grads += alpha**m * beta**n * g
    return vals, grads


def test_fill_C_matches_naive_wall_discrepancies():
    """Collapsed 6-term side-wall rows reproduce the 18-term computation."""
    rng = np.random.default_rng(23)
    N, P, q = 20, 8, 32
    rho = rng.uniform(0.15, 0.8, N)
    zc = rng.uniform(-0.7, 0.7, N)
    sources = RingSourceSet(N=N, rho=rho, z=zc, tau=0.0, scheme="custom",
                            side="interior")
    lat = Lattice(2.3, 1.9)
    cell = build_unit_cell(lat, z0=1.1, m1=4)
    wave = IncidentWave.from_angles(1.3, theta=-0.5, phi=0.35)
    alpha, beta = bloch_phases(wave, lat)
    k = wave.k

    C = fill_C(sources, cell, k, P, q, alpha, beta)
    m2 = cell.nodes_per_wall
    assert C.shape == (8 * m2, P * N)

    coef = rng.normal(size=P * N) + 1j * rng.normal(size=P * N)
    act = C @ coef
    src, sig = _ring_points_and_strengths(rho, zc, coef, P, q)

    vr, gr = _brute_copy_sum(k, src, sig, cell.right, lat, alpha, beta)
    vl, gl = _brute_copy_sum(k, src, sig, cell.left, lat, alpha, beta)
    vf, gf = _brute_copy_sum(k, src, sig, cell.front, lat, alpha, beta)
    vb, gb = _brute_copy_sum(k, src, sig, cell.bottom, lat, alpha, beta)
    vt, gt = _brute_copy_sum(k, src, sig, cell.top, lat, alpha, beta)
    vd, gd = _brute_copy_sum(k, src, sig, cell.down, lat, alpha, beta)

    want = np.concatenate([
        vr - alpha * vl, gr[:, 0] - alpha * gl[:, 0],
        vf - beta * vb, gf[:, 1] - beta * gb[:, 1],
        vt, gt[:, 2], vd, gd[:, 2],
    ])
    scale = np.max(np.abs(want))
    assert np.max(np.abs(act - want)) < 1e-12 * scale


def test_fill_C_normal_incidence_value_rows_cancel():
    # With alpha = beta = 1 every axisymmetric source column produces a
    # mirror-symmetric copy sum, so the side-wall value discrepancies vanish
    # identically (the x/y-derivative rows do not).
    N, P, q = 3, 6, 24
    sources = RingSourceSet(N=N, rho=np.array([0.3, 0.5, 0.7]),
                            z=np.array([-0.2, 0.1, 0.4]), tau=0.0,
                            scheme="custom", side="interior")
    cell = build_unit_cell(Lattice(2.0, 2.4), z0=1.0, m1=4)
    C = fill_C(sources, cell, 1.9, P, q, 1.0 + 0j, 1.0 + 0j)

    coef = np.zeros(P * N, dtype=complex)
    slot0 = {int(n): i for i, n in enumerate(mode_numbers(P))}[0]
    coef[slot0 * N:(slot0 + 1) * N] = [1.0, -0.4, 2.2]
    act = C @ coef
    m2 = cell.nodes_per_wall
    scale = np.max(np.abs(act))
    assert np.max(np.abs(act[0:m2])) < 1e-13 * scale
    assert np.max(np.abs(act[2 * m2:3 * m2])) < 1e-13 * scale
    assert np.max(np.abs(act[m2:2 * m2])) > 1e-6 * scale

    with pytest.raises(ValueError):
        fill_C(sources, cell, 1.9, P, P - 2, 1.0 + 0j, 1.0 + 0j)


def test_fill_Q_layout_and_plane_wave_blocks():
    lat = Lattice(1.4, 1.1)
    wave = IncidentWave.from_angles(3.0, theta=-0.9, phi=0.2)
    rb = rb_modes(wave, lat, n0=2)
    alpha, beta = bloch_phases(wave, lat)
    cell = build_unit_cell(lat, z0=0.8, m1=3)
    basis = spherical_aux(2)
    Q = fill_Q(cell, basis, rb, wave.k, alpha, beta)

    m2, nb, nrb = cell.nodes_per_wall, basis.count, rb.count
    assert Q.shape == (8 * m2, nb + 2 * nrb)

    # zero structure: side walls never see the plane waves; top rows never
    # see the downward set and vice versa
    assert np.all(Q[: 4 * m2, nb:] == 0.0)
    assert np.all(Q[4 * m2:6 * m2, nb + nrb:] == 0.0)
    assert np.all(Q[6 * m2:8 * m2, nb:nb + nrb] == 0.0)

    phase = np.exp(1j * (np.outer(cell.top[:, 0], rb.kappa_x)
                         + np.outer(cell.top[:, 1], rb.kappa_y)))
    assert np.allclose(Q[4 * m2:5 * m2, nb:nb + nrb], -phase, atol=1e-14)
    assert np.allclose(Q[5 * m2:6 * m2, nb:nb + nrb],
                       -1j * rb.kappa_z[None, :] * phase, atol=1e-14)
    assert np.allclose(Q[6 * m2:7 * m2, nb + nrb:], -phase, atol=1e-14)
    assert np.allclose(Q[7 * m2:8 * m2, nb + nrb:],
                       1j * rb.kappa_z[None, :] * phase, atol=1e-14)
    # every anchored column, evanescent ones included, has unit magnitude
    # value entries on its own wall
    assert np.allclose(np.abs(Q[4 * m2:5 * m2, nb:nb + nrb]), 1.0)
    assert np.allclose(np.abs(Q[6 * m2:7 * m2, nb + nrb:]), 1.0)

    # auxiliary block: quasiperiodic differences on the side walls
    va = eval_aux(basis, wave.k, cell.right)
    vb_ = eval_aux(basis, wave.k, cell.left)
    assert np.allclose(Q[0:m2, :nb], va - alpha * vb_, atol=1e-14)

    # z-derivative rows against a finite difference through the top wall
    h = 1e-5
    up = eval_aux(basis, wave.k, cell.top + [0, 0, h])
    dn = eval_aux(basis, wave.k, cell.top - [0, 0, h])
    fd = (up - dn) / (2 * h)
    assert np.max(np.abs(Q[5 * m2:6 * m2, :nb] - fd)) < 1e-8
