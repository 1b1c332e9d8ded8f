import numpy as np
import pytest

import rigidflow as rf
from conftest import gaussian_pulse, make_solver, march
from rigidflow.errors import (
    DomainError,
    RegionError,
    StepSizeError,
    UnsupportedOrderError,
)
from rigidflow.eos import density
from rigidflow.fluid import FluidField, FluidSolver
from rigidflow.geometry import OUTER, SOLID
from rigidflow.kinematics import Configuration, SolidVelocity
from rigidflow.solid import mass_properties


@pytest.fixture()
def setup(spec, eos_params, box, props):
    solver = make_solver(spec, (16, 32), eos_params, box)
    U = FluidField.uniform(solver.mesh, 1.0, 0.0)
    theta = SolidVelocity.zero(2)
    conf = Configuration.identity(solver.mesh)
    reg = solver.make_regularization(0.0, U, theta, props, K=1)
    return solver, U, theta, conf, reg


def test_freestream_residual_is_exactly_zero(setup):
    solver, U, theta, conf, reg = setup
    Rp, Ru, Rs = solver.spatial_residual(U, theta, conf, reg, 0.0)
    assert np.abs(Rp).max() == 0.0
    assert np.abs(Ru).max() == 0.0
    assert np.abs(Rs).max() == 0.0


def test_freestream_step_is_bitwise_fixed_point(setup):
    solver, U, theta, conf, reg = setup
    dt = solver.cfl_dt(U, theta, conf, reg)
    V = solver.fluid_step(U, lambda t: theta, conf, reg, 0.0, dt)
    assert np.array_equal(V.p, U.p)
    assert np.array_equal(V.u, U.u)
    assert np.array_equal(V.s, U.s)


def test_freestream_with_eps_shift(spec, eos_params, box, props):
    solver = make_solver(spec, (16, 32), eos_params, box)
    U = FluidField.uniform(solver.mesh, 1.0, 0.2)
    theta = SolidVelocity.zero(2)
    conf = Configuration.identity(solver.mesh)
    reg = solver.make_regularization(0.05, U, theta, props, K=1)
    Rp, Ru, Rs = solver.spatial_residual(U, theta, conf, reg, 0.0)
    assert max(np.abs(Rp).max(), np.abs(Ru).max(), np.abs(Rs).max()) < 1e-15


def test_entropy_stays_constant_through_acoustics(spec, eos_params, box, props):
    solver = make_solver(spec, (24, 32), eos_params, box)
    U = gaussian_pulse(solver.mesh, s0=0.125)
    theta = SolidVelocity.zero(2)
    conf = Configuration.identity(solver.mesh)
    reg = solver.make_regularization(0.0, U, theta, props, K=1)
    dt = 0.9 * solver.cfl_dt(U, theta, conf, reg)
    for k in range(100):
        U = solver.fluid_step(U, lambda t: theta, conf, reg, k * dt, dt)
    assert np.abs(U.s - 0.125).max() <= 1e-12


def test_rest_state_coefficient_structure(setup):
    solver, U, theta, conf, reg = setup
    cs = solver.assemble_coefficients(theta, conf, U, eps=0.0)
    k = 4
    # A0 = diag(1/alpha, eta M, 1) with alpha = 1.4, eta = 1, M = I
    expected_A0 = np.diag([1.0 / 1.4, 1.0, 1.0, 1.0])
    assert np.abs(cs.A0 - expected_A0).max() < 1e-14
    # at rest only the pressure-velocity coupling entries survive in A^j
    for j in range(2):
        expected = np.zeros((k, k))
        expected[0, 1 + j] = expected[1 + j, 0] = 1.0
        assert np.abs(cs.A[j] - expected).max() < 1e-14
    assert np.abs(cs.B).max() == 0.0


def test_coefficient_symmetry_on_random_state(spec, eos_params, box):
    solver = make_solver(spec, (16, 32), eos_params, box)
    rng = np.random.default_rng(0)
    shape = solver.mesh.shape
    U = FluidField(1.0 + 0.2 * rng.uniform(-1.0, 1.0, shape),
                   0.1 * rng.standard_normal(shape + (2,)),
                   0.2 * rng.uniform(-1.0, 1.0, shape))
    theta = SolidVelocity(np.array([0.1, -0.2]), np.array([0.3]))
    conf = Configuration.identity(solver.mesh)
    nu = rf.extended_normal(solver.mesh).nu
    cs = solver.assemble_coefficients(theta, conf, U, eps=0.07, nu=nu)
    assert np.abs(cs.A0 - np.swapaxes(cs.A0, -1, -2)).max() < 1e-14
    assert np.abs(cs.A - np.swapaxes(cs.A, -1, -2)).max() < 1e-14
    eig = np.linalg.eigvalsh(cs.A0)
    assert eig.min() > 0.0


def test_eps_shift_identity(spec, eos_params, box):
    solver = make_solver(spec, (16, 32), eos_params, box)
    U = gaussian_pulse(solver.mesh, amp=0.1)
    theta = SolidVelocity(np.array([0.05, 0.0]), np.array([0.1]))
    conf = Configuration.identity(solver.mesh)
    nu = rf.extended_normal(solver.mesh).nu
    c0 = solver.assemble_coefficients(theta, conf, U, eps=0.0)
    c1 = solver.assemble_coefficients(theta, conf, U, eps=0.1, nu=nu)
    for j in range(2):
        shift = c1.A[j] - c0.A[j]
        expected = 0.1 * nu[..., j, None, None] * np.eye(4)
        assert np.abs(shift - expected).max() < 1e-15


def test_normal_matrix_characteristic_structure(setup):
    solver, U, theta, conf, reg = setup
    cs = solver.assemble_coefficients(theta, conf, U, eps=0.0)
    n = solver.mesh.patches[SOLID].normals[0]
    i = (0, 0)
    An = cs.A[0][i] * n[0] + cs.A[1][i] * n[1]
    A0 = cs.A0[i]
    # generalized wave speeds: one incoming, one outgoing acoustic mode and
    # a zero eigenvalue of multiplicity dim
    L = np.linalg.cholesky(A0)
    Linv = np.linalg.inv(L)
    lam = np.linalg.eigvalsh(Linv @ An @ Linv.T)
    c = np.sqrt(1.4)   # sound speed of the rest state
    assert lam[0] == pytest.approx(-c, rel=1e-12)
    assert lam[-1] == pytest.approx(c, rel=1e-12)
    assert np.abs(lam[1:3]).max() < 1e-14
    # the eps shift moves every eigenvalue of the plain symmetric matrix
    shifted = np.linalg.eigvalsh(An + 0.1 * np.eye(4))
    plain = np.linalg.eigvalsh(An)
    np.testing.assert_allclose(shifted, plain + 0.1, atol=1e-14)
    assert np.abs(plain[1:3]).max() < 1e-15   # multiplicity dim at zero


def test_direct_residual_matches_assembled_matrices(spec, eos_params, box, props):
    """Dual route: the expanded right side equals (A0)^{-1}(F - A^j d_j U - B U)
    assembled from the coefficient matrices with the same stencils."""
    solver = make_solver(spec, (16, 32), eos_params, box)
    mesh = solver.mesh
    rng = np.random.default_rng(1)
    r = np.linalg.norm(mesh.nodes, axis=-1)
    th_ang = np.arctan2(mesh.nodes[..., 1], mesh.nodes[..., 0])
    U = FluidField(
        1.0 + 0.05 * np.sin(2 * th_ang) * np.exp(-((r - 1.2) ** 2)),
        0.05 * np.stack([np.cos(th_ang), np.sin(2 * th_ang)], axis=-1),
        0.1 * np.cos(th_ang),
    )
    theta = SolidVelocity(np.array([0.1, 0.05]), np.array([0.2]))
    # a configuration with nontrivial J1, J2 obtained by integrating a spin
    conf = Configuration.identity(mesh)
    sampler = lambda t: theta
    from rigidflow.kinematics import advance_configuration
    t = 0.0
    for _ in range(20):
        conf = advance_configuration(conf, sampler, t, 0.01, spec)
        t += 0.01
    eps = 0.08
    reg = solver.make_regularization(eps, U, theta, props, K=1)

    direct = solver.spatial_residual(U, theta, conf, reg, 0.3, dissipation=False)

    cs = solver.assemble_coefficients(theta, conf, U, eps=eps, nu=reg.nu.nu)
    pp, up, sp = solver.apply_boundary(U, theta, reg, 0.3)
    gp = solver._grad(pp, U.p)
    gs = solver._grad(sp, U.s)
    gu0 = solver._grad(up[..., 0], U.u[..., 0])
    gu1 = solver._grad(up[..., 1], U.u[..., 1])
    dU = np.stack([
        np.stack([gp[..., 0], gu0[..., 0], gu1[..., 0], gs[..., 0]], axis=-1),
        np.stack([gp[..., 1], gu0[..., 1], gu1[..., 1], gs[..., 1]], axis=-1),
    ])
    Uvec = np.stack([U.p, U.u[..., 0], U.u[..., 1], U.s], axis=-1)
    _, (Fp, Fu, Fs) = solver.reference_extension(reg, 0.3)
    Fvec = np.stack([Fp, Fu[..., 0], Fu[..., 1], Fs], axis=-1)
    rhs = Fvec.copy()
    for j in range(2):
        rhs -= np.einsum("...ab,...b->...a", cs.A[j], dU[j])
    rhs -= np.einsum("...ab,...b->...a", cs.B, Uvec)
    R = np.linalg.solve(cs.A0, rhs[..., None])[..., 0]

    scale = max(np.abs(R).max(), 1.0)
    assert np.abs(R[..., 0] - direct[0]).max() < 1e-12 * scale
    assert np.abs(R[..., 1] - direct[1][..., 0]).max() < 1e-12 * scale
    assert np.abs(R[..., 2] - direct[1][..., 1]).max() < 1e-12 * scale
    assert np.abs(R[..., 3] - direct[2]).max() < 1e-12 * scale


def test_ghosts_are_noop_at_rest(setup):
    solver, U, theta, conf, reg = setup
    pp, up, sp = solver.apply_boundary(U, theta, reg, 0.0)
    assert np.array_equal(pp[0], U.p[1]) and np.array_equal(pp[1], U.p[0])
    assert np.array_equal(up[1], U.u[0])
    assert np.array_equal(sp[-1], U.s[-2])


def test_boundary_enforces_wall_velocity(setup):
    solver, U, theta, conf, reg = setup
    th = SolidVelocity(np.array([1.0, 0.0]), np.array([0.0]))
    faces = solver.boundary_face_states(U, th, reg, 0.0)
    f = faces[SOLID]
    got = np.einsum("ja,ja->j", f["u"], f["normals"])
    want = np.einsum("ja,ja->j", f["u_bc"], f["normals"])
    np.testing.assert_allclose(got, want, atol=1e-12)
    # outer wall: homogeneous condition
    fo = faces[OUTER]
    assert np.abs(np.einsum("ja,ja->j", fo["u"], fo["normals"])).max() < 1e-12


def test_wall_reflection_keeps_normal_flux_zero(spec, eos_params, box, props):
    solver = make_solver(spec, (48, 16), eos_params, box)
    U = gaussian_pulse(solver.mesh)
    theta = SolidVelocity.zero(2)
    conf = Configuration.identity(solver.mesh)
    reg = solver.make_regularization(0.0, U, theta, props, K=1)
    t, t_end = 0.0, 1.5
    worst = 0.0
    while t < t_end:
        dt = min(0.9 * solver.cfl_dt(U, theta, conf, reg), t_end - t)
        U = solver.fluid_step(U, lambda tau: theta, conf, reg, t, dt)
        t += dt
        worst = max(worst, solver.boundary_mismatch(U, theta, reg, t))
    assert worst <= 1e-10
    # the pulse is still in the domain: energy has not leaked away
    assert np.abs(U.p - 1.0).max() > 1e-4


def test_boundary_mismatch_scales_with_eps(spec, eos_params, box, props):
    solver = make_solver(spec, (48, 16), eos_params, box)
    theta = SolidVelocity.zero(2)
    conf = Configuration.identity(solver.mesh)

    def worst_mismatch(eps):
        U = gaussian_pulse(solver.mesh)
        reg = solver.make_regularization(eps, U, theta, props, K=1)
        t, worst = 0.0, 0.0
        while t < 1.5:
            dt = min(0.9 * solver.cfl_dt(U, theta, conf, reg), 1.5 - t)
            U = solver.fluid_step(U, lambda tau: theta, conf, reg, t, dt)
            t += dt
            worst = max(worst, solver.boundary_mismatch(U, theta, reg, t))
        return worst

    m1, m2 = worst_mismatch(0.1), worst_mismatch(0.05)
    assert m2 < m1
    assert m1 / m2 == pytest.approx(2.0, rel=0.35)


def test_compatibility_derivatives_uniform_data(setup):
    solver, U, theta, conf, reg = setup
    props = mass_properties(1.0, solver.spec)
    moments = solver.compatibility_derivatives(U, theta, props, 2)
    for m in moments[1:]:
        assert np.abs(m.p).max() < 1e-13
        assert np.abs(m.u).max() < 1e-13
        assert np.abs(m.s).max() < 1e-13
        assert np.abs(m.l).max() < 1e-13
        assert np.abs(m.omega).max() < 1e-13


def test_compatibility_first_order_radial_pressure(spec, eos_params, box, props):
    solver = make_solver(spec, (32, 64), eos_params, box)
    mesh = solver.mesh
    U = gaussian_pulse(mesh, amp=1e-3, width=0.15)
    theta = SolidVelocity.zero(2)
    moments = solver.compatibility_derivatives(U, theta, props, 1)
    m1 = moments[1]
    # dp/dt and ds/dt vanish for initial rest data; du/dt = -grad p / eta
    assert np.abs(m1.p).max() == 0.0
    assert np.abs(m1.s).max() == 0.0
    r = np.linalg.norm(mesh.nodes, axis=-1)
    gp = 1e-3 * np.exp(-(((r - 1.25) / 0.15) ** 2)) * (-2 * (r - 1.25) / 0.15**2)
    eta = density(U.p, U.s, solver.params)
    exact = -(gp / eta)[..., None] * mesh.nodes / r[..., None]
    h2 = (mesh.dr**2 + (r.max() * mesh.dtheta) ** 2)
    assert np.abs(m1.u - exact).max() < 50.0 * h2 * np.abs(gp).max()
    # concentric radial load gives no net force
    assert np.abs(m1.l).max() < 1e-14
    assert np.abs(m1.omega).max() < 1e-14


def test_compatibility_order_cap(setup):
    solver, U, theta, conf, reg = setup
    props = mass_properties(1.0, solver.spec)
    with pytest.raises(UnsupportedOrderError):
        solver.compatibility_derivatives(U, theta, props, 3)


def test_reference_extension_values(spec, eos_params, box, props):
    solver = make_solver(spec, (16, 32), eos_params, box)
    U = gaussian_pulse(solver.mesh, amp=0.05)
    theta = SolidVelocity.zero(2)
    reg = solver.make_regularization(0.25, U, theta, props, K=2)
    ref, (Fp, Fu, Fs) = solver.reference_extension(reg, 0.0)
    assert np.array_equal(ref.p, U.p)
    assert np.array_equal(ref.u, U.u)
    nu = reg.nu.nu
    from rigidflow.kinematics import chart_gradient
    manual = 0.25 * np.einsum("...a,...a->...", nu, chart_gradient(solver.mesh, U.p))
    np.testing.assert_allclose(Fp, manual, atol=1e-14)

    # uniform data: F vanishes for all t
    U0 = FluidField.uniform(solver.mesh, 1.0, 0.0)
    reg0 = solver.make_regularization(0.25, U0, theta, props, K=2)
    _, (Fp0, Fu0, Fs0) = solver.reference_extension(reg0, 0.7)
    assert max(np.abs(Fp0).max(), np.abs(Fu0).max(), np.abs(Fs0).max()) < 1e-13

    # eps = 0: no source regardless of the data
    regz = solver.make_regularization(0.0, U, theta, props, K=2)
    _, (Fpz, _, _) = solver.reference_extension(regz, 0.7)
    assert np.abs(Fpz).max() == 0.0


def test_fluid_step_cfl_guard(setup):
    solver, U, theta, conf, reg = setup
    dt = solver.cfl_dt(U, theta, conf, reg)
    with pytest.raises(StepSizeError):
        solver.fluid_step(U, lambda t: theta, conf, reg, 0.0, 2.0 * dt)


def test_fluid_step_region_guard(spec, eos_params, props):
    tight = rf.HyperbolicityBox(p_min=0.9999, p_max=1.0005, s_min=-0.1, s_max=0.1)
    solver = make_solver(spec, (24, 16), eos_params, tight)
    U = gaussian_pulse(solver.mesh, amp=4e-4)
    theta = SolidVelocity.zero(2)
    conf = Configuration.identity(solver.mesh)
    reg = solver.make_regularization(0.0, U, theta, props, K=1)
    with pytest.raises(RegionError):
        t = 0.0
        for _ in range(400):
            dt = 0.9 * solver.cfl_dt(U, theta, conf, reg)
            U = solver.fluid_step(U, lambda tau: theta, conf, reg, t, dt)
            t += dt


def test_limiter_validation(spec, eos_params, box):
    with pytest.raises(DomainError):
        make_solver(spec, (16, 32), eos_params, box, limiter="superbee")
    solver = make_solver(spec, (16, 32), eos_params, box, limiter="none")
    assert solver.limiter == "none"


def test_solver_rejects_3d_mesh(eos_params, box):
    spec3 = rf.DomainSpec(dim=3, r_s=0.5, R_o=2.0, R0=0.3, offset=(0, 0, 0))
    mesh3 = rf.build_mesh(spec3, (8, 8, 8))
    with pytest.raises(DomainError):
        FluidSolver(mesh3, eos_params, box)
