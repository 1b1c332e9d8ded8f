"""Reference domains, boundary-fitted meshes, cutoff, and surface quadrature.

The fluid occupies the gap between a solid disk/sphere (centered at the
origin) and an outer circle/sphere.  The mesh is a structured polar or
spherical grid of cell centers; the two boundary circles each carry a
patch of faces with exact arc/band weights, so constant integrands are
integrated exactly and the closed-surface identities hold to roundoff.

An outer boundary offset is supported in 2D via a linear blend of the two
circle centers; the chart Jacobian then carries the metric for gradient
transforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, ShapeError

SOLID = "solid"
OUTER = "outer"


@dataclass(frozen=True)
class DomainSpec:
    """Geometry of the reference configuration.

    The solid body of radius ``r_s`` sits at the origin; the outer boundary
    is the circle/sphere of radius ``R_o`` centered at ``-offset`` (so
    ``offset`` is the displacement of the solid center from the outer
    center).  ``R0`` is the inner margin of the cutoff transition band.
    """

    dim: int = 2
    r_s: float = 0.5
    R_o: float = 2.0
    R0: float = 0.3
    offset: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConstructionError(f"dim must be 2 or 3, got {self.dim}")
        off = np.asarray(self.offset, dtype=float)
        if off.shape != (self.dim,):
            raise ConstructionError(
                f"offset must have {self.dim} components, got shape {off.shape}"
            )
        if not self.r_s > 0.0:
            raise ConstructionError(f"r_s must be > 0, got {self.r_s}")
        if not self.r_s + float(np.linalg.norm(off)) + 2.0 * self.R0 < self.R_o:
            raise ConstructionError(
                "need r_s + |offset| + 2*R0 < R_o so the cutoff transition "
                f"band fits inside the domain; got r_s={self.r_s}, "
                f"|offset|={float(np.linalg.norm(off))}, R0={self.R0}, R_o={self.R_o}"
            )
        if self.dim == 3 and float(np.linalg.norm(off)) > 0.0:
            raise ConstructionError("offset geometry is only supported in 2D")

    @property
    def outer_center(self):
        return -np.asarray(self.offset, dtype=float)


def smoothstep(t):
    """Quintic smoothstep 6t^5 - 15t^4 + 10t^3 on [0, 1], clamped outside."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def smoothstep_d1(t):
    tc = np.clip(t, 0.0, 1.0)
    v = 30.0 * tc * tc * (tc - 1.0) * (tc - 1.0)
    return np.where((t > 0.0) & (t < 1.0), v, 0.0)


def smoothstep_d2(t):
    tc = np.clip(t, 0.0, 1.0)
    v = 60.0 * tc * (tc - 1.0) * (2.0 * tc - 1.0)
    return np.where((t > 0.0) & (t < 1.0), v, 0.0)


def cutoff_profile(spec: DomainSpec, dist):
    """Cutoff value and first two radial derivatives vs distance to the solid.

    1 for dist <= R0, 0 for dist >= 2*R0, quintic smoothstep between; C^2.
    """
    t = (np.asarray(dist, dtype=float) - spec.R0) / spec.R0
    chi = 1.0 - smoothstep(t)
    d1 = -smoothstep_d1(t) / spec.R0
    d2 = -smoothstep_d2(t) / spec.R0**2
    return chi, d1, d2


def cutoff(spec: DomainSpec, y):
    """chi(y): 1 on the solid neighborhood, 0 near the outer wall."""
    y = np.asarray(y, dtype=float)
    dist = np.linalg.norm(y, axis=-1) - spec.r_s
    return cutoff_profile(spec, dist)[0]


def cutoff_with_derivs(spec: DomainSpec, y, hessian=True):
    """(chi, grad chi, hess chi) at points y with shape (..., dim).

    chi is radial about the origin, so the derivatives follow from the
    scalar profile g(rho): grad = g' rhat, hess = g'' rhat rhat^T
    + (g'/rho) (I - rhat rhat^T).  hess is None when hessian is False.
    """
    y = np.asarray(y, dtype=float)
    d = y.shape[-1]
    rho = np.sqrt(np.sum(y * y, axis=-1))
    rho_safe = np.maximum(rho, 1e-300)
    rhat = y / rho_safe[..., None]
    g, g1, g2 = cutoff_profile(spec, rho - spec.r_s)
    grad = g1[..., None] * rhat
    if not hessian:
        return g, grad, None
    hess = np.zeros(y.shape[:-1] + (d, d))
    band = (g1 != 0.0) | (g2 != 0.0)
    if np.any(band):
        eye = np.eye(d)
        rb = rhat[band]
        rr = rb[:, :, None] * rb[:, None, :]
        hess[band] = g2[band][:, None, None] * rr \
            + (g1[band] / rho_safe[band])[:, None, None] * (eye - rr)
    return g, grad, hess


@dataclass
class BoundaryPatch:
    """One closed boundary component: face centers, unit normals, weights.

    Normals point out of the fluid: into the solid on the SOLID patch and
    away from the domain on the OUTER patch.  Weights are exact arc lengths
    (2D) or exact latitude-band areas (3D), so sum(weights) equals the
    analytic surface measure in 2D and to quadrature order in 3D.
    """

    tag: str
    centers: np.ndarray
    normals: np.ndarray
    weights: np.ndarray

    @property
    def n_faces(self):
        return self.weights.shape[0]


@dataclass
class Mesh:
    spec: DomainSpec
    dim: int
    shape: tuple
    dr: float
    dtheta: float
    dphi: float
    r: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    nodes: np.ndarray       # (..., dim) cell-center coordinates
    volumes: np.ndarray     # (...) cell measures
    jinv_t: np.ndarray      # (..., dim, dim): grad_x f = jinv_t @ grad_chart f
    h_axis: tuple           # physical spacing arrays, one per chart axis
    patches: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return int(np.prod(self.shape))

    def node_radii(self):
        """Distance of each node to the solid center (the origin)."""
        return np.linalg.norm(self.nodes, axis=-1)

    def boundary_distances(self):
        """(dist to solid wall, dist to outer wall) per node."""
        z_s = self.node_radii() - self.spec.r_s
        z_o = self.spec.R_o - np.linalg.norm(
            self.nodes - self.spec.outer_center, axis=-1
        )
        return z_s, z_o


def build_mesh(spec: DomainSpec, resolution) -> Mesh:
    """Boundary-fitted polar (2D) or spherical (3D) mesh of cell centers.

    resolution: (N_r, N_theta) in 2D, (N_r, N_theta, N_phi) in 3D, each >= 8.
    """
    res = tuple(int(n) for n in np.atleast_1d(resolution))
    if spec.dim == 2:
        if len(res) != 2:
            raise ConstructionError(f"2D mesh needs (N_r, N_theta), got {res}")
    else:
        if len(res) != 3:
            raise ConstructionError(f"3D mesh needs (N_r, N_theta, N_phi), got {res}")
    if any(n < 8 for n in res):
        raise ConstructionError(f"need at least 8 cells per direction, got {res}")
    if spec.dim == 2:
        return _build_mesh_2d(spec, *res)
    return _build_mesh_3d(spec, *res)


def _build_mesh_2d(spec, n_r, n_t):
    dr = (spec.R_o - spec.r_s) / n_r
    dth = 2.0 * np.pi / n_t
    r = spec.r_s + (np.arange(n_r) + 0.5) * dr
    th = (np.arange(n_t) + 0.5) * dth
    c_out = spec.outer_center

    R, TH = np.meshgrid(r, th, indexing="ij")
    er = np.stack([np.cos(TH), np.sin(TH)], axis=-1)
    et = np.stack([-np.sin(TH), np.cos(TH)], axis=-1)
    blend = ((R - spec.r_s) / (spec.R_o - spec.r_s))[..., None]
    nodes = blend * c_out + R[..., None] * er

    # Chart Jacobian J = [dx/dr | dx/dtheta]; volumes use det J which is
    # linear in r, so midpoint values give exact sector areas when centered.
    bprime = 1.0 / (spec.R_o - spec.r_s)
    dx_dr = bprime * c_out + er
    dx_dt = R[..., None] * et
    jac = np.stack([dx_dr, dx_dt], axis=-1)
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    if np.any(det <= 0.0):
        raise ConstructionError("chart Jacobian is not positive; offset too large")
    inv = np.empty_like(jac)
    inv[..., 0, 0] = jac[..., 1, 1]
    inv[..., 0, 1] = -jac[..., 0, 1]
    inv[..., 1, 0] = -jac[..., 1, 0]
    inv[..., 1, 1] = jac[..., 0, 0]
    inv = inv / det[..., None, None]
    jinv_t = np.swapaxes(inv, -1, -2)
    volumes = det * dr * dth
    h_r = dr * np.linalg.norm(dx_dr, axis=-1)
    h_t = dth * np.linalg.norm(dx_dt, axis=-1)

    er_f = np.stack([np.cos(th), np.sin(th)], axis=-1)
    patches = {
        SOLID: BoundaryPatch(
            tag=SOLID,
            centers=spec.r_s * er_f,
            normals=-er_f,
            weights=np.full(n_t, spec.r_s * dth),
        ),
        OUTER: BoundaryPatch(
            tag=OUTER,
            centers=c_out + spec.R_o * er_f,
            normals=er_f.copy(),
            weights=np.full(n_t, spec.R_o * dth),
        ),
    }
    return Mesh(
        spec=spec, dim=2, shape=(n_r, n_t), dr=dr, dtheta=dth, dphi=0.0,
        r=r, theta=th, phi=np.zeros(0), nodes=nodes, volumes=volumes,
        jinv_t=jinv_t, h_axis=(h_r, h_t), patches=patches,
    )


def _build_mesh_3d(spec, n_r, n_t, n_p):
    dr = (spec.R_o - spec.r_s) / n_r
    dth = np.pi / n_t
    dph = 2.0 * np.pi / n_p
    r = spec.r_s + (np.arange(n_r) + 0.5) * dr
    th = (np.arange(n_t) + 0.5) * dth        # polar angle in (0, pi)
    ph = (np.arange(n_p) + 0.5) * dph

    R, TH, PH = np.meshgrid(r, th, ph, indexing="ij")
    st, ct = np.sin(TH), np.cos(TH)
    cp, sp = np.cos(PH), np.sin(PH)
    rhat = np.stack([st * cp, st * sp, ct], axis=-1)
    that = np.stack([ct * cp, ct * sp, -st], axis=-1)
    phat = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    nodes = R[..., None] * rhat

    # Exact shell-sector volumes: radial and polar factors integrated
    # analytically, azimuth uniform.
    r_lo = spec.r_s + np.arange(n_r) * dr
    r_hi = r_lo + dr
    rad = (r_hi**3 - r_lo**3) / 3.0
    th_lo = np.arange(n_t) * dth
    band = np.cos(th_lo) - np.cos(th_lo + dth)
    volumes = rad[:, None, None] * band[None, :, None] * np.full(n_p, dph)[None, None, :]

    jinv_t = np.zeros(R.shape + (3, 3))
    jinv_t[..., :, 0] = rhat
    jinv_t[..., :, 1] = that / R[..., None]
    jinv_t[..., :, 2] = phat / (R * st)[..., None]
    h_r = np.full_like(R, dr)
    h_t = R * dth
    h_p = R * st * dph

    TH_f, PH_f = np.meshgrid(th, ph, indexing="ij")
    st_f, ct_f = np.sin(TH_f), np.cos(TH_f)
    rhat_f = np.stack([st_f * np.cos(PH_f), st_f * np.sin(PH_f), ct_f], axis=-1)
    rhat_f = rhat_f.reshape(-1, 3)
    band_w = np.repeat(band, n_p) * dph
    patches = {
        SOLID: BoundaryPatch(
            tag=SOLID,
            centers=spec.r_s * rhat_f,
            normals=-rhat_f,
            weights=spec.r_s**2 * band_w,
        ),
        OUTER: BoundaryPatch(
            tag=OUTER,
            centers=spec.R_o * rhat_f,
            normals=rhat_f.copy(),
            weights=spec.R_o**2 * band_w,
        ),
    }
    return Mesh(
        spec=spec, dim=3, shape=(n_r, n_t, n_p), dr=dr, dtheta=dth, dphi=dph,
        r=r, theta=th, phi=ph, nodes=nodes, volumes=volumes,
        jinv_t=jinv_t, h_axis=(h_r, h_t, h_p), patches=patches,
    )


@dataclass
class NormalExtension:
    """Smooth interior extension nu of the boundary normal field.

    Equals the outward (out-of-fluid) boundary normal on each wall and
    decays to zero at mid-gap through the same quintic blend as the cutoff,
    so |nu| <= 1 everywhere and nu is C^2 across the gap.
    """

    nu: np.ndarray

    def at_patch(self, mesh: Mesh, tag: str):
        return mesh.patches[tag].normals


def extended_normal(mesh: Mesh) -> NormalExtension:
    spec = mesh.spec
    z_s, z_o = mesh.boundary_distances()
    gap = spec.R_o - spec.r_s - float(np.linalg.norm(spec.offset))
    delta = 0.5 * gap
    w_s = 1.0 - smoothstep(z_s / delta)
    w_o = 1.0 - smoothstep(z_o / delta)
    radii = mesh.node_radii()
    rhat_solid = mesh.nodes / radii[..., None]
    to_outer = mesh.nodes - spec.outer_center
    rhat_outer = to_outer / np.linalg.norm(to_outer, axis=-1)[..., None]
    nu = -w_s[..., None] * rhat_solid + w_o[..., None] * rhat_outer
    return NormalExtension(nu=nu)


def surface_integral(mesh: Mesh, patch: BoundaryPatch, integrand):
    """Quadrature sum(w_f * integrand_f) over a boundary patch.

    integrand has shape (n_faces,) or (n_faces, k); returns a scalar or a
    length-k vector.  Exact for constants on 2D patches.
    """
    vals = np.asarray(integrand, dtype=float)
    if vals.shape[0] != patch.n_faces:
        raise ShapeError(
            f"integrand has {vals.shape[0]} entries for a patch with "
            f"{patch.n_faces} faces"
        )
    weighted = patch.weights.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals
    out = weighted.sum(axis=0)
    return float(out) if np.ndim(out) == 0 else out
