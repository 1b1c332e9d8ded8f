"""Solid state and flow-map configuration evolved on the reference mesh.

The solid is described by body-frame translational and angular velocity;
the domain motion by the bundle (h, Q, phi, J1, J2): center position,
rotation, per-node flow-map image, its gradient and its Hessian.  The
transport field V is the rigid velocity masked by the cutoff, so it is
affine where the cutoff is 1 and zero near the outer wall; V and its
spatial derivatives are evaluated analytically from the cutoff profile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import DegeneracyError, DomainError
from .geometry import DomainSpec, Mesh


@dataclass
class SolidVelocity:
    """Body-frame velocities: l (dim,) and omega ((1,) in 2D, (3,) in 3D)."""

    l: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.l = np.atleast_1d(np.asarray(self.l, dtype=float))
        self.omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        if not (np.all(np.isfinite(self.l)) and np.all(np.isfinite(self.omega))):
            raise DomainError("solid velocity components must be finite")

    @classmethod
    def zero(cls, dim):
        return cls(np.zeros(dim), np.zeros(1 if dim == 2 else 3))

    @property
    def dim(self):
        return self.l.shape[0]

    def copy(self):
        return SolidVelocity(self.l.copy(), self.omega.copy())

    def packed(self):
        return np.concatenate([self.l, self.omega])

    @classmethod
    def from_packed(cls, vec, dim):
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:dim], vec[dim:])


def omega_cross(omega, v):
    """omega x v for v of shape (..., dim); omega scalar-like in 2D."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] == 2:
        w = float(np.asarray(omega).reshape(-1)[0])
        return w * np.stack([-v[..., 1], v[..., 0]], axis=-1)
    return np.cross(np.broadcast_to(np.asarray(omega, dtype=float), v.shape), v)


def skew(omega, dim):
    """Matrix D with D v = omega x v."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if dim == 2:
        w = omega[0]
        return np.array([[0.0, -w], [w, 0.0]])
    wx, wy, wz = omega
    return np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])


def rotate_omega(Q, omega):
    """Angular velocity pushed through a rotation (identity in 2D)."""
    if Q.shape[0] == 2:
        return np.atleast_1d(np.asarray(omega, dtype=float)).copy()
    return Q @ np.asarray(omega, dtype=float)


def solid_boundary_velocity(theta: SolidVelocity, x, spec: DomainSpec):
    """Body-frame wall velocity l + omega x x for x on the solid boundary."""
    x = np.asarray(x, dtype=float)
    radii = np.linalg.norm(x, axis=-1)
    if np.any(np.abs(radii - spec.r_s) > 1e-9 * max(spec.r_s, 1.0)):
        raise DomainError("point is not on the solid boundary circle")
    return theta.l + omega_cross(theta.omega, x)


def velocity_and_grads(theta: SolidVelocity, h, Q, points, spec: DomainSpec,
                       hessian=True):
    """Transport velocity V = chi * u_S at points, with grad and Hessian.

    u_S(y) = Q l + (Q omega) x (y - h) is affine, so
    grad V = u_S (x) grad chi + chi * D and
    hess V_{i,ab} = hess chi_{ab} u_S_i + grad chi_a D_{ib} + grad chi_b D_{ia}
    with D the skew matrix of the space-frame angular velocity.
    hess is None when hessian is False.
    """
    pts = np.asarray(points, dtype=float)
    d = pts.shape[-1]
    l_glob = Q @ theta.l
    om_glob = rotate_omega(Q, theta.omega)
    D = skew(om_glob, d)
    u_s = l_glob + omega_cross(om_glob, pts - h)
    chi, gchi, hchi = geometry.cutoff_with_derivs(spec, pts, hessian=hessian)
    V = chi[..., None] * u_s
    grad = u_s[..., :, None] * gchi[..., None, :] + chi[..., None, None] * D
    if not hessian:
        return V, grad, None
    # the Hessian is supported on the cutoff transition band only
    band = np.any(gchi != 0.0, axis=-1) | np.any(hchi != 0.0, axis=(-2, -1))
    hess = np.zeros(pts.shape[:-1] + (d, d, d))
    if np.any(band):
        gb = gchi[band]
        ub = u_s[band]
        hess[band] = (
            hchi[band][:, None, :, :] * ub[:, :, None, None]
            + gb[:, None, :, None] * D[None, :, None, :]
            + gb[:, None, None, :] * D[None, :, :, None]
        )
    return V, grad, hess


def transport_velocity(theta: SolidVelocity, conf: "Configuration", y, spec: DomainSpec):
    """V at reference-space points y for the current (h, Q)."""
    V, _, _ = velocity_and_grads(theta, conf.h, conf.Q, y, spec)
    return V


@dataclass
class Configuration:
    """Flow-map bundle (h, Q, phi, J1, J2) on the mesh nodes."""

    h: np.ndarray
    Q: np.ndarray
    phi: np.ndarray
    J1: np.ndarray
    J2: np.ndarray

    @classmethod
    def identity(cls, mesh: Mesh):
        d = mesh.dim
        shape = mesh.shape
        J1 = np.broadcast_to(np.eye(d), shape + (d, d)).copy()
        return cls(
            h=np.zeros(d),
            Q=np.eye(d),
            phi=mesh.nodes.copy(),
            J1=J1,
            J2=np.zeros(shape + (d, d, d)),
        )

    @property
    def dim(self):
        return self.h.shape[0]

    def copy(self):
        return Configuration(
            self.h.copy(), self.Q.copy(), self.phi.copy(),
            self.J1.copy(), self.J2.copy(),
        )


def matinv(A):
    """Inverse of per-node matrices; closed form in 2D."""
    if A.shape[-1] == 2:
        det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
        inv = np.empty_like(A)
        inv[..., 0, 0] = A[..., 1, 1]
        inv[..., 0, 1] = -A[..., 0, 1]
        inv[..., 1, 0] = -A[..., 1, 0]
        inv[..., 1, 1] = A[..., 0, 0]
        return inv / det[..., None, None]
    return np.linalg.inv(A)


def matdet(A):
    if A.shape[-1] == 2:
        return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    return np.linalg.det(A)


def metric(conf: Configuration):
    """Pullback metric M = (grad phi)^T grad phi = J1^T J1, SPD per node."""
    det = matdet(conf.J1)
    if np.any(np.abs(det) < 1e-13):
        raise DegeneracyError("flow-map gradient is numerically singular")
    J = conf.J1
    if J.shape[-1] == 2:
        M = np.empty_like(J)
        M[..., 0, 0] = J[..., 0, 0] ** 2 + J[..., 1, 0] ** 2
        M[..., 0, 1] = J[..., 0, 0] * J[..., 0, 1] + J[..., 1, 0] * J[..., 1, 1]
        M[..., 1, 0] = M[..., 0, 1]
        M[..., 1, 1] = J[..., 0, 1] ** 2 + J[..., 1, 1] ** 2
        return M
    return np.einsum("...ij,...ik->...jk", J, J)


def apply_mat(A, v):
    """A @ v for per-node matrices; unrolled in 2D."""
    if A.shape[-1] == 2:
        return np.stack(
            [A[..., 0, 0] * v[..., 0] + A[..., 0, 1] * v[..., 1],
             A[..., 1, 0] * v[..., 0] + A[..., 1, 1] * v[..., 1]], axis=-1
        )
    return np.einsum("...ij,...j->...i", A, v)


def us_bar_field(theta: SolidVelocity, conf: Configuration, spec: DomainSpec):
    """Pulled-back transport velocity J1^{-1} V(phi) on the nodes,
    together with grad V evaluated at the flow-map images (used by the
    zeroth-order coefficient block)."""
    V, gradV, _ = velocity_and_grads(theta, conf.h, conf.Q, conf.phi, spec,
                                     hessian=False)
    us = apply_mat(matinv(conf.J1), V)
    return us, gradV


def polar_project(Q):
    """Nearest rotation matrix (polar factor) to Q."""
    U, _, Vt = np.linalg.svd(Q)
    R = U @ Vt
    if np.linalg.det(R) < 0.0:
        U[:, -1] = -U[:, -1]
        R = U @ Vt
    return R


def _conf_rhs(theta, h, Q, phi, J1, J2, spec):
    d = h.shape[0]
    V, G, H = velocity_and_grads(theta, h, Q, phi, spec)
    dh = Q @ theta.l
    dQ = Q @ skew(theta.omega, d)
    dJ1 = np.matmul(G, J1)
    shape = J2.shape
    dJ2 = np.matmul(G, J2.reshape(shape[:-2] + (d * d,))).reshape(shape)
    # Hessian source J1^T H_i J1; H vanishes outside the cutoff transition
    # band, so restrict the product to its exact support.
    mask = np.abs(H).sum(axis=(-3, -2, -1)) != 0.0
    if np.any(mask):
        J1m = J1[mask]
        J1mT = np.swapaxes(J1m, -1, -2)[:, None, :, :]
        src = np.matmul(np.matmul(J1mT, H[mask]), J1m[:, None, :, :])
        dJ2[mask] += src
    return dh, dQ, V, dJ1, dJ2


def advance_configuration(conf: Configuration, theta_sampler, t, dt,
                          spec: DomainSpec, det_floor=0.1) -> Configuration:
    """One RK4 step of the flow-map bundle with Q re-orthonormalized.

    theta_sampler maps a time to a SolidVelocity.  Raises DegeneracyError
    when det J1 drops below det_floor (mesh map close to folding).
    """
    # exact early-out: a resting solid moves nothing (all RK stages vanish)
    if all(
        not np.any(th.l) and not np.any(th.omega)
        for th in (theta_sampler(t), theta_sampler(t + 0.5 * dt),
                   theta_sampler(t + dt))
    ):
        return conf.copy()

    # Nodes whose image lies outside the cutoff support are exactly frozen
    # (V and its derivatives vanish there and phi cannot re-enter), so the
    # per-node ODEs only need integrating on the active set.
    active = np.linalg.norm(conf.phi, axis=-1) < spec.r_s + 2.0 * spec.R0
    y = (conf.h, conf.Q, conf.phi[active], conf.J1[active], conf.J2[active])

    def rhs(tau, state):
        return _conf_rhs(theta_sampler(tau), *state, spec)

    k1 = rhs(t, y)
    y2 = tuple(a + 0.5 * dt * k for a, k in zip(y, k1))
    k2 = rhs(t + 0.5 * dt, y2)
    y3 = tuple(a + 0.5 * dt * k for a, k in zip(y, k2))
    k3 = rhs(t + 0.5 * dt, y3)
    y4 = tuple(a + dt * k for a, k in zip(y, k3))
    k4 = rhs(t + dt, y4)
    new = tuple(
        a + (dt / 6.0) * (ka + 2.0 * kb + 2.0 * kc + kd)
        for a, ka, kb, kc, kd in zip(y, k1, k2, k3, k4)
    )
    phi = conf.phi.copy()
    J1 = conf.J1.copy()
    J2 = conf.J2.copy()
    phi[active] = new[2]
    J1[active] = new[3]
    J2[active] = new[4]
    out = Configuration(new[0], polar_project(new[1]), phi, J1, J2)
    det = matdet(out.J1)
    if np.any(det < det_floor):
        raise DegeneracyError(
            f"det(J1) fell to {float(det.min()):.3e} (< floor {det_floor}); "
            "the flow map is close to entanglement"
        )
    return out


def chart_gradient(mesh: Mesh, f):
    """Cartesian gradient of a node scalar field by 2nd-order differences.

    Central along every chart axis; one-sided 2nd-order at the radial ends.
    Returns shape mesh.shape + (dim,).
    """
    if mesh.dim != 2:
        raise DomainError("chart_gradient is implemented for 2D meshes")
    df_dr = np.empty_like(f)
    df_dr[1:-1] = (f[2:] - f[:-2]) / (2.0 * mesh.dr)
    df_dr[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * mesh.dr)
    df_dr[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * mesh.dr)
    df_dt = (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * mesh.dtheta)
    grad_chart = np.stack([df_dr, df_dt], axis=-1)
    return np.einsum("...ij,...j->...i", mesh.jinv_t, grad_chart)


def _chart_diffs(mesh: Mesh, f):
    """2nd-order differences of a scalar field along the chart axes."""
    dr = np.empty_like(f)
    dr[1:-1] = (f[2:] - f[:-2]) / (2.0 * mesh.dr)
    dr[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * mesh.dr)
    dr[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * mesh.dr)
    dt = (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * mesh.dtheta)
    return np.stack([dr, dt], axis=-1)


def discrete_flowmap_gradient(mesh: Mesh, phi):
    """grad phi by the discrete chain rule D(phi) (D(x))^{-1}.

    Differencing the node coordinates with the same stencils makes the
    identity map exactly gradient-free of error.
    """
    if mesh.dim != 2:
        raise DomainError("discrete gradients are implemented for 2D meshes")
    dphi = np.stack([_chart_diffs(mesh, phi[..., i]) for i in range(2)], axis=-2)
    dx = np.stack([_chart_diffs(mesh, mesh.nodes[..., i]) for i in range(2)], axis=-2)
    return np.matmul(dphi, matinv(dx))


def configuration_residuals(conf: Configuration, mesh: Mesh):
    """Consistency report for a configuration.

    orthogonality:   ||Q^T Q - I||_F
    gradient_defect: max over interior nodes of ||D(phi) - J1||_F where D
                     is the mesh's discrete 2nd-order gradient
    boundary_metric: max over wall-adjacent node rings of ||M - I||_F
    """
    d = conf.dim
    orth = float(np.linalg.norm(conf.Q.T @ conf.Q - np.eye(d)))

    grad_num = discrete_flowmap_gradient(mesh, conf.phi)
    defect = np.linalg.norm(grad_num - conf.J1, axis=(-2, -1))
    grad_defect = float(defect[1:-1].max()) if defect.shape[0] > 2 else float(defect.max())

    M = metric(conf)
    mdef = np.linalg.norm(M - np.eye(d), axis=(-2, -1))
    boundary = float(max(mdef[0].max(), mdef[-1].max()))
    return {
        "orthogonality": orth,
        "gradient_defect": grad_defect,
        "boundary_metric": boundary,
    }
