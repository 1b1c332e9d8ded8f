"""Rigid-body mass properties, pressure loads, and velocity dynamics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .geometry import SOLID, BoundaryPatch, DomainSpec, Mesh, surface_integral
from .kinematics import SolidVelocity, omega_cross


@dataclass(frozen=True)
class BodyProps:
    """Mass, inertia (scalar in 2D, SPD matrix in 3D) and solid density."""

    mass: float
    J0: object
    rho_S: float
    dim: int

    def __post_init__(self):
        if not self.mass > 0.0:
            raise DomainError(f"body mass must be positive, got {self.mass}")
        J = np.asarray(self.J0, dtype=float)
        if self.dim == 2:
            if J.ndim != 0 or not float(J) > 0.0:
                raise DomainError("2D inertia must be a positive scalar")
        else:
            if J.shape != (3, 3) or np.linalg.norm(J - J.T) > 1e-12 * np.linalg.norm(J):
                raise DomainError("3D inertia must be a symmetric 3x3 matrix")
            if np.any(np.linalg.eigvalsh(J) <= 0.0):
                raise DomainError("3D inertia must be positive definite")


def mass_properties(rho_S, spec: DomainSpec) -> BodyProps:
    """Closed-form disk/sphere mass and inertia for constant solid density."""
    if not rho_S > 0.0:
        raise DomainError(f"solid density must be positive, got {rho_S}")
    a = spec.r_s
    if spec.dim == 2:
        m = rho_S * np.pi * a**2
        J0 = rho_S * np.pi * a**4 / 2.0
    else:
        m = rho_S * (4.0 / 3.0) * np.pi * a**3
        J0 = (2.0 / 5.0) * m * a**2 * np.eye(3)
    return BodyProps(mass=float(m), J0=J0, rho_S=float(rho_S), dim=spec.dim)


def surface_load(p_trace, mesh_or_patch):
    """Pressure force and torque on the solid patch.

    force  = sum_f w_f p_f n_f          (normals point into the solid)
    torque = sum_f w_f p_f (x_f x n_f)  (scalar in 2D, vector in 3D)
    """
    if isinstance(mesh_or_patch, Mesh):
        patch = mesh_or_patch.patches[SOLID]
    elif isinstance(mesh_or_patch, BoundaryPatch):
        patch = mesh_or_patch
    else:
        raise ShapeError("surface_load expects a Mesh or a BoundaryPatch")
    p = np.asarray(p_trace, dtype=float)
    if p.shape != (patch.n_faces,):
        raise ShapeError(
            f"pressure trace has shape {p.shape}, patch has {patch.n_faces} faces"
        )
    force = surface_integral(None, patch, p[:, None] * patch.normals)
    x, n = patch.centers, patch.normals
    if x.shape[1] == 2:
        arm = x[:, 0] * n[:, 1] - x[:, 1] * n[:, 0]
        torque = np.atleast_1d(surface_integral(None, patch, p * arm))
    else:
        torque = surface_integral(None, patch, p[:, None] * np.cross(x, n))
    return force, torque


def theta_rhs(theta: SolidVelocity, force, torque, props: BodyProps):
    """Body-frame momentum balance: m l' = m l x omega + force and
    J0 omega' = (J0 omega) x omega + torque (gyroscopic term drops in 2D)."""
    force = np.asarray(force, dtype=float)
    torque = np.atleast_1d(np.asarray(torque, dtype=float))
    # l x omega = -omega x l
    dl = -omega_cross(theta.omega, theta.l) + force / props.mass
    if theta.dim == 2:
        domega = torque / float(props.J0)
    else:
        Jw = np.asarray(props.J0) @ theta.omega
        domega = np.linalg.solve(np.asarray(props.J0), np.cross(Jw, theta.omega) + torque)
    return SolidVelocity(dl, domega)


def advance_solid(theta: SolidVelocity, load_sampler, props: BodyProps,
                  t, dt) -> SolidVelocity:
    """One RK4 step of the body-frame velocity ODE.

    load_sampler maps a time to the (force, torque) pair acting then.
    """
    def f(tau, th):
        force, torque = load_sampler(tau)
        d = theta_rhs(th, force, torque, props)
        return d.packed()

    y = theta.packed()
    dim = theta.dim
    k1 = f(t, theta)
    k2 = f(t + 0.5 * dt, SolidVelocity.from_packed(y + 0.5 * dt * k1, dim))
    k3 = f(t + 0.5 * dt, SolidVelocity.from_packed(y + 0.5 * dt * k2, dim))
    k4 = f(t + dt, SolidVelocity.from_packed(y + dt * k3, dim))
    return SolidVelocity.from_packed(y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), dim)
