"""Runtime diagnostics: weighted energies and transport residuals.

The order-m energy sums the symmetrizer-weighted quadratic form of the
state over a family of derivative fields tangent to the boundary (time,
the angular direction, and the wall-distance-weighted radial direction),
plus the solid kinetic terms.  Only m = 0, 1 are computed.

The vorticity and entropy residuals measure how well the evolved fields
satisfy the transport equations implied by the momentum and entropy
rows; they vanish on the rest state and decay under refinement on smooth
solver-evolved states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import eos as eoslib
from .errors import DomainError, InsufficientHistoryError
from .fluid import FluidField, FluidSolver, Regularization
from .geometry import OUTER, SOLID, Mesh
from .kinematics import (
    Configuration,
    SolidVelocity,
    matinv,
    metric,
    omega_cross,
    us_bar_field,
)
from .solid import BodyProps


@dataclass
class DiagnosticsRecord:
    t: float
    E0: float
    E1: float
    vort_res: float
    ent_res: float
    bc_mismatch: float
    compat_res: tuple = ()


def _wall_weight(mesh: Mesh):
    """phi(z) = z / (1 + z) of the distance to the nearer wall."""
    z_s, z_o = mesh.boundary_distances()
    z = np.minimum(z_s, z_o)
    return z / (1.0 + z)


def _radial_deriv(mesh: Mesh, f):
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * mesh.dr)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * mesh.dr)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * mesh.dr)
    return out


def _angular_deriv(mesh: Mesh, f):
    r = np.linalg.norm(mesh.nodes, axis=-1)
    df = (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * mesh.dtheta)
    return df / r


def _quad_form(mesh, alpha, eta, M, p, u, s):
    dens = p * p / alpha + eta * np.einsum("...ab,...a,...b->...", M, u, u) + s * s
    return float(np.sum(mesh.volumes * dens))


def _solid_quad(props: BodyProps, l, omega):
    kin = props.mass * float(np.dot(l, l))
    if props.dim == 2:
        kin += float(props.J0) * float(omega[0] ** 2)
    else:
        kin += float(omega @ (np.asarray(props.J0) @ omega))
    return kin


def conormal_energy(solver: FluidSolver, U: FluidField, theta: SolidVelocity,
                    props: BodyProps, conf: Configuration, order: int,
                    prev: FluidField = None, dt: float = None,
                    theta_dot: SolidVelocity = None,
                    reference: FluidField = None):
    """Order-0 or order-1 weighted energy of the coupled state.

    order = 1 needs a previous fluid state (for the time-difference term)
    and the committed solid acceleration theta_dot.  With ``reference``
    given, the quadratic form is taken on the deviation U - reference
    (weights still come from the full state), which isolates e.g. the
    acoustic perturbation energy around an ambient state.
    """
    if order not in (0, 1):
        raise DomainError(f"energy order must be 0 or 1, got {order}")
    mesh = solver.mesh
    alpha, eta = eoslib.symmetrizer_coefficients(U.p, U.s, solver.params, solver.box)
    M = metric(conf)

    if reference is None:
        dp, du, ds = U.p, U.u, U.s
    else:
        dp, du, ds = U.p - reference.p, U.u - reference.u, U.s - reference.s
    total = _quad_form(mesh, alpha, eta, M, dp, du, ds)
    total += _solid_quad(props, theta.l, theta.omega)
    if order == 0:
        return total

    if prev is None or dt is None:
        raise InsufficientHistoryError(
            "order-1 energy needs a stored previous state and its dt"
        )
    if theta_dot is None:
        raise InsufficientHistoryError(
            "order-1 energy needs the committed solid acceleration"
        )

    wz = _wall_weight(mesh)
    if reference is None:
        pp, pu, ps = prev.p, prev.u, prev.s
    else:
        pp, pu, ps = prev.p - reference.p, prev.u - reference.u, prev.s - reference.s

    def z_fields(f, f_prev):
        dt_f = (f - f_prev) / dt
        ang = _angular_deriv(mesh, f)
        rad = wz * _radial_deriv(mesh, f)
        return dt_f, ang, rad

    parts_p = z_fields(dp, pp)
    parts_s = z_fields(ds, ps)
    parts_u = [z_fields(du[..., a], pu[..., a]) for a in range(mesh.dim)]
    for i in range(3):
        zu = np.stack([parts_u[a][i] for a in range(mesh.dim)], axis=-1)
        total += _quad_form(mesh, alpha, eta, M, parts_p[i], zu, parts_s[i])
    total += _solid_quad(props, theta_dot.l, theta_dot.omega)
    return total


def _cart_grad(mesh: Mesh, f):
    gc = np.stack([_radial_deriv(mesh, f), (np.roll(f, -1, axis=1)
                   - np.roll(f, 1, axis=1)) / (2.0 * mesh.dtheta)], axis=-1)
    return np.einsum("...ij,...j->...i", mesh.jinv_t, gc)


def _curl2d(mesh: Mesh, v):
    g0 = _cart_grad(mesh, v[..., 0])
    g1 = _cart_grad(mesh, v[..., 1])
    return g1[..., 0] - g0[..., 1]


def _upwind_advect(mesh: Mesh, b, f):
    """First-order upwind b . grad f on the chart axes."""
    # contravariant chart components of b
    b_chart = np.einsum("...ji,...j->...i", mesh.jinv_t, b)
    fwd_r = np.empty_like(f)
    bwd_r = np.empty_like(f)
    fwd_r[:-1] = (f[1:] - f[:-1]) / mesh.dr
    fwd_r[-1] = fwd_r[-2]
    bwd_r[1:] = (f[1:] - f[:-1]) / mesh.dr
    bwd_r[0] = bwd_r[1]
    dr = np.where(b_chart[..., 0] > 0.0, bwd_r, fwd_r)
    fwd_t = (np.roll(f, -1, axis=1) - f) / mesh.dtheta
    bwd_t = (f - np.roll(f, 1, axis=1)) / mesh.dtheta
    dt_ = np.where(b_chart[..., 1] > 0.0, bwd_t, fwd_t)
    return b_chart[..., 0] * dr + b_chart[..., 1] * dt_


def _interior_l2(mesh: Mesh, res, margin):
    sl = slice(margin, -margin) if margin > 0 else slice(None)
    vols = mesh.volumes[sl]
    return float(np.sqrt(np.sum(vols * res[sl] ** 2)))


def vorticity_residual(solver: FluidSolver, prev, now,
                       reg: Regularization = None, margin: int = 2):
    """Residual norm of the transport equation for curl(M u).

    prev/now are coupled states (attributes t, U, theta, conf).  The curl
    of M u is advected by u - u_S + eps (eta M)^{-1} nu; the right side
    collects the curl of the momentum right side plus the commutator of
    curl with the advection, assembled term by term with central stencils.
    The time derivative is a two-level difference evaluated at the
    midpoint, and a boundary margin is excluded where curl stencils lose
    accuracy.
    """
    if prev is None or now is None:
        raise InsufficientHistoryError("vorticity residual needs two stored levels")
    mesh = solver.mesh
    if mesh.dim != 2:
        raise DomainError("vorticity residual is implemented in 2D")
    dt = now.t - prev.t
    if dt <= 0.0:
        raise InsufficientHistoryError("stored levels must be increasing in time")
    spec = solver.spec
    eps = reg.eps if reg is not None else 0.0

    def fields(state):
        M = metric(state.conf)
        v = np.einsum("...ab,...b->...a", M, state.U.u)
        us, gradV = us_bar_field(state.theta, state.conf, spec)
        return M, v, us, gradV

    M0, v0, us0, gV0 = fields(prev)
    M1, v1, us1, gV1 = fields(now)
    w0 = _curl2d(mesh, v0)
    w1 = _curl2d(mesh, v1)

    Um = FluidField(0.5 * (prev.U.p + now.U.p), 0.5 * (prev.U.u + now.U.u),
                    0.5 * (prev.U.s + now.U.s))
    Mm = 0.5 * (M0 + M1)
    vm = 0.5 * (v0 + v1)
    wm = 0.5 * (w0 + w1)
    usm = 0.5 * (us0 + us1)
    gVm = 0.5 * (gV0 + gV1)
    confm = Configuration(
        h=0.5 * (prev.conf.h + now.conf.h),
        Q=0.5 * (prev.conf.Q + now.conf.Q),
        phi=0.5 * (prev.conf.phi + now.conf.phi),
        J1=0.5 * (prev.conf.J1 + now.conf.J1),
        J2=0.5 * (prev.conf.J2 + now.conf.J2),
    )
    alpha, eta = eoslib.symmetrizer_coefficients(Um.p, Um.s, solver.params, solver.box)
    Minv = matinv(Mm)
    wvec = Um.u - usm
    b = wvec.copy()
    if eps > 0.0:
        b = b + eps * np.einsum("...ab,...b->...a", Minv, reg.nu.nu) / eta[..., None]

    lhs = (w1 - w0) / dt + _upwind_advect(mesh, b, wm)

    gp = _cart_grad(mesh, Um.p)
    G = -gp / eta[..., None]
    J1inv = matinv(confm.J1)
    Kmat = np.einsum("...abj,...j->...ab", confm.J2, wvec)
    lower = np.einsum("...ia,...ab,...b->...i", J1inv, Kmat, Um.u)
    lower += np.einsum("...ia,...ab,...bc,...c->...i", J1inv, gVm, confm.J1, Um.u)
    G -= np.einsum("...ab,...b->...a", Mm, lower)
    if eps > 0.0:
        t_mid = 0.5 * (prev.t + now.t)
        _, (_, Fu, _) = solver.reference_extension(reg, t_mid)
        G += Fu / eta[..., None]
    dtM = (M1 - M0) / dt
    G += np.einsum("...ab,...b->...a", dtM, Um.u)
    gradM = np.stack(
        [np.stack([_cart_grad(mesh, Mm[..., i, j]) for j in range(2)], axis=-2)
         for i in range(2)], axis=-3,
    )  # (..., i, j, a) = d_a M_ij
    bgradM = np.einsum("...ija,...a->...ij", gradM, b)
    G += np.einsum("...ij,...j->...i", bgradM, Um.u)

    rhs = _curl2d(mesh, G)
    gb = np.stack([_cart_grad(mesh, b[..., i]) for i in range(2)], axis=-2)
    gv = np.stack([_cart_grad(mesh, vm[..., i]) for i in range(2)], axis=-2)
    # commutator of curl with the advection: (d_x b . grad) v_y - (d_y b . grad) v_x
    comm = np.einsum("...a,...a->...", gb[..., :, 0], gv[..., 1, :]) - np.einsum(
        "...a,...a->...", gb[..., :, 1], gv[..., 0, :]
    )
    rhs -= comm
    return _interior_l2(mesh, lhs - rhs, margin)


def entropy_residual(solver: FluidSolver, prev, now, reg: Regularization = None):
    """Residual norm of d_t s + ((u - u_S + eps nu) . grad) s = F_s.

    Uses the solver's own padded central stencils for the gradient and a
    midpoint two-level time difference, so the estimate is 2nd order in
    both mesh size and step size on smooth data.
    """
    if prev is None or now is None:
        raise InsufficientHistoryError("entropy residual needs two stored levels")
    mesh = solver.mesh
    dt = now.t - prev.t
    if dt <= 0.0:
        raise InsufficientHistoryError("stored levels must be increasing in time")
    t_mid = 0.5 * (prev.t + now.t)
    Um = FluidField(0.5 * (prev.U.p + now.U.p), 0.5 * (prev.U.u + now.U.u),
                    0.5 * (prev.U.s + now.U.s))
    theta_m = SolidVelocity(0.5 * (prev.theta.l + now.theta.l),
                            0.5 * (prev.theta.omega + now.theta.omega))
    confm = Configuration(
        h=0.5 * (prev.conf.h + now.conf.h),
        Q=0.5 * (prev.conf.Q + now.conf.Q),
        phi=0.5 * (prev.conf.phi + now.conf.phi),
        J1=0.5 * (prev.conf.J1 + now.conf.J1),
        J2=0.5 * (prev.conf.J2 + now.conf.J2),
    )
    _, _, sp = solver.apply_boundary(Um, theta_m, reg, t_mid)
    gs = solver._grad(sp, Um.s)
    us, _ = us_bar_field(theta_m, confm, solver.spec)
    adv = Um.u - us
    eps = reg.eps if reg is not None else 0.0
    res = (now.U.s - prev.U.s) / dt + np.einsum("...a,...a->...", adv, gs)
    if eps > 0.0:
        res += eps * np.einsum("...a,...a->...", reg.nu.nu, gs)
        _, (_, _, Fs) = solver.reference_extension(reg, t_mid)
        res -= Fs
    return _interior_l2(mesh, res, 0)


def compatibility_residual(moments, mesh: Mesh):
    """Max-norm boundary defect per derivative order.

    Order k compares the normal component of the k-th velocity derivative
    against the wall data implied by the k-th solid derivatives: zero on
    the outer wall, (l_k + omega_k x x) . n on the solid wall.
    """
    out = []
    for m in moments:
        worst = 0.0
        for tag, face_u in ((SOLID, 1.5 * m.u[0] - 0.5 * m.u[1]),
                            (OUTER, 1.5 * m.u[-1] - 0.5 * m.u[-2])):
            patch = mesh.patches[tag]
            un = np.einsum("ja,ja->j", face_u, patch.normals)
            if tag == SOLID:
                wall = m.l + omega_cross(m.omega, patch.centers)
                un = un - np.einsum("ja,ja->j", wall, patch.normals)
            worst = max(worst, float(np.abs(un).max()))
        out.append(worst)
    return np.asarray(out)


def fit_growth_constant(times, energies):
    """Smallest C with E(t) <= E(0) exp(C t) over the samples."""
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if times.size < 2 or energies[0] <= 0.0:
        return 0.0
    mask = times > 0.0
    if not np.any(mask):
        return 0.0
    rates = np.log(energies[mask] / energies[0]) / times[mask]
    return float(max(0.0, rates.max()))
