"""Quasilinear symmetric-hyperbolic fluid system on the reference annulus.

State U = (p, u, s) evolves with transport velocity u - u_S (the pulled
back solid motion), symmetrizer A0 = diag(1/alpha, eta M, 1), and
zeroth-order terms carrying the flow-map Hessian.  Discretization:
2nd-order central differences on the polar chart, local Lax-Friedrichs
style 4th-difference dissipation with speed bound |u - u_S| + c + eps,
and SSP-RK3 in time.

The eps > 0 variant shifts every flux matrix by eps * nu^j * I and adds
the matched source F = eps (nu . grad) of a Taylor-in-time reference
extension of the initial data, which keeps the t = 0 time derivatives
identical to the unshifted system.  At the walls the shifted system leaks
energy at rate O(eps); the ghost construction reproduces that as a blend
of a mirror state and the reference extension with weight
eps / (eps + c), so the face-normal velocity mismatch scales like eps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import eos as eoslib
from .errors import (
    DomainError,
    RegionError,
    ShapeError,
    StepSizeError,
    UnsupportedOrderError,
)
from .geometry import OUTER, SOLID, Mesh, NormalExtension, extended_normal
from .kinematics import (
    Configuration,
    SolidVelocity,
    apply_mat,
    chart_gradient,
    matinv,
    metric,
    omega_cross,
    us_bar_field,
)
from .solid import BodyProps, surface_load, theta_rhs


@dataclass
class FluidField:
    """Node fields p (shape mesh.shape), u (mesh.shape + (dim,)), s."""

    p: np.ndarray
    u: np.ndarray
    s: np.ndarray

    @classmethod
    def uniform(cls, mesh: Mesh, p0, s0):
        return cls(
            p=np.full(mesh.shape, float(p0)),
            u=np.zeros(mesh.shape + (mesh.dim,)),
            s=np.full(mesh.shape, float(s0)),
        )

    def copy(self):
        return FluidField(self.p.copy(), self.u.copy(), self.s.copy())


@dataclass
class Moment:
    """k-th time derivative of (U, l, omega) at t = 0."""

    p: np.ndarray
    u: np.ndarray
    s: np.ndarray
    l: np.ndarray
    omega: np.ndarray


@dataclass
class Regularization:
    """eps, the interior normal field, and the reference-extension data."""

    eps: float
    nu: NormalExtension
    K: int
    moments: list
    moment_grads: list = field(default_factory=list)

    def __post_init__(self):
        if self.eps < 0.0:
            raise DomainError(f"eps must be >= 0, got {self.eps}")


@dataclass
class CoefficientSet:
    """Assembled pointwise matrices of the symmetrized system."""

    A0: np.ndarray   # (..., k, k) SPD
    A: np.ndarray    # (dim, ..., k, k) symmetric flux matrices (eps-shifted)
    B: np.ndarray    # (..., k, k) zeroth-order block


@dataclass
class StepContext:
    """Configuration-derived fields reused across the RK stages of a step."""

    conf: Configuration
    M: np.ndarray
    Minv: np.ndarray
    J1inv: np.ndarray
    chi: np.ndarray
    gchi: np.ndarray
    J2_active: bool


class FluidSolver:
    """Finite-difference operator collection bound to one mesh and one EOS."""

    def __init__(self, mesh: Mesh, params: eoslib.EosParams,
                 box: eoslib.HyperbolicityBox, cfl: float = 0.4,
                 limiter: str = "llf"):
        if mesh.dim != 2:
            raise DomainError("fluid stepping is implemented for 2D meshes")
        if limiter not in ("llf", "none"):
            raise DomainError(f"limiter must be 'llf' or 'none', got {limiter}")
        self.mesh = mesh
        self.params = params
        self.box = box
        self.cfl = float(cfl)
        self.limiter = limiter
        self.spec = mesh.spec
        # 4th-difference dissipation coefficient, scaled by the local
        # wave-speed bound |u - u_S| + c + eps
        self.k4 = 1.0 / 16.0

    # ----- stencils -------------------------------------------------

    def _ddr(self, fpad):
        return (fpad[3:-1] - fpad[1:-3]) / (2.0 * self.mesh.dr)

    def _ddt(self, f):
        return (np.roll(f, -1, axis=1) - np.roll(f, 1, axis=1)) / (2.0 * self.mesh.dtheta)

    def _grad(self, fpad, f):
        """Cartesian gradient (..., 2) from padded-radial and periodic data."""
        gr = self._ddr(fpad)
        gt = self._ddt(f)
        jt = self.mesh.jinv_t
        return np.stack(
            [jt[..., 0, 0] * gr + jt[..., 0, 1] * gt,
             jt[..., 1, 0] * gr + jt[..., 1, 1] * gt], axis=-1
        )

    def _fourth_diff(self, fpad, f):
        d2 = fpad[:-2] - 2.0 * fpad[1:-1] + fpad[2:]
        d4r = d2[:-2] - 2.0 * d2[1:-1] + d2[2:]
        e2 = np.roll(f, -1, axis=1) - 2.0 * f + np.roll(f, 1, axis=1)
        e4t = np.roll(e2, -1, axis=1) - 2.0 * e2 + np.roll(e2, 1, axis=1)
        return d4r, e4t

    # ----- boundary closure ------------------------------------------

    def wall_velocity(self, theta: SolidVelocity, tag: str):
        """Prescribed wall velocity at the faces of a patch."""
        patch = self.mesh.patches[tag]
        if tag == SOLID:
            return theta.l + omega_cross(theta.omega, patch.centers)
        return np.zeros_like(patch.centers)

    def _ghost_rings(self, U: FluidField, theta, reg, t):
        """Two mirror(+blend) ghost rings beyond each radial wall.

        Returns dict tag -> (p_g, u_g, s_g) with leading axis the ghost
        layer (layer 0 adjacent to the wall).
        """
        out = {}
        ref = self.reference_state(reg, t) if (reg is not None and reg.eps > 0.0) else None
        for tag, rings in ((SOLID, (0, 1)), (OUTER, (-1, -2))):
            n = self.mesh.patches[tag].normals
            u_bc = self.wall_velocity(theta, tag)
            p_g = np.empty((2,) + U.p.shape[1:])
            u_g = np.empty((2,) + U.u.shape[1:])
            s_g = np.empty((2,) + U.s.shape[1:])
            for layer, ring in enumerate(rings):
                pm, um, sm = U.p[ring], U.u[ring], U.s[ring]
                un = np.einsum("ja,ja->j", um - u_bc, n)
                u_ref = um - 2.0 * un[:, None] * n
                if ref is not None:
                    c_m = eoslib.sound_speed(pm, sm, self.params)
                    beta = (reg.eps / (reg.eps + c_m))[:, None]
                    p_g[layer] = pm + beta[:, 0] * (ref.p[ring] - pm)
                    u_g[layer] = u_ref + beta * (ref.u[ring] - u_ref)
                    s_g[layer] = sm + beta[:, 0] * (ref.s[ring] - sm)
                else:
                    p_g[layer] = pm
                    u_g[layer] = u_ref
                    s_g[layer] = sm
            out[tag] = (p_g, u_g, s_g)
        return out

    def apply_boundary(self, U: FluidField, theta: SolidVelocity,
                       reg: Optional[Regularization], t):
        """Radially padded state arrays closing all interior stencils."""
        ghosts = self._ghost_rings(U, theta, reg, t)
        n_r = U.p.shape[0]

        def pad(comp, idx):
            arr = np.empty((n_r + 4,) + comp.shape[1:])
            arr[2:-2] = comp
            gs = ghosts[SOLID][idx]
            go = ghosts[OUTER][idx]
            arr[1] = gs[0]
            arr[0] = gs[1]
            arr[-2] = go[0]
            arr[-1] = go[1]
            return arr

        return pad(U.p, 0), pad(U.u, 1), pad(U.s, 2)

    def boundary_face_states(self, U, theta, reg, t):
        """Reconstructed face states (p, u, s) and wall data per patch."""
        ghosts = self._ghost_rings(U, theta, reg, t)
        out = {}
        for tag, ring in ((SOLID, 0), (OUTER, -1)):
            p_g, u_g, s_g = ghosts[tag]
            out[tag] = {
                "p": 0.5 * (U.p[ring] + p_g[0]),
                "u": 0.5 * (U.u[ring] + u_g[0]),
                "s": 0.5 * (U.s[ring] + s_g[0]),
                "u_bc": self.wall_velocity(theta, tag),
                "normals": self.mesh.patches[tag].normals,
            }
        return out

    def boundary_mismatch(self, U, theta, reg, t):
        """max_f |(u_face - u_wall) . n| over both patches."""
        faces = self.boundary_face_states(U, theta, reg, t)
        worst = 0.0
        for tag in (SOLID, OUTER):
            f = faces[tag]
            err = np.einsum("ja,ja->j", f["u"] - f["u_bc"], f["normals"])
            worst = max(worst, float(np.abs(err).max()))
        return worst

    def pressure_trace(self, U: FluidField, tag: str):
        """2nd-order one-sided pressure extrapolation to a wall's faces."""
        if tag == SOLID:
            return 1.5 * U.p[0] - 0.5 * U.p[1]
        return 1.5 * U.p[-1] - 0.5 * U.p[-2]

    # ----- reference extension ----------------------------------------

    def reference_state(self, reg: Regularization, t) -> FluidField:
        """Taylor-in-time extension sum_k moments[k] t^k / k!."""
        fac = 1.0
        p = reg.moments[0].p.copy()
        u = reg.moments[0].u.copy()
        s = reg.moments[0].s.copy()
        for k in range(1, len(reg.moments)):
            fac *= t / k
            p += fac * reg.moments[k].p
            u += fac * reg.moments[k].u
            s += fac * reg.moments[k].s
        return FluidField(p, u, s)

    def reference_extension(self, reg: Regularization, t):
        """(U_tilde(t), F(t)) with F = eps (nu . grad) U_tilde."""
        ref = self.reference_state(reg, t)
        nu = reg.nu.nu
        fac = 1.0
        gp = reg.moment_grads[0]["p"].copy()
        gu = reg.moment_grads[0]["u"].copy()
        gs = reg.moment_grads[0]["s"].copy()
        for k in range(1, len(reg.moment_grads)):
            fac *= t / k
            gp += fac * reg.moment_grads[k]["p"]
            gu += fac * reg.moment_grads[k]["u"]
            gs += fac * reg.moment_grads[k]["s"]
        Fp = reg.eps * np.einsum("...a,...a->...", nu, gp)
        Fu = reg.eps * np.einsum("...a,...ia->...i", nu, gu)
        Fs = reg.eps * np.einsum("...a,...a->...", nu, gs)
        return ref, (Fp, Fu, Fs)

    # ----- coefficients ------------------------------------------------

    def assemble_coefficients(self, theta: SolidVelocity, conf: Configuration,
                              U: FluidField, eps: float = 0.0,
                              nu: Optional[np.ndarray] = None) -> CoefficientSet:
        """Pointwise A0, flux matrices (eps-shifted) and zeroth-order block."""
        d = self.mesh.dim
        k = d + 2
        alpha, eta = eoslib.symmetrizer_coefficients(U.p, U.s, self.params, self.box)
        M = metric(conf)
        us, gradV = us_bar_field(theta, conf, self.spec)
        w = U.u - us
        J1inv = matinv(conf.J1)

        shape = U.p.shape
        A0 = np.zeros(shape + (k, k))
        A0[..., 0, 0] = 1.0 / alpha
        A0[..., 1:1 + d, 1:1 + d] = eta[..., None, None] * M
        A0[..., k - 1, k - 1] = 1.0

        A = np.zeros((d,) + shape + (k, k))
        for j in range(d):
            A[j, ..., 0, 0] = w[..., j] / alpha
            A[j, ..., 0, 1 + j] = 1.0
            A[j, ..., 1 + j, 0] = 1.0
            A[j, ..., 1:1 + d, 1:1 + d] = (eta * w[..., j])[..., None, None] * M
            A[j, ..., k - 1, k - 1] = w[..., j]
            if eps != 0.0:
                if nu is None:
                    raise DomainError("eps-shifted coefficients need the normal field")
                A[j] += (eps * nu[..., j])[..., None, None] * np.eye(k)

        B = np.zeros(shape + (k, k))
        T = np.einsum("...ja,...abj->...b", J1inv, conf.J2)
        B[..., 0, 1:1 + d] = T
        K = np.einsum("...abj,...j->...ab", conf.J2, w)
        inner = np.einsum("...ia,...ab->...ib", J1inv, K) + np.einsum(
            "...ia,...ab,...bc->...ic", J1inv, gradV, conf.J1
        )
        B[..., 1:1 + d, 1:1 + d] = np.einsum(
            "...ia,...ab->...ib", eta[..., None, None] * M, inner
        )
        return CoefficientSet(A0=A0, A=A, B=B)

    # ----- semi-discrete residual ---------------------------------------

    def step_context(self, conf: Configuration) -> StepContext:
        """Precompute the configuration-derived fields of a step."""
        from .geometry import cutoff_with_derivs

        chi, gchi, _ = cutoff_with_derivs(self.spec, conf.phi, hessian=False)
        M = metric(conf)
        return StepContext(conf=conf, M=M, Minv=matinv(M),
                           J1inv=matinv(conf.J1), chi=chi, gchi=gchi,
                           J2_active=bool(np.any(conf.J2)))

    def _stage_kinematics(self, ctx: StepContext, theta: SolidVelocity):
        """(u_S-bar, grad V at phi) for one RK stage from cached cutoff data."""
        from .kinematics import rotate_omega, skew

        conf = ctx.conf
        l_glob = conf.Q @ theta.l
        om_glob = rotate_omega(conf.Q, theta.omega)
        D = skew(om_glob, self.mesh.dim)
        u_s = l_glob + omega_cross(om_glob, conf.phi - conf.h)
        us = apply_mat(ctx.J1inv, ctx.chi[..., None] * u_s)
        gradV = u_s[..., :, None] * ctx.gchi[..., None, :] \
            + ctx.chi[..., None, None] * D
        return us, gradV

    def spatial_residual(self, U: FluidField, theta: SolidVelocity,
                         conf: Configuration, reg: Optional[Regularization],
                         t, dissipation: Optional[bool] = None,
                         ctx: Optional[StepContext] = None):
        """Right side R of the semi-discrete system dU/dt = R.

        Expanded form of (A0)^{-1} (F - sum_j A^j d_j U - B U) plus the
        per-axis 4th-difference dissipation when the llf limiter is on.
        """
        if dissipation is None:
            dissipation = self.limiter == "llf"
        if ctx is None or ctx.conf is not conf:
            ctx = self.step_context(conf)
        alpha, eta = eoslib.symmetrizer_coefficients(U.p, U.s, self.params, self.box)
        M = ctx.M
        Minv = ctx.Minv
        J1inv = ctx.J1inv
        us, gradV = self._stage_kinematics(ctx, theta)
        w = U.u - us

        pp, up, sp = self.apply_boundary(U, theta, reg, t)
        gp = self._grad(pp, U.p)
        gs = self._grad(sp, U.s)
        gu0 = self._grad(up[..., 0], U.u[..., 0])
        gu1 = self._grad(up[..., 1], U.u[..., 1])

        w0, w1 = w[..., 0], w[..., 1]
        u0, u1 = U.u[..., 0], U.u[..., 1]
        div_u = gu0[..., 0] + gu1[..., 1]
        Rp = -(w0 * gp[..., 0] + w1 * gp[..., 1] + alpha * div_u)

        conv_u = np.stack(
            [w0 * gu0[..., 0] + w1 * gu0[..., 1],
             w0 * gu1[..., 0] + w1 * gu1[..., 1]], axis=-1
        )
        press = apply_mat(Minv, gp) / eta[..., None]
        Ru = -(conv_u + press)

        Rs = -(w0 * gs[..., 0] + w1 * gs[..., 1])

        # zeroth-order blocks only act through J2 and grad V
        if ctx.J2_active:
            T = np.einsum("...ja,...abj->...b", J1inv, conf.J2)
            Rp -= alpha * (T[..., 0] * u0 + T[..., 1] * u1)
            Kmat = np.einsum("...abj,...j->...ab", conf.J2, w)
            Ru -= apply_mat(J1inv, apply_mat(Kmat, U.u))
        if np.any(gradV):
            Ru -= apply_mat(J1inv, apply_mat(gradV, apply_mat(conf.J1, U.u)))

        eps = reg.eps if reg is not None else 0.0
        if eps > 0.0:
            nu = reg.nu.nu
            n0, n1 = nu[..., 0], nu[..., 1]
            _, (Fp, Fu, Fs) = self.reference_extension(reg, t)
            Rp += alpha * (Fp - eps * (n0 * gp[..., 0] + n1 * gp[..., 1]))
            shift_u = Fu - eps * np.stack(
                [n0 * gu0[..., 0] + n1 * gu0[..., 1],
                 n0 * gu1[..., 0] + n1 * gu1[..., 1]], axis=-1
            )
            Ru += apply_mat(Minv, shift_u) / eta[..., None]
            Rs += Fs - eps * (n0 * gs[..., 0] + n1 * gs[..., 1])

        if dissipation:
            lam = np.sqrt(w0 * w0 + w1 * w1) + np.sqrt(alpha / eta) + eps
            cr = self.k4 * lam / self.mesh.h_axis[0]
            ct = self.k4 * lam / self.mesh.h_axis[1]
            d4r, d4t = self._fourth_diff(pp, U.p)
            Rp -= cr * d4r + ct * d4t
            d4r, d4t = self._fourth_diff(sp, U.s)
            Rs -= cr * d4r + ct * d4t
            for i in range(2):
                d4r, d4t = self._fourth_diff(up[..., i], U.u[..., i])
                Ru[..., i] -= cr * d4r + ct * d4t
        return Rp, Ru, Rs

    # ----- time stepping -------------------------------------------------

    def cfl_dt(self, U: FluidField, theta: SolidVelocity, conf: Configuration,
               reg: Optional[Regularization], ctx: Optional[StepContext] = None):
        """Largest stable step: cfl * min over nodes of h / (|w| + c + eps)."""
        alpha, eta = eoslib.symmetrizer_coefficients(U.p, U.s, self.params, self.box)
        if ctx is not None and ctx.conf is conf:
            us, _ = self._stage_kinematics(ctx, theta)
        else:
            us, _ = us_bar_field(theta, conf, self.spec)
        eps = reg.eps if reg is not None else 0.0
        lam = np.linalg.norm(U.u - us, axis=-1) + np.sqrt(alpha / eta) + eps
        h = np.minimum(self.mesh.h_axis[0], self.mesh.h_axis[1])
        return self.cfl * float((h / lam).min())

    def _check_in_box(self, U: FluidField):
        inside = self.box.contains(U.p, U.s)
        if not np.all(inside):
            idx = np.unravel_index(int(np.argmin(inside)), inside.shape)
            raise RegionError(
                f"state left the hyperbolicity box at node {idx} "
                f"(p={U.p[idx]:.6g}, s={U.s[idx]:.6g})",
                point=(float(U.p[idx]), float(U.s[idx])),
                box=self.box,
                location=idx,
            )

    def fluid_step(self, U: FluidField, theta_sampler, conf: Configuration,
                   reg: Optional[Regularization], t, dt) -> FluidField:
        """One SSP-RK3 step; validates the CFL bound and the state box.

        Stage combinations are written incrementally so a uniform rest
        state is a bitwise fixed point.
        """
        theta0 = theta_sampler(t)
        ctx = self.step_context(conf)
        limit = self.cfl_dt(U, theta0, conf, reg, ctx=ctx)
        if dt > limit * (1.0 + 1e-12):
            raise StepSizeError(
                f"dt = {dt:.6g} exceeds the CFL bound {limit:.6g}"
            )
        R1 = self.spatial_residual(U, theta0, conf, reg, t, ctx=ctx)
        U1 = FluidField(U.p + dt * R1[0], U.u + dt * R1[1], U.s + dt * R1[2])

        R2 = self.spatial_residual(U1, theta_sampler(t + dt), conf, reg,
                                   t + dt, ctx=ctx)
        U2 = FluidField(
            U.p + 0.25 * ((U1.p - U.p) + dt * R2[0]),
            U.u + 0.25 * ((U1.u - U.u) + dt * R2[1]),
            U.s + 0.25 * ((U1.s - U.s) + dt * R2[2]),
        )

        R3 = self.spatial_residual(
            U2, theta_sampler(t + 0.5 * dt), conf, reg, t + 0.5 * dt, ctx=ctx
        )
        out = FluidField(
            U.p + (2.0 / 3.0) * ((U2.p - U.p) + dt * R3[0]),
            U.u + (2.0 / 3.0) * ((U2.u - U.u) + dt * R3[1]),
            U.s + (2.0 / 3.0) * ((U2.s - U.s) + dt * R3[2]),
        )
        self._check_in_box(out)
        return out

    # ----- compatibility recursion ----------------------------------------

    def compatibility_derivatives(self, U0: FluidField, theta0: SolidVelocity,
                                  props: BodyProps, K: int):
        """Time derivatives of (U, l, omega) at t = 0, orders 0..K (K <= 2).

        Order 1 evaluates the undissipated semi-discrete right sides on the
        initial data; order 2 differentiates the same composite map through
        linearized states at +/- delta.  The eps-shifted system shares these
        values because its source is built to cancel the shift at t = 0.
        """
        if K > 2:
            raise UnsupportedOrderError(f"compatibility order capped at 2, got {K}")
        if K < 0:
            raise UnsupportedOrderError(f"order must be >= 0, got {K}")
        conf0 = Configuration.identity(self.mesh)
        moments = [Moment(U0.p.copy(), U0.u.copy(), U0.s.copy(),
                          theta0.l.copy(), theta0.omega.copy())]
        if K == 0:
            return moments

        def rhs_all(U, th, conf):
            Rp, Ru, Rs = self.spatial_residual(U, th, conf, None, 0.0,
                                               dissipation=False)
            force, torque = surface_load(self.pressure_trace(U, SOLID), self.mesh)
            dth = theta_rhs(th, force, torque, props)
            return Moment(Rp, Ru, Rs, dth.l, dth.omega)

        m1 = rhs_all(U0, theta0, conf0)
        moments.append(m1)
        if K == 1:
            return moments

        from .kinematics import skew, velocity_and_grads

        delta = 1e-5
        d = self.mesh.dim
        V0, G0, H0 = velocity_and_grads(theta0, conf0.h, conf0.Q,
                                        self.mesh.nodes, self.spec)
        branches = []
        for sgn in (+1.0, -1.0):
            e = sgn * delta
            U_e = FluidField(U0.p + e * m1.p, U0.u + e * m1.u, U0.s + e * m1.s)
            th_e = SolidVelocity(theta0.l + e * m1.l, theta0.omega + e * m1.omega)
            conf_e = Configuration(
                h=conf0.h + e * (conf0.Q @ theta0.l),
                Q=conf0.Q + e * (conf0.Q @ skew(theta0.omega, d)),
                phi=conf0.phi + e * V0,
                J1=conf0.J1 + e * np.einsum("...ia,...aj->...ij", G0, conf0.J1),
                J2=conf0.J2 + e * H0,
            )
            branches.append(rhs_all(U_e, th_e, conf_e))
        plus, minus = branches
        m2 = Moment(
            (plus.p - minus.p) / (2.0 * delta),
            (plus.u - minus.u) / (2.0 * delta),
            (plus.s - minus.s) / (2.0 * delta),
            (plus.l - minus.l) / (2.0 * delta),
            (plus.omega - minus.omega) / (2.0 * delta),
        )
        moments.append(m2)
        return moments

    def make_regularization(self, eps: float, U0: FluidField,
                            theta0: SolidVelocity, props: BodyProps,
                            K: int = 1) -> Regularization:
        """Regularization bundle with precomputed moments and their gradients."""
        moments = self.compatibility_derivatives(U0, theta0, props, K)
        grads = []
        for m in moments:
            grads.append({
                "p": chart_gradient(self.mesh, m.p),
                "u": np.stack(
                    [chart_gradient(self.mesh, m.u[..., i]) for i in range(2)],
                    axis=-2,
                ),
                "s": chart_gradient(self.mesh, m.s),
            })
        return Regularization(eps=float(eps), nu=extended_normal(self.mesh),
                              K=K, moments=moments, moment_grads=grads)
