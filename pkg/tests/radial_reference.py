"""Independent 1D radial gas-dynamics reference for annulus tests.

Solves the radially symmetric (p, u_r, s) system between two rigid walls,

    d_t p + u d_r p + rho c^2 (d_r u + u / r) = 0
    d_t u + u d_r u + (1 / rho) d_r p      = 0
    d_t s + u d_r s                        = 0

on a fine 1D grid with mirror walls.  This is a separate discretization
path (radial reduction with a geometric source) used purely as an oracle
for the 2D solver on rotationally symmetric data.
"""

import numpy as np


def ideal_density(p, s, gamma=1.4, kappa=1.0, c_v=1.0):
    return (p * np.exp(-s / c_v) / kappa) ** (1.0 / gamma)


def solve_radial(r_s, r_o, n, t_end, p_init, s_init, gamma=1.4,
                 cfl=0.35, dissipation=True):
    """March the radial system to t_end; returns (r_centers, p, u, s).

    p_init, s_init: callables of the radius array.
    """
    dr = (r_o - r_s) / n
    r = r_s + (np.arange(n) + 0.5) * dr
    p = p_init(r).astype(float)
    u = np.zeros(n)
    s = s_init(r).astype(float)

    def pad(f, odd=False):
        out = np.empty(n + 4)
        out[2:-2] = f
        if odd:
            out[1], out[0] = -f[0], -f[1]
            out[-2], out[-1] = -f[-1], -f[-2]
        else:
            out[1], out[0] = f[0], f[1]
            out[-2], out[-1] = f[-1], f[-2]
        return out

    def rhs(p, u, s):
        rho = ideal_density(p, s, gamma)
        c = np.sqrt(gamma * p / rho)
        pp, up, sp = pad(p), pad(u, odd=True), pad(s)
        dp = (pp[3:-1] - pp[1:-3]) / (2 * dr)
        du = (up[3:-1] - up[1:-3]) / (2 * dr)
        ds = (sp[3:-1] - sp[1:-3]) / (2 * dr)
        Rp = -(u * dp + rho * c * c * (du + u / r))
        Ru = -(u * du + dp / rho)
        Rs = -u * ds
        if dissipation:
            lam = np.abs(u) + c
            for f, fp, R in ((p, pp, Rp), (u, up, Ru), (s, sp, Rs)):
                d2 = fp[:-2] - 2 * fp[1:-1] + fp[2:]
                d4 = d2[:-2] - 2 * d2[1:-1] + d2[2:]
                R -= lam / (8 * dr) * d4
        return Rp, Ru, Rs

    t = 0.0
    while t < t_end - 1e-14:
        rho = ideal_density(p, s, gamma)
        c = np.sqrt(gamma * p / rho)
        dt = min(cfl * dr / float((np.abs(u) + c).max()), t_end - t)
        k1 = rhs(p, u, s)
        p1, u1, s1 = p + dt * k1[0], u + dt * k1[1], s + dt * k1[2]
        k2 = rhs(p1, u1, s1)
        p2 = 0.75 * p + 0.25 * (p1 + dt * k2[0])
        u2 = 0.75 * u + 0.25 * (u1 + dt * k2[1])
        s2 = 0.75 * s + 0.25 * (s1 + dt * k2[2])
        k3 = rhs(p2, u2, s2)
        p = p / 3.0 + 2.0 / 3.0 * (p2 + dt * k3[0])
        u = u / 3.0 + 2.0 / 3.0 * (u2 + dt * k3[1])
        s = s / 3.0 + 2.0 / 3.0 * (s2 + dt * k3[2])
        t += dt
    return r, p, u, s
