import numpy as np
import pytest

import rigidflow as rf
from rigidflow.fluid import FluidField, FluidSolver
from rigidflow.solid import mass_properties

STANDARD_SPEC = rf.DomainSpec(dim=2, r_s=0.5, R_o=2.0, R0=0.3)


@pytest.fixture(scope="session")
def spec():
    return STANDARD_SPEC


@pytest.fixture(scope="session")
def eos_params():
    return rf.EosParams()


@pytest.fixture(scope="session")
def box():
    return rf.HyperbolicityBox()


@pytest.fixture(scope="session")
def props(spec):
    return mass_properties(1.0, spec)


@pytest.fixture()
def small_mesh(spec):
    return rf.build_mesh(spec, (16, 32))


def make_solver(spec, resolution, eos_params=None, box=None, **kw):
    mesh = rf.build_mesh(spec, resolution)
    return FluidSolver(mesh, eos_params or rf.EosParams(),
                       box or rf.HyperbolicityBox(), **kw)


def gaussian_pulse(mesh, amp=1e-3, center=1.25, width=0.15, p0=1.0, s0=0.0):
    r = np.linalg.norm(mesh.nodes, axis=-1)
    p = p0 + amp * np.exp(-(((r - center) / width) ** 2))
    return FluidField(p=p, u=np.zeros(mesh.shape + (mesh.dim,)),
                      s=np.full(mesh.shape, s0))


def march(solver, U, theta, conf, reg, t_end, cfl_frac=0.9, keep_prev=False):
    """March to t_end with the step size re-chosen from the CFL bound."""
    sampler = lambda t: theta
    t = 0.0
    prev = None
    prev_t = 0.0
    while t < t_end - 1e-14:
        dt = min(cfl_frac * solver.cfl_dt(U, theta, conf, reg), t_end - t)
        if keep_prev:
            prev, prev_t = U, t
        U = solver.fluid_step(U, sampler, conf, reg, t, dt)
        t += dt
    if keep_prev:
        return U, t, prev, prev_t
    return U, t
