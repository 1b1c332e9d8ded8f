"""Scenario files: a sectioned key-value format, presets, and builders.

A scenario file looks like

    [geometry]
    dim = 2
    r_s = 0.5
    R_o = 2.0

    [init]
    preset = acoustic-pulse
    amplitude = 1e-3

Every key has a documented default (see SCHEMA); unknown sections or keys
and duplicate keys are rejected with the offending line number.  Vector
values are comma- or space-separated floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields as dc_fields

import numpy as np

from .coupling import PARTITIONED_WINDOW, SUBITERATED_STEP, CouplingConfig
from .eos import EosParams, HyperbolicityBox
from .errors import (
    RigidflowError,
    ScenarioParseError,
    ScenarioValidationError,
)
from .fluid import FluidField, FluidSolver
from .geometry import DomainSpec, build_mesh
from .kinematics import SolidVelocity
from .solid import mass_properties

PRESETS = ("rest", "acoustic-pulse", "push", "spin")


@dataclass
class GeometryConfig:
    dim: int = 2
    r_s: float = 0.5
    R_o: float = 2.0
    R0: float = 0.3
    offset: tuple = (0.0, 0.0)


@dataclass
class MeshConfig:
    N_r: int = 32
    N_theta: int = 64
    N_phi: int = 16


@dataclass
class EosConfig:
    gamma: float = 1.4
    kappa: float = 1.0
    c_v: float = 1.0
    p_min: float = 0.25
    p_max: float = 4.0
    s_min: float = -1.0
    s_max: float = 1.0


@dataclass
class SolidConfig:
    rho_S: float = 1.0
    l0: tuple = (0.0, 0.0)
    omega0: tuple = (0.0,)


@dataclass
class FluidConfig:
    cfl: float = 0.4
    eps: float = 0.0
    compat_order: int = 1
    limiter: str = "llf"


@dataclass
class CouplingSection:
    mode: str = SUBITERATED_STEP
    window: float = 0.05
    picard_tol: float = 1e-10
    picard_max: int = 50


@dataclass
class RunConfig:
    t_end: float = 1.0
    dt: float = None
    output_every: int = 1
    snapshot_every: int = 0


@dataclass
class InitConfig:
    preset: str = "rest"
    p0: float = 1.0
    s0: float = 0.0
    amplitude: float = 1e-3
    width: float = 0.15
    center: float = None
    entropy_amp: float = 0.0
    entropy_width: float = 0.25


@dataclass
class Scenario:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    eos: EosConfig = field(default_factory=EosConfig)
    solid: SolidConfig = field(default_factory=SolidConfig)
    fluid: FluidConfig = field(default_factory=FluidConfig)
    coupling_sec: CouplingSection = field(default_factory=CouplingSection)
    run: RunConfig = field(default_factory=RunConfig)
    init: InitConfig = field(default_factory=InitConfig)

    @property
    def coupling(self) -> CouplingConfig:
        c = self.coupling_sec
        return CouplingConfig(mode=c.mode, window=c.window,
                              picard_tol=c.picard_tol, picard_max=c.picard_max)

    def domain_spec(self) -> DomainSpec:
        g = self.geometry
        off = tuple(g.offset)[: g.dim]
        if len(off) < g.dim:
            off = off + (0.0,) * (g.dim - len(off))
        return DomainSpec(dim=g.dim, r_s=g.r_s, R_o=g.R_o, R0=g.R0, offset=off)

    def resolution(self):
        m = self.mesh
        return (m.N_r, m.N_theta) if self.geometry.dim == 2 else \
            (m.N_r, m.N_theta, m.N_phi)


_SECTIONS = {
    "geometry": GeometryConfig,
    "mesh": MeshConfig,
    "eos": EosConfig,
    "solid": SolidConfig,
    "fluid": FluidConfig,
    "coupling": CouplingSection,
    "run": RunConfig,
    "init": InitConfig,
}
_SECTION_ATTR = {
    "geometry": "geometry", "mesh": "mesh", "eos": "eos", "solid": "solid",
    "fluid": "fluid", "coupling": "coupling_sec", "run": "run", "init": "init",
}
_MODE_ALIASES = {
    "subiterated-step": SUBITERATED_STEP,
    "subiterated_step": SUBITERATED_STEP,
    "partitioned-window": PARTITIONED_WINDOW,
    "partitioned_window": PARTITIONED_WINDOW,
}


def _parse_value(raw, proto, key, line):
    if isinstance(proto, bool):
        raise ScenarioParseError(f"boolean keys are not used ({key})", line)
    if isinstance(proto, int):
        try:
            return int(raw)
        except ValueError:
            raise ScenarioParseError(f"{key} expects an integer, got {raw!r}", line)
    if isinstance(proto, float) or proto is None:
        try:
            return float(raw)
        except ValueError:
            raise ScenarioParseError(f"{key} expects a number, got {raw!r}", line)
    if isinstance(proto, tuple):
        parts = raw.replace(",", " ").split()
        try:
            return tuple(float(x) for x in parts)
        except ValueError:
            raise ScenarioParseError(f"{key} expects numbers, got {raw!r}", line)
    if isinstance(proto, str):
        return raw.strip()
    raise ScenarioParseError(f"unsupported key type for {key}", line)


def parse_scenario(path) -> Scenario:
    """Parse and validate a scenario file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    sc = Scenario()
    section = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise ScenarioParseError(f"unknown section [{name}]", lineno)
            section = name
            continue
        if "=" not in line:
            raise ScenarioParseError(f"expected 'key = value', got {raw!r}", lineno)
        if section is None:
            raise ScenarioParseError("key outside of any [section]", lineno)
        key, _, raw_val = line.partition("=")
        key = key.strip()
        raw_val = raw_val.strip()
        cfg = getattr(sc, _SECTION_ATTR[section])
        valid = {f.name for f in dc_fields(cfg)}
        if key not in valid:
            raise ScenarioParseError(f"unknown key {key!r} in [{section}]", lineno)
        if (section, key) in seen:
            raise ScenarioParseError(f"duplicate key {key!r} in [{section}]", lineno)
        seen.add((section, key))
        proto = getattr(cfg, key)
        setattr(cfg, key, _parse_value(raw_val, proto, key, lineno))
    _normalize(sc)
    validate_scenario(sc)
    return sc


def _normalize(sc: Scenario):
    mode = sc.coupling_sec.mode.strip().lower()
    if mode in _MODE_ALIASES:
        sc.coupling_sec.mode = _MODE_ALIASES[mode]
    if sc.init.center is None:
        sc.init.center = 0.5 * (sc.geometry.r_s + sc.geometry.R_o)
    dim = sc.geometry.dim
    sc.solid.l0 = tuple(sc.solid.l0)[:dim] + (0.0,) * max(0, dim - len(sc.solid.l0))
    n_om = 1 if dim == 2 else 3
    om = tuple(sc.solid.omega0)
    sc.solid.omega0 = om[:n_om] + (0.0,) * max(0, n_om - len(om))


def validate_scenario(sc: Scenario):
    """Re-check every constructed invariant; raises ScenarioValidationError."""
    try:
        sc.domain_spec()
        EosParams(gamma=sc.eos.gamma, kappa=sc.eos.kappa, c_v=sc.eos.c_v)
        HyperbolicityBox(p_min=sc.eos.p_min, p_max=sc.eos.p_max,
                         s_min=sc.eos.s_min, s_max=sc.eos.s_max)
        sc.coupling
        if sc.init.preset not in PRESETS:
            raise ScenarioValidationError(
                f"unknown preset {sc.init.preset!r}; known: {PRESETS}"
            )
        if sc.fluid.eps < 0.0:
            raise ScenarioValidationError("fluid.eps must be >= 0")
        if sc.fluid.compat_order not in (0, 1, 2):
            raise ScenarioValidationError("fluid.compat_order must be 0, 1 or 2")
        if sc.fluid.limiter not in ("llf", "none"):
            raise ScenarioValidationError("fluid.limiter must be 'llf' or 'none'")
        if sc.run.t_end < 0.0:
            raise ScenarioValidationError("run.t_end must be >= 0")
        if sc.run.output_every < 1:
            raise ScenarioValidationError("run.output_every must be >= 1")
        if min(sc.mesh.N_r, sc.mesh.N_theta) < 8:
            raise ScenarioValidationError("mesh needs >= 8 cells per direction")
        box = HyperbolicityBox(p_min=sc.eos.p_min, p_max=sc.eos.p_max,
                               s_min=sc.eos.s_min, s_max=sc.eos.s_max)
        if not (box.contains(sc.init.p0, sc.init.s0)):
            raise ScenarioValidationError(
                "ambient (p0, s0) lies outside the hyperbolicity box"
            )
    except ScenarioValidationError:
        raise
    except RigidflowError as exc:
        raise ScenarioValidationError(str(exc)) from exc


def serialize_scenario(sc: Scenario) -> str:
    """Text form that parse_scenario reads back to an equal scenario."""
    chunks = []
    for section, attr in _SECTION_ATTR.items():
        cfg = getattr(sc, attr)
        chunks.append(f"[{section}]")
        for f in dc_fields(cfg):
            v = getattr(cfg, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = " ".join(f"{x:.17g}" for x in v)
            elif isinstance(v, float):
                v = f"{v:.17g}"
            chunks.append(f"{f.name} = {v}")
        chunks.append("")
    return "\n".join(chunks)


# ----- initial fields ------------------------------------------------------


def initial_fields(sc: Scenario, mesh):
    """FluidField and SolidVelocity for the scenario's preset."""
    init = sc.init
    r = np.linalg.norm(mesh.nodes, axis=-1)
    p = np.full(mesh.shape, init.p0)
    s = np.full(mesh.shape, init.s0)
    u = np.zeros(mesh.shape + (mesh.dim,))
    if init.preset == "acoustic-pulse":
        p = p + init.amplitude * np.exp(-(((r - init.center) / init.width) ** 2))
    elif init.preset == "push":
        r_mid = 0.5 * (sc.geometry.r_s + sc.geometry.R_o)
        taper = 1.0 - _smooth01((r - r_mid) / (sc.geometry.R_o - r_mid))
        p = p + init.amplitude * mesh.nodes[..., 0] * taper
    # rest and spin leave the fluid uniform; spin pairs with solid.omega0
    if init.entropy_amp != 0.0:
        s = s + init.entropy_amp * np.exp(
            -(((r - init.center) / init.entropy_width) ** 2)
        )
    theta0 = SolidVelocity(np.asarray(sc.solid.l0), np.asarray(sc.solid.omega0))
    return FluidField(p=p, u=u, s=s), theta0


def _smooth01(t):
    from .geometry import smoothstep
    return smoothstep(t)


# ----- builders -------------------------------------------------------------


@dataclass
class Built:
    mesh: object
    solver: FluidSolver
    props: object
    U0: FluidField
    theta0: SolidVelocity
    reg: object


def build(sc: Scenario) -> Built:
    """Construct mesh, solver, body properties, initial data and the
    regularization bundle for a validated scenario."""
    validate_scenario(sc)
    spec = sc.domain_spec()
    mesh = build_mesh(spec, sc.resolution())
    params = EosParams(gamma=sc.eos.gamma, kappa=sc.eos.kappa, c_v=sc.eos.c_v)
    box = HyperbolicityBox(p_min=sc.eos.p_min, p_max=sc.eos.p_max,
                           s_min=sc.eos.s_min, s_max=sc.eos.s_max)
    solver = FluidSolver(mesh, params, box, cfl=sc.fluid.cfl,
                         limiter=sc.fluid.limiter)
    props = mass_properties(sc.solid.rho_S, spec)
    U0, theta0 = initial_fields(sc, mesh)
    reg = solver.make_regularization(sc.fluid.eps, U0, theta0, props,
                                     K=max(1, sc.fluid.compat_order))
    return Built(mesh=mesh, solver=solver, props=props, U0=U0, theta0=theta0,
                 reg=reg)


def make_scenario(preset="rest", **overrides) -> Scenario:
    """Scenario with a preset and keyword overrides like ``t_end=0.5`` or
    ``("mesh", "N_r")``-style dotted keys ``mesh_N_r=64``."""
    sc = Scenario()
    sc.init.preset = preset
    for dotted, value in overrides.items():
        section, _, key = dotted.partition("_")
        attr = _SECTION_ATTR.get(section)
        if attr is not None and key and hasattr(getattr(sc, attr), key):
            setattr(getattr(sc, attr), key, value)
        elif hasattr(sc.run, dotted):
            setattr(sc.run, dotted, value)
        else:
            raise ScenarioValidationError(f"unknown scenario override {dotted!r}")
    _normalize(sc)
    validate_scenario(sc)
    return sc
