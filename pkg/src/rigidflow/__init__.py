"""rigidflow: a rigid body moving in a compressible inviscid fluid,
simulated on a fixed reference domain.

The moving-boundary problem is pulled back to the initial fluid domain by
the flow of a cutoff rigid velocity field; the fluid then satisfies a
quasilinear symmetric hyperbolic system whose coefficients carry the
flow-map gradient and Hessian, coupled to the body's momentum ODEs
through the boundary pressure.  A small parameter eps shifts the flux
matrices along an interior normal field to make the walls
non-characteristic; sweeping eps down to zero recovers the impermeable
wall.
"""

from .coupling import (
    PARTITIONED_WINDOW,
    SUBITERATED_STEP,
    CoupledRunner,
    CoupledState,
    CouplingConfig,
    ThetaPath,
    Trajectory,
    run,
)
from .diagnostics import (
    DiagnosticsRecord,
    compatibility_residual,
    conormal_energy,
    entropy_residual,
    vorticity_residual,
)
from .eos import EosParams, HyperbolicityBox, ThermoPair, density, sound_speed, symmetrizer_coefficients
from .fluid import FluidField, FluidSolver, Regularization
from .geometry import (
    OUTER,
    SOLID,
    BoundaryPatch,
    DomainSpec,
    Mesh,
    NormalExtension,
    build_mesh,
    cutoff,
    extended_normal,
    surface_integral,
)
from .kinematics import (
    Configuration,
    SolidVelocity,
    advance_configuration,
    configuration_residuals,
    metric,
    solid_boundary_velocity,
    transport_velocity,
)
from .scenario import Scenario, initial_fields, make_scenario, parse_scenario, serialize_scenario
from .solid import BodyProps, advance_solid, mass_properties, surface_load

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
