"""Numerical toolkit for stationary metrics: ergospheres, horizons, characteristic coordinates.

The package works with the inverse metric g^{jk}(x) of a stationary Lorentzian
metric in signature (+, -, ..., -), with g^{00} > 0 on the domain.  Core
capabilities:

* locate and classify the ergosphere (zero set of the spatial determinant),
* integrate null geodesics parameterized by coordinate time,
* find the event horizon as the limit cycle of backward null geodesics,
* build collar / characteristic coordinates on the ergoregion strip,
* reduce axisymmetric 3+1 metrics to the 2+1 machinery.

A FastAPI service wraps the core, and the ``horizon-lab`` CLI is a thin
client over the same handlers.
"""

__version__ = "0.1.0"

from .errors import (
    HorizonLabError,
    MetricConfigError,
    MetricDomainError,
    SeedError,
    NonStarShapedError,
    RootToleranceError,
    KernelRankError,
    TangencyError,
    NoNullCovectorError,
    StepFailureError,
    BracketError,
    CoverageError,
    ParameterError,
)
from .metric import (
    SpacetimeMetric,
    acoustic_vortex,
    gordon,
    gordon_radial,
    schwarzschild_equatorial,
    kerr_restricted,
    build_builtin,
    parse_metric_config,
)
from .ergosphere import (
    ErgosphereCurve,
    trace_ergosphere,
    classify,
    null_kernel,
    char_form,
)
from .geodesics import (
    GeodesicState,
    NullGeodesic,
    solve_xi0,
    hamiltonian,
    velocity,
    flow,
    batch_flow,
    spatial_null_states,
    flow_to_event,
    launch_from_ergosphere,
)
from .horizon import Horizon, find_limit_cycle, poincare_return, trapped_probe
from .charcoords import (
    CollarChart,
    CharField,
    HalfPlaneMap,
    build_collar,
    mu_pm,
    build_char_field,
    transport_drift,
    half_plane_map,
)
from .axisym import (
    AxisymMetric3D,
    restrict,
    embed_axisymmetric,
    kerr_cylindrical,
    kerr_r,
    kerr_ergosurfaces,
    verify_characteristic,
)
from .artifacts import write_csv, write_json, write_svg

# The HTTP layer (horizonlab.service) and the CLI (horizonlab.cli) are
# deliberately not imported here: the numerical core stays importable
# without pulling in the web stack.

__all__ = [
    "HorizonLabError",
    "MetricConfigError",
    "MetricDomainError",
    "SeedError",
    "NonStarShapedError",
    "RootToleranceError",
    "KernelRankError",
    "TangencyError",
    "NoNullCovectorError",
    "StepFailureError",
    "BracketError",
    "CoverageError",
    "ParameterError",
    "SpacetimeMetric",
    "acoustic_vortex",
    "gordon",
    "gordon_radial",
    "schwarzschild_equatorial",
    "kerr_restricted",
    "build_builtin",
    "parse_metric_config",
    "ErgosphereCurve",
    "trace_ergosphere",
    "classify",
    "null_kernel",
    "char_form",
    "GeodesicState",
    "NullGeodesic",
    "solve_xi0",
    "hamiltonian",
    "velocity",
    "flow",
    "batch_flow",
    "spatial_null_states",
    "flow_to_event",
    "launch_from_ergosphere",
    "Horizon",
    "find_limit_cycle",
    "poincare_return",
    "trapped_probe",
    "CollarChart",
    "CharField",
    "HalfPlaneMap",
    "build_collar",
    "mu_pm",
    "build_char_field",
    "transport_drift",
    "half_plane_map",
    "AxisymMetric3D",
    "restrict",
    "embed_axisymmetric",
    "kerr_cylindrical",
    "kerr_r",
    "kerr_ergosurfaces",
    "verify_characteristic",
    "write_csv",
    "write_json",
    "write_svg",
    "__version__",
]
