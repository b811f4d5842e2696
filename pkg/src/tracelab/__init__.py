"""tracelab: numerical experiments on boundary normal traces, Minkowski
contents and transport non-uniqueness."""

from . import fields, geometry, minkowski, quadrature, testfunctions, traces, transport
from .errors import (
    BadRegion,
    ConfigError,
    LevelMismatch,
    OnNullSet,
    OutsideDomain,
    OutsideSlab,
    TimeOutOfRange,
    TolNotReached,
    TooFewSamples,
    TraceLabError,
)
from .geometry import (
    BoundaryPatch,
    Domain,
    bottom_face_patch,
    boundary_quadrature,
    circle_patch,
    distance,
    empty_patch,
    grad_distance,
    patch_measure,
    project_boundary,
    region_classify,
    segment_patch,
)
from .quadrature import LimitEstimate, RadiusSchedule, RegionSpec, integrate, limit_estimate

__all__ = [
    "fields",
    "geometry",
    "minkowski",
    "quadrature",
    "testfunctions",
    "traces",
    "transport",
    "Domain",
    "BoundaryPatch",
    "RadiusSchedule",
    "RegionSpec",
    "LimitEstimate",
    "integrate",
    "limit_estimate",
]
__version__ = "0.1.0"
