"""Numerical checks of concentration of measure on spheres and projective spaces."""
from .concentration import (
    ConcentrationReport,
    LipschitzFunction,
    catalog,
    empirical_lipschitz,
    empirical_tail,
    estimate_median,
)
from .curvature import TangentFrame, m_ricci, random_frames, ricci_floor_scan, sectional_curvature
from .estimators import ConcentrationFinder, DeltaNet
from .finder import (
    ConcentrationCertificate,
    ball_mass_floor,
    dimension_bound,
    disintegration_check,
    find_submanifold,
    select_by_disintegration,
    success_floor,
)
from .geometry import (
    ComplexProjective,
    GeodesicSubmanifoldSpec,
    ManifoldModel,
    RealProjective,
    Sphere,
    apply_isometry,
    embed,
    geodesic_distance,
    parse_model,
    sample_haar_isometry,
    sample_uniform,
)
from .nets import (
    Net,
    build_net,
    cardinality_bound_closed,
    cardinality_bound_integral,
    hull_covering_radius,
    lemma3_chain_check,
    verify_covering,
)

__version__ = "0.1.0"

__all__ = [
    "ComplexProjective",
    "ConcentrationCertificate",
    "ConcentrationFinder",
    "ConcentrationReport",
    "DeltaNet",
    "GeodesicSubmanifoldSpec",
    "LipschitzFunction",
    "ManifoldModel",
    "Net",
    "RealProjective",
    "Sphere",
    "TangentFrame",
    "apply_isometry",
    "ball_mass_floor",
    "build_net",
    "cardinality_bound_closed",
    "cardinality_bound_integral",
    "catalog",
    "dimension_bound",
    "disintegration_check",
    "embed",
    "empirical_lipschitz",
    "empirical_tail",
    "estimate_median",
    "find_submanifold",
    "geodesic_distance",
    "hull_covering_radius",
    "lemma3_chain_check",
    "m_ricci",
    "parse_model",
    "random_frames",
    "ricci_floor_scan",
    "sample_haar_isometry",
    "sample_uniform",
    "sectional_curvature",
    "select_by_disintegration",
    "success_floor",
    "verify_covering",
]
