"""Safe state-feedback controllers learned from data and prior model knowledge."""

from .closedloop import PriorKnowledge, box_disturbance, box_prior, closed_loop_set, consistent_disturbances, next_state_set
from .datagen import DataSet, DataView, LinearSystem, excite, simulate
from .lpcore import LpProblem
from .setops import (
    ConstrainedMatrixZonotope,
    ConstrainedZonotope,
    MatrixZonotope,
    Polytope,
    Zonotope,
    contains,
    intersect_cmz,
    minkowski_sum,
    point_membership,
)
from .synthesis import SynthesisResult, SynthesisSpec, max_disturbance, min_lambda, prior_free_variant, synthesize
from .validate import ValidationReport, check_contractive, check_ris, oracle_containment

__version__ = "0.1.0"

__all__ = [
    "ConstrainedMatrixZonotope",
    "ConstrainedZonotope",
    "DataSet",
    "DataView",
    "LinearSystem",
    "LpProblem",
    "MatrixZonotope",
    "Polytope",
    "PriorKnowledge",
    "SynthesisResult",
    "SynthesisSpec",
    "ValidationReport",
    "Zonotope",
    "box_disturbance",
    "box_prior",
    "check_contractive",
    "check_ris",
    "closed_loop_set",
    "consistent_disturbances",
    "contains",
    "excite",
    "intersect_cmz",
    "max_disturbance",
    "min_lambda",
    "minkowski_sum",
    "next_state_set",
    "oracle_containment",
    "point_membership",
    "prior_free_variant",
    "simulate",
    "synthesize",
]
