"""Spectral bounds for Sturm-Liouville operators on metric graphs.

The library assembles piecewise-linear finite element forms for
(1/w)(-(p f')' + q f) with Kirchhoff vertex matching, then drives two
complementary procedures: the positive-solution test for the bottom of the
spectrum and the exhaustion limit for the bottom of the essential
spectrum.  Graphs, coefficients, and exhaustions are immutable once built
and safe to share across worker threads.
"""

from .coeff import (
    CoefficientField,
    HypothesisReport,
    edge_integral,
    load_coefficients,
    sampled_min,
    validate_hypotheses,
)
from .eig import EigenResult, dense_reference, eigen_lower_bound, smallest_eigenpair, solve_pencil
from .errors import (
    CoefficientError,
    ConvergenceError,
    EvaluationError,
    ExpressionError,
    GraphFormatError,
    GraphslError,
    GraphStructureError,
    HypothesisError,
    IntegrabilityError,
    MeshError,
    SolverError,
)
from .expressions import evaluate as evaluate_expression
from .expressions import parse_expression, pretty
from .fem import (
    AssembledForms,
    DirichletTruncationSpec,
    GraphMesh,
    assemble,
    build_mesh,
    kirchhoff_residual,
    write_matrix_market,
)
from .graph import Edge, Exhaustion, MetricGraph, build_exhaustion, load_graph, original_edges
from .spectral import (
    APResult,
    CutoffFunction,
    HarnackBounds,
    PerssonTrace,
    PositiveSolutionCert,
    SobolevEstimate,
    SpectralReport,
    ap_check,
    cutoff_build,
    dirichlet_vertices,
    ground_state_transform_check,
    harnack_probe,
    inf_spectrum,
    persson_limit,
    positive_solution,
    sobolev_constant,
)

__version__ = "0.1.0"

__all__ = [
    "APResult",
    "AssembledForms",
    "CoefficientError",
    "CoefficientField",
    "ConvergenceError",
    "CutoffFunction",
    "DirichletTruncationSpec",
    "Edge",
    "EigenResult",
    "EvaluationError",
    "Exhaustion",
    "ExpressionError",
    "GraphFormatError",
    "GraphMesh",
    "GraphStructureError",
    "GraphslError",
    "HarnackBounds",
    "HypothesisError",
    "HypothesisReport",
    "IntegrabilityError",
    "MeshError",
    "MetricGraph",
    "PerssonTrace",
    "PositiveSolutionCert",
    "SobolevEstimate",
    "SolverError",
    "SpectralReport",
    "ap_check",
    "assemble",
    "build_exhaustion",
    "build_mesh",
    "cutoff_build",
    "dense_reference",
    "dirichlet_vertices",
    "edge_integral",
    "eigen_lower_bound",
    "evaluate_expression",
    "ground_state_transform_check",
    "harnack_probe",
    "inf_spectrum",
    "kirchhoff_residual",
    "load_coefficients",
    "load_graph",
    "original_edges",
    "parse_expression",
    "persson_limit",
    "positive_solution",
    "pretty",
    "sampled_min",
    "smallest_eigenpair",
    "sobolev_constant",
    "solve_pencil",
    "validate_hypotheses",
    "write_matrix_market",
]
