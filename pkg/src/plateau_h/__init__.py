"""Constant scalar curvature graphs over the hyperbolic half-space.

A numerical library and CLI that solves the eps-regularized Dirichlet problem
for graphs of constant H_2^{1/2} curvature over mean-convex domains, monitors
the a priori curvature estimate along the way, and certifies the symmetric
function inequalities and dimension constants the estimate rests on.
"""

from .symfunc import (
    ConeLabel,
    CurvatureSpectrum,
    elementary_symmetric,
    in_garding_cone,
    normalized_hk,
    partial_sk,
    second_partial_sk,
)
from .graphgeom import (
    CurvatureJet,
    GraphFrame,
    build_frame,
    nu_gradient_check,
    shape_operator_derivatives,
)
from .inequality_lab import (
    JacobiConstants,
    QFormSample,
    claim1_certificate,
    claim1_quadratic,
    claim2_certificate,
    jacobi_constants,
    q_delta_roots,
    qform_value,
    trace_det_analysis,
    verify_sharp1,
    verify_sharp2,
)
from .domain import DomainSpec, Discretization
from .solver import (
    CapProfile,
    EstimateReport,
    GridSolution,
    StagnationError,
    continuation_solve,
    estimate_report,
    exact_cap,
    newton_step,
    residual,
    shifted_cap,
)
from .config import RunConfig, parse_config, serialize_config
from .reports import VerifyReport, export_solution, run_verify

__version__ = "0.1.0"
