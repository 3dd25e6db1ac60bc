"""Sparse precision matrix recovery from compressed rank-one sketches.

The pipeline: draw a sketching operator (:mod:`sketchprec.sketch`), compress
data or a covariance matrix into an m-vector, then decode a sparse precision
matrix with the iterative solver in :mod:`sketchprec.decoder`, which uses the
graphical lasso of :mod:`sketchprec.glasso` as its denoising step.
"""

__version__ = "0.1.0"

from .decoder import DecodeResult, DecoderConfig, decode, gradient, safe_step, stable_step
from .glasso import GlassoParams, PrecisionEstimate, glasso, kkt_residual
from .metrics import SupportScore, f1_support, relative_error
from .modelgen import (
    GeneratorSpec,
    GroundTruth,
    empirical_covariance,
    generate,
    model_membership,
    sample_gaussian,
)
from .sketch import (
    Sketch,
    SketchOperator,
    apply_A,
    apply_adjoint,
    apply_features,
    build_operator,
    lambda_norm_mc,
    merge,
    sketch_of_matrix,
    sketch_stream,
)
from .symmat import eig_sym, fro_norm, inner, is_spd, l1_off, min_eigenvalue, pinv

__all__ = [
    "__version__",
    "DecodeResult",
    "DecoderConfig",
    "decode",
    "gradient",
    "safe_step",
    "stable_step",
    "GlassoParams",
    "PrecisionEstimate",
    "glasso",
    "kkt_residual",
    "SupportScore",
    "f1_support",
    "relative_error",
    "GeneratorSpec",
    "GroundTruth",
    "empirical_covariance",
    "generate",
    "model_membership",
    "sample_gaussian",
    "Sketch",
    "SketchOperator",
    "apply_A",
    "apply_adjoint",
    "apply_features",
    "build_operator",
    "lambda_norm_mc",
    "merge",
    "sketch_of_matrix",
    "sketch_stream",
    "eig_sym",
    "fro_norm",
    "inner",
    "is_spd",
    "l1_off",
    "min_eigenvalue",
    "pinv",
]
