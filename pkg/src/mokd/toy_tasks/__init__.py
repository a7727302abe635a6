"""Desk-scale differentiable workloads."""

from .data import BlobDataset, make_blobs, make_toy_detection
from .gradcheck import central_difference, check_gradient, relative_error
from .mlp import MlpParams, init_mlp, mlp_backward, mlp_forward
from .quadratic import (
    QuadraticPair,
    conflict_quadratic_pair,
    pareto_distance,
    quad_losses,
    quad_pareto_point,
    random_quadratic_pair,
)

__all__ = [
    "BlobDataset",
    "MlpParams",
    "QuadraticPair",
    "central_difference",
    "check_gradient",
    "conflict_quadratic_pair",
    "init_mlp",
    "make_blobs",
    "make_toy_detection",
    "mlp_backward",
    "mlp_forward",
    "pareto_distance",
    "quad_losses",
    "quad_pareto_point",
    "random_quadratic_pair",
    "relative_error",
]
