"""Caputo fractional gradient descent (CFGD) for quadratic and neural-network objectives."""

__version__ = "0.1.0"

from .caputo import FracParams, scaled_direction_closed_quadratic, scaled_direction_quadrature
from .errors import CFGDError
from .objectives import LeastSquaresObjective, QuadraticObjective, TwoLayerTanhNet
from .optimizers import (AO, AT, GD, NA, AOStage, ExactQuadratic, Fixed, GridBest32, ScaledFixed,
                         Trace, run, run_nn_training)
from .special import gauss_jacobi

__all__ = [
    "AO", "AOStage", "AT", "CFGDError", "ExactQuadratic", "Fixed", "FracParams", "GD", "GridBest32",
    "LeastSquaresObjective", "NA", "QuadraticObjective", "ScaledFixed", "Trace", "TwoLayerTanhNet",
    "gauss_jacobi", "run", "run_nn_training", "scaled_direction_closed_quadratic",
    "scaled_direction_quadrature",
]
