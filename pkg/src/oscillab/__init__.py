"""oscillab: numerical experiments on oscillation-norm growth under
measure-preserving bi-Lipschitz maps, Whitney covers, Carleson pull-backs,
and transport equations."""

from .domain import (
    Ball,
    Box,
    DistanceField,
    Grid,
    GridFunction,
    PixelMask,
    ball_average,
    ball_family,
    ball_oscillation,
    distance_transform,
)
from .maps import (
    BiLipMap,
    FlowMap,
    VectorField,
    estimate_K,
    integrate_flow,
    make_linear_strain,
    make_shear,
)
from .oscillation import OscillationParams, compose, composition_ratio, rho, seminorm

__all__ = [
    "Ball",
    "Box",
    "BiLipMap",
    "DistanceField",
    "FlowMap",
    "Grid",
    "GridFunction",
    "OscillationParams",
    "PixelMask",
    "VectorField",
    "ball_average",
    "ball_family",
    "ball_oscillation",
    "compose",
    "composition_ratio",
    "distance_transform",
    "estimate_K",
    "integrate_flow",
    "make_linear_strain",
    "make_shear",
    "rho",
    "seminorm",
]

__version__ = "0.1.0"
