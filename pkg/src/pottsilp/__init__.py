"""Potts-model segmentation and denoising with a self-contained MILP solver."""
from .grid import (
    EdgeLabeling,
    GridGraph,
    NoiseSpec,
    Segmentation,
    add_noise,
    build_grid_graph,
    connected_components,
    contrast_weights,
    global_contrast,
)
from .milp import MilpResult, SolveOptions, SolveStats, solve_milp
from .model import MilpModel, read_lp_file, write_lp_file
from .multicut import MulticutInstance, is_valid_multicut, separate_cycles, solve_multicut
from .potts1d import Potts1DParams, brute_force_potts1d, build_potts1d_model, solve_potts1d_dp, solve_potts1d_mip
from .potts2d import (
    Potts2DParams,
    brute_force_potts2d,
    build_potts2d_model,
    cardinality_bounds,
    default_parameters,
    solve_potts2d,
)

__all__ = [
    "EdgeLabeling", "GridGraph", "NoiseSpec", "Segmentation", "add_noise", "build_grid_graph",
    "connected_components", "contrast_weights", "global_contrast",
    "MilpResult", "SolveOptions", "SolveStats", "solve_milp",
    "MilpModel", "read_lp_file", "write_lp_file",
    "MulticutInstance", "is_valid_multicut", "separate_cycles", "solve_multicut",
    "Potts1DParams", "brute_force_potts1d", "build_potts1d_model", "solve_potts1d_dp", "solve_potts1d_mip",
    "Potts2DParams", "brute_force_potts2d", "build_potts2d_model", "cardinality_bounds", "default_parameters",
    "solve_potts2d",
]
__version__ = "0.1.0"
