"""Inference-time description-length minimization for ARC grid puzzles."""
from .puzzle import Grid, Puzzle, parse_puzzle, load_puzzle, infer_shape_rules, build_color_map
from .multitensor import LEGAL_KEYS, MultiTensor, ShapeKey, SymmetryElement, apply_symmetry, enumerate_legal_shapes
from .solver import SolverConfig, solve_puzzle, select_top_k

__all__ = [
    "Grid", "Puzzle", "parse_puzzle", "load_puzzle", "infer_shape_rules", "build_color_map",
    "LEGAL_KEYS", "MultiTensor", "ShapeKey", "SymmetryElement", "apply_symmetry", "enumerate_legal_shapes",
    "SolverConfig", "solve_puzzle", "select_top_k",
]
