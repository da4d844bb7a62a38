"""Latent variable models of optimization costs, learned through a black-box solver."""

from .errors import IolvmError
from .graph import Graph, Requirement, build_graph, validate_solution
from .solvers import SolverKind, solve, solve_batch
from .model import IoLvm, PoBaseline, TrainConfig, VaeBaseline, fit
from .datasets import Dataset, load_dataset, save_dataset
from . import datagen, evaluation, inference, metrics, pipeline

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Graph",
    "IoLvm",
    "IolvmError",
    "PoBaseline",
    "Requirement",
    "SolverKind",
    "TrainConfig",
    "VaeBaseline",
    "build_graph",
    "datagen",
    "evaluation",
    "fit",
    "inference",
    "load_dataset",
    "metrics",
    "pipeline",
    "save_dataset",
    "solve",
    "solve_batch",
    "validate_solution",
]
