"""Physics-informed neural solver and verification harness for 2D
nonstationary incompressible magnetohydrodynamics."""

from .jets import Jet2, JetDomainError, jet_seed
from .loss import LossBreakdown, LossWeights, NonFiniteLossError, ProblemData, loss_eval, loss_grad
from .network import (FieldSample, NetworkParams, forward_jet, forward_values,
                      init_params, load_checkpoint, save_checkpoint)
from .physics import PhysicsParams, boundary_terms, forms_quadrature, residual_B, residual_f
from .sampling import CollocationBatch, sample_batch
from .training import AdamState, RunConfig, TrainResult, adam_step, train

__version__ = "0.1.0"

__all__ = [
    "Jet2", "JetDomainError", "jet_seed",
    "LossBreakdown", "LossWeights", "NonFiniteLossError", "ProblemData",
    "loss_eval", "loss_grad",
    "FieldSample", "NetworkParams", "forward_jet", "forward_values",
    "init_params", "load_checkpoint", "save_checkpoint",
    "PhysicsParams", "boundary_terms", "forms_quadrature",
    "residual_B", "residual_f",
    "CollocationBatch", "sample_batch",
    "AdamState", "RunConfig", "TrainResult", "adam_step", "train",
    "__version__",
]
