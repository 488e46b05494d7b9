"""Algorithmically designed neural networks for semilinear heat-type PDEs.

A base model is built so that, untrained, it reproduces a linearly implicit
Runge-Kutta (LIRK) time stepper exactly; a difference network then learns the
scaled residual against a fine-grid reference solver.
"""

from .base_model import BaseWeights, forward, from_lirk_params
from .dataset_io import Dataset, generate_dataset, load_checkpoint, load_dataset, save_checkpoint, save_dataset
from .grid import GridSpec, ShiftedSolver, SingularSystemError, make_shifted_solver
from .lirk import CRANK_NICOLSON, LirkParams, OdeSystem, lirk_step2, rollout
from .mlp import MlpWeights, glorot_uniform_init, mlp_forward
from .orchestration import RunRecord, SweepPlan, adaptive_sweep, grid_sweep, select_best_run
from .problems import NONLINEARITIES, PRESETS, get_problem, seminorm
from .training import TrainConfig, full_model_eval, train_base, train_difference

__version__ = "0.1.0"
