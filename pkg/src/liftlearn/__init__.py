"""Learned lifted-linear models of control-affine systems.

A neural lifting ``z = N(x)`` is trained so that ``z' = A z + J_N(x) B u``
reproduces the plant; the lifted model then drives SDRE/LQR control of the
original nonlinear plant.
"""

from .closedloop import (ControlRun, LQRBaselineController, SDREController, bounds_containment,
                         derivative_fit_report, exact_oracle, rollout_error, run_closed_loop)
from .dynamics import (Dataset, PlantSystem, StepSignal, builtin_plant, generate_step_dataset,
                       generate_uniform_dataset, integrate)
from .errors import (ConfigError, DegenerateSolutionError, DimensionError, DivergenceError,
                     DomainError, EvaluationError, LiftLearnError, OptimizerError,
                     RiccatiNumericalError, RootFindingError, SolvabilityError)
from .liftedmodel import LiftedModel, linearize_standard, load_model, save_model, simulate_lifted
from .liftnet import LiftNet, NetArchitecture
from .riccati import LqrWeights, lqr_gain, sdre_gain, solve_care
from .training import TrainConfig, train

__version__ = "0.1.0"
