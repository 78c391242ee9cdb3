"""Learn inverse modified Lagrangians from position data and integrate them.

The learned Lagrangian is discretised by a variational midpoint (or
trapezoidal) rule; backward error analysis then recovers an approximation of
the true Lagrangian and the modified energies.
"""

from .analysis import (GridSpec, HamiltonianField, contour_grid, divergence_time, energy_trace,
                       nu_metric)
from .bea import BeaField, bea_correct, modified_hamiltonian, motion_lagrangian
from .datagen import (GroundTruthSpec, SamplerSpec, central_differences, generate_dataset,
                      load_dataset, save_dataset)
from .discretize import DiscreteScheme, NonConvergence, integrate, recover_velocity, step
from .domain import BenchmarkSystem, State, Trajectory, TrajectoryDataset
from .estimators import FlowMapRegressor, LagrangianGP, LagrangianShadowIntegrator
from .fields import FunctionField, LagrangianField, MechanicalLagrangian
from .kernel import KernelParams, RBFKernel
from .learn import (FlowMapGP, KernelModel, TrainConfig, load_model, save_model, train_gpflow,
                    train_lgp, train_lsi)

__version__ = "0.1.0"

__all__ = [
    "BeaField", "BenchmarkSystem", "DiscreteScheme", "FlowMapGP", "FlowMapRegressor",
    "FunctionField", "GridSpec", "GroundTruthSpec", "HamiltonianField", "KernelModel",
    "KernelParams", "LagrangianField", "LagrangianGP", "LagrangianShadowIntegrator",
    "MechanicalLagrangian", "NonConvergence", "RBFKernel", "SamplerSpec", "State",
    "TrainConfig", "Trajectory", "TrajectoryDataset", "bea_correct", "central_differences",
    "contour_grid", "divergence_time", "energy_trace", "generate_dataset", "integrate",
    "load_dataset", "load_model", "modified_hamiltonian", "motion_lagrangian", "nu_metric",
    "recover_velocity", "save_dataset", "save_model", "step", "train_gpflow", "train_lgp",
    "train_lsi",
]
