"""Non-local Cahn-Hilliard tumor growth: simulation library and CLI.

Subpackages:
  grid         uniform Neumann grids, discrete operators, dual norms
  kernel       FFT convolution operator and its structural constants
  potential    double-well splits with resolvent/Yosida/Moreau calculus
  model        IMEX time stepper for all relaxation regimes (eps, tau >= 0)
  diagnostics  observables, trajectory distances, theorem probes
  galerkin     spectral Faedo-Galerkin oracle (1D cross-validation)
  asymptotics  relaxation-limit sweeps, rate fits, stability probe
  cli          configuration, audit, and run orchestration
"""

from .errors import (
    AssumptionError,
    ComparisonError,
    CompatibilityError,
    ConfigError,
    DimensionError,
    FitError,
    InapplicabilityError,
    NlchError,
    SolverError,
    StepError,
    StiffnessError,
)
from .grid import Field, GridSpec
from .kernel import KernelBundle, KernelSpec, build, convolve
from .model import InitialData, ModelParams, State, Trajectory, run, step
from .potential import (
    PotentialSpec,
    double_obstacle_potential,
    logarithmic_potential,
    polynomial_potential,
)

__version__ = "0.1.0"
