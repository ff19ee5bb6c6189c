from .errors import (
    TwrbfError,
    DimensionError,
    NotPSDError,
    DomainError,
    ConfigError,
    SolverError,
    InfeasibleError,
    BracketError,
)
from .model import SystemInstance, build_forms, generate_channels, sinr_of_A
from .solvers.fractional import relay_maxmin, relay_power_min
from .solvers.monotonic import maximize_utility
from .utility import Modulation, Utility
from .collaborative import CollabInstance, collab_maxmin, collab_utility_maximize
from .mimo import MimoInstance, alternate
from .baselines import BaselineKind, baseline_beamformer
