from .sdp import SdpProblem, SdpSolution, SdpStatus, solve_sdp
from .fractional import MaxMinSpec, dinkelbach_maxmin, power_min
from .monotonic import polyblock_maximize
