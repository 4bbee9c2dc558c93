"""Joint motion and communication energy planning for a mobile robot.

The package synthesizes a wireless channel, predicts it from sparse
measurements with kriging, and optimizes the robot's acceleration and
spectral efficiency with a Hamiltonian descent method, either once before
the robot moves or repeatedly as new measurements arrive.
"""

from commaware.errors import (
    ArmijoCapReached,
    ChannelError,
    CommAwareError,
    ConfigError,
    PredictionError,
    SolverError,
)

__version__ = "0.1.0"

__all__ = [
    "ArmijoCapReached",
    "ChannelError",
    "CommAwareError",
    "ConfigError",
    "PredictionError",
    "SolverError",
]
