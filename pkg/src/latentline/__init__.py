"""Order and position recovery for one-dimensional latent-space random graphs."""
import numba as _numba

# skip the TBB probe (and its warning) on hosts with an old TBB
_numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from .errors import ConfigError, DomainError, EmptyAnchorSet, FormatError  # noqa: E402
from .math_kernels import Interval  # noqa: E402
from .model_core import Decay, ModelParams, PositionVector, RandomGraph  # noqa: E402

__all__ = [
    "ConfigError", "Decay", "DomainError", "EmptyAnchorSet", "FormatError",
    "Interval", "ModelParams", "PositionVector", "RandomGraph",
]
__version__ = "0.1.0"
