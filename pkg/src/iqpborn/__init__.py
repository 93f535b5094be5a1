"""IQP-circuit Born machines under the MMD loss: simulation, training,
and variance/curvature analysis."""

__version__ = "0.1.0"

from ._kernels import BACKEND as kernel_backend  # noqa: F401
