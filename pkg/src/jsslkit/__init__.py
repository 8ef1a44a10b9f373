"""jsslkit: joint supervised / self-supervised MRI reconstruction toolkit.

Desk-scale implementation of accelerated multi-coil MRI reconstruction
training: k-space physics operators, Cartesian subsampling with SSDU-style
Gaussian partitioning, dual-domain losses, small unrolled reconstructors on
a built-in autodiff engine, six training setups, paired significance
testing, and Monte-Carlo checks of the bias/variance motivation for mixing
proxy-supervised and target-self-supervised objectives.
"""

from ._kernels import BACKEND as kernel_backend
from .tensor import Tensor, read_tnsr, write_tnsr

__all__ = ["Tensor", "read_tnsr", "write_tnsr", "kernel_backend"]
__version__ = "0.1.0"
