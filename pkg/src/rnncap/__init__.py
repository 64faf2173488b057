"""Norm-based capacity bounds for vanilla recurrent networks.

Submodules: ``linalg`` (dense norms), ``rnn`` (model, BPTT, checkpoints),
``losses``, ``capacity`` (closed-form bounds), ``empirical`` (Monte-Carlo
and numeric checks), ``harness`` (training and sweeps) and ``cli``.
"""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
