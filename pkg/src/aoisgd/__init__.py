"""Asynchronous penalty-based distributed SGD over lossy, time-varying
directed networks, with age-of-information instrumentation."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
