"""Hardy inequalities on finite metric measure spaces and their hyperbolic fillings."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402

__all__ = ["__version__", "BACKEND"]
