"""Eigenvalues of block Jacobi matrices from matrix Pruefer phases."""
from .kernels import BACKEND
from .jacobi import JacobiModel

__version__ = "0.1.0"
__all__ = ["BACKEND", "JacobiModel", "__version__"]
