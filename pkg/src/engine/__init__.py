"""
Numerical engine for homogeneous kernels, p-homogeneous functionals and the
inequalities that tie them together.
"""

__version__ = "1.0.0"

__all__ = ['__version__']
