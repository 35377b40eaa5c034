"""
Junction - Plate-Rod Limit Model Solver
Numerical core: limit model, finite elements, Newton solver, 3D recovery arm.
"""

__version__ = "0.1.0"
