"""
poisres

Symbolic-numeric verification of symplectic resolutions of Poisson structures.
"""

__version__ = "1.0.0"
