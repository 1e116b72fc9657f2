"""Proximal method of multipliers with a semismooth Newton inner solver.

Solves min_x f(x) + phi(Ex) for smooth convex f, a linear map E and a
closed convex phi from the family in :mod:`proxmm.prox`.
"""
from .inner_newton import InnerConfig, InnerResult, newton_solve
from .lagrangian import IterateState, Problem, Quadratic, ZeroSmooth, kkt_residual, objective
from .operators import Dense, Grad2DPeriodic, Identity, VStack
from .outer_solvers import (
    ConstantC,
    ConvergenceTrace,
    FBNConfig,
    GeometricC,
    GeometricEps,
    OuterConfig,
    admm_solve,
    alm_solve,
    fb_newton_solve,
    pmm_solve,
)
from .problems_io import Image, build_l1tv, build_lasso, phantom, read_pgm, salt_pepper_noise, write_pgm

__version__ = "0.1.0"
