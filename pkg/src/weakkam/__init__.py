"""Weak KAM solutions on periodic grids.

Discrete Lax-Oleinik semigroups, the critical value as a min-plus
eigenvalue, Mather set approximation and symmetry-invariance checks.
"""
from ._backend import BACKEND
from .critical import critical_value, karp_min_mean_cycle
from .grid import GridFunction, PeriodicGrid, normalize, wrap_displacement
from .mather import conjugate_pair, gradient_consistency, mather_set_approx
from .model import (LagrangianModel, eval_lagrangian, free_model, legendre_transform,
                    pendulum_model)
from .oracle import ReferenceSolution, circle_reference, compare_to_reference, sphere_reference
from .semigroup import (ActionKernel, apply_backward, apply_forward, backward_orbit,
                        build_kernel, check_domination, compose_kernel, dominated_envelope,
                        solve_weak_kam)
from .symmetry import (SymmetryGroup, average, check_invariance, invariant_weak_kam,
                       make_reflection_group, make_shift_group, verify_symmetry)

__version__ = "0.1.0"
