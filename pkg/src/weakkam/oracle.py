"""Closed-form weak KAM solutions of the spherical pendulum.

For ``H(x, p) = |p|^2/2 + x_{n+1}`` on the unit sphere the solutions,
normalized to vanish at the north pole, depend only on the height ``z`` and
are ``u_+-(z) = +-I(z)`` with

    I(z) = int_z^1 sqrt((2 - 2s) / (1 - s^2)) ds = 4 - 2 sqrt(2 (1 + z)).

On the great circle through the pole, with ``z = cos(theta)``, this reads
``4 - 4 cos(theta/2)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .grid import GridFunction


def height_integrand(s):
    """``sqrt((2 - 2s) / (1 - s^2))``, singular like ``(1 + s)^(-1/2)`` at -1."""
    s = np.asarray(s, dtype=float)
    return np.sqrt((2.0 - 2.0 * s) / (1.0 - s * s))


def _angle_integrand(t):
    # s = cos t; 1 - s^2 = sin^2 t and 2 - 2s = 4 sin^2(t/2) evaluated without cancellation
    s2 = np.sin(t) ** 2
    return np.sqrt(4.0 * np.sin(0.5 * t) ** 2 / s2) * np.sin(t) if s2 > 0 else 2.0 * np.sin(0.5 * t)


def _check_sign(sign) -> int:
    if sign in (1, "+"):
        return 1
    if sign in (-1, "-"):
        return -1
    raise ValueError(f"sign must be +1 or -1, got {sign!r}")


def height_integral(z: float) -> float:
    """``int_z^1`` of :func:`height_integrand`, by adaptive Gauss-Kronrod.

    The substitution ``s = cos t`` removes the endpoint singularity at
    ``s = -1``; the result carries an absolute error below 1e-10.
    """
    z = float(z)
    if not -1.0 <= z <= 1.0:
        raise ValueError(f"height {z} outside [-1, 1]")
    if z == 1.0:
        return 0.0
    val, err = quad(_angle_integrand, 0.0, float(np.arccos(z)), epsabs=1e-13, epsrel=1e-13, limit=200)
    if err > 1e-10:
        raise ArithmeticError(f"quadrature error estimate {err:.2e} too large")
    return val


def sphere_reference(z: float, sign=1) -> float:
    """``u_+-(z)`` with ``u(N) = 0``."""
    return _check_sign(sign) * height_integral(z)


def circle_reference(theta: float, sign=1) -> float:
    """Reference on the great circle, ``theta`` measured from the pole."""
    theta = float(theta)
    if not -np.pi <= theta <= np.pi:
        raise ValueError(f"angle {theta} outside [-pi, pi]")
    return sphere_reference(np.cos(theta), sign)


@dataclass(frozen=True)
class ReferenceSolution:
    """``domain`` is ``"circle"`` (argument theta) or ``"sphere"`` (argument z)."""

    sign: int = 1
    domain: str = "circle"

    def __post_init__(self):
        object.__setattr__(self, "sign", _check_sign(self.sign))
        if self.domain not in ("circle", "sphere"):
            raise ValueError(f"unknown domain {self.domain!r}")

    def __call__(self, arg) -> float:
        if self.domain == "circle":
            return circle_reference(arg, self.sign)
        return sphere_reference(arg, self.sign)

    def sample(self, args) -> np.ndarray:
        return np.array([self(a) for a in np.ravel(args)])


def compare_to_reference(u: GridFunction, ref: ReferenceSolution) -> float:
    """Sup distance after aligning both at the grid point nearest theta = 0."""
    g = u.grid
    if g.ndim != 1 or ref.domain != "circle":
        raise ValueError("comparison needs a 1-D grid and a circle reference")
    theta = g.coords()[:, 0]
    r = ref.sample(theta)
    i0 = int(np.argmin(np.abs(theta)))
    return float(np.max(np.abs((u.values - u.values[i0]) - (r - r[i0]))))


def write_reference(path, thetas):
    plus = ReferenceSolution(1)
    minus = ReferenceSolution(-1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "sign_plus", "sign_minus"])
        for t in thetas:
            w.writerow([repr(float(t)), repr(plus(t)), repr(minus(t))])
