"""Minkowski algebra and the constrained velocity/acceleration phase space.

Conventions: metric diag(-1, 1, 1, 1), c = 1, Heaviside-Lorentz units.
Four-vectors are numpy arrays whose last axis has length 4 (contravariant
components); all functions broadcast over leading axes.

Reduced coordinates ``(x, v, a)`` are canonical.  The ambient velocity and
acceleration four-vectors are always obtained through :func:`lift_velocity`
and :func:`lift_acceleration`, so the mass-shell and orthogonality
constraints hold by construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

METRIC = np.diag([-1.0, 1.0, 1.0, 1.0])


def lower(u):
    """Lower (or raise) the index of a four-vector: flips the sign of component 0."""
    u = np.asarray(u, dtype=float)
    out = u.copy()
    out[..., 0] = -out[..., 0]
    return out


def minkowski_dot(u, w):
    """Return ``-u0*w0 + u.w``."""
    u = np.asarray(u)
    w = np.asarray(w)
    return -u[..., 0] * w[..., 0] + np.sum(u[..., 1:] * w[..., 1:], axis=-1)


def gamma(v):
    """Lorentz factor sqrt(1 + |v|^2) of a reduced velocity (spatial part of u)."""
    v = np.asarray(v, dtype=float)
    return np.sqrt(1.0 + np.sum(v * v, axis=-1))


def lift_velocity(v):
    """Four-velocity ``(sqrt(1+|v|^2), v)`` on the unit mass shell."""
    v = np.asarray(v, dtype=float)
    g = gamma(v)
    return np.concatenate([g[..., None], v], axis=-1)


def lift_acceleration(v, a):
    """Four-acceleration ``(a.v/sqrt(1+|v|^2), a)``, orthogonal to the lifted velocity."""
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    a0 = np.sum(a * v, axis=-1) / gamma(v)
    return np.concatenate([a0[..., None], np.broadcast_to(a, np.broadcast_shapes(a.shape, v.shape))], axis=-1)


class ConstraintResidual(NamedTuple):
    phi1: float
    phi2: float


def constraint_residuals(xdot, xddot) -> ConstraintResidual:
    """Mass-shell residual ``phi1 = (u.u + 1)/2`` and orthogonality residual ``phi2 = u.a``."""
    phi1 = 0.5 * (minkowski_dot(xdot, xdot) + 1.0)
    phi2 = minkowski_dot(xdot, xddot)
    return ConstraintResidual(phi1, phi2)


def orthogonal_projection(xdot, w):
    """Project ``w`` orthogonally to the unit timelike vector ``xdot``.

    Returns ``w^a + xdot^a (xdot_b w^b)``.
    """
    xdot = np.asarray(xdot, dtype=float)
    w = np.asarray(w, dtype=float)
    return w + xdot * minkowski_dot(xdot, w)[..., None]


class LerayWeights(NamedTuple):
    fiber_weight: np.ndarray
    velocity_weight: np.ndarray


def leray_weights(v) -> LerayWeights:
    """Densities of the induced measures with respect to d^3a d^3v and d^3v.

    The fibre weight 1/(1+|v|^2) belongs to the velocity-acceleration fibre;
    the velocity weight 1/sqrt(1+|v|^2) is the invariant mass-shell measure.
    """
    g = gamma(v)
    return LerayWeights(1.0 / (g * g), 1.0 / g)


@dataclass(frozen=True)
class ReducedState:
    """A point ``(x, v, a)`` of the constrained phase space."""

    x: np.ndarray
    v: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(4))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(3))
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(3))

    @property
    def xdot(self):
        return lift_velocity(self.v)

    @property
    def xddot(self):
        return lift_acceleration(self.v, self.a)

    def residuals(self) -> ConstraintResidual:
        return constraint_residuals(self.xdot, self.xddot)

    def as_array(self):
        return np.concatenate([self.x, self.v, self.a])

    @classmethod
    def from_array(cls, y):
        y = np.asarray(y, dtype=float)
        return cls(y[:4], y[4:7], y[7:10])
