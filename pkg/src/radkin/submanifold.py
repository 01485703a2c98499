"""The physical acceleration field ``A^mu(x, v)`` on a phase-space grid.

The field is stored as its tau-series ``A = sum_n tau^n A_(n)``, each order a
grid of shape ``(nz, n1, n2, n3, 3)`` over a periodic z-axis and a tensor
product velocity grid.  ``A^0`` is never stored; it is always ``v.A/gamma``.

Derivative rules (shared by the recursion and the residual checker, so the
two are consistent order by order):

* order 0 is closed-form in ``F`` and its derivatives, so its space, time
  and velocity derivatives are taken analytically from the :class:`FieldJet`;
* higher orders use second-order central differences: periodic in z,
  one-sided (second order) at the velocity-box edges.  A velocity axis with
  a single node is a frozen transverse direction and contributes no
  derivative (valid for cold transverse profiles, where the corresponding
  acceleration component vanishes);
* the time derivative of order 1 is the exact directional derivative of the
  order-1 map along the jet's time derivative (order 1 is quadratic in the
  jet, so a central difference is exact).  Orders above 2 are not supported.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .fields import FieldModel, mixed
from .kinematics import gamma, lift_acceleration, lift_velocity, minkowski_dot

MAX_ORDER = 2


def _axis(values, name):
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size > 1:
        d = np.diff(arr)
        if np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-9, atol=0.0):
            raise ValueError(f"{name} must be uniformly spaced and increasing")
    return arr


@dataclass(frozen=True)
class PhaseGrid:
    """Periodic z-axis (cell centres ``z0 + j dz``) times a velocity grid.

    ``v3`` is the longitudinal (z) velocity axis.  ``v1`` and ``v2`` default
    to the single node 0 (cold transverse profile); otherwise they need at
    least three nodes so central differences exist.
    """

    nz: int
    length: float
    v3: np.ndarray
    v1: np.ndarray = field(default_factory=lambda: np.zeros(1))
    v2: np.ndarray = field(default_factory=lambda: np.zeros(1))
    z0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "v3", _axis(self.v3, "v3"))
        object.__setattr__(self, "v1", _axis(self.v1, "v1"))
        object.__setattr__(self, "v2", _axis(self.v2, "v2"))
        if self.nz < 8 or self.v3.size < 8:
            raise ValueError("phase grid needs at least 8 nodes in z and in v3")
        if not self.length > 0:
            raise ValueError("length must be positive")
        for name in ("v1", "v2"):
            if getattr(self, name).size == 2:
                raise ValueError(f"{name} needs 1 node (frozen) or at least 3")

    @classmethod
    def uniform(cls, nz, length, nv, v_max, transverse_step=None, z0=0.0):
        """Cell-centred v3 nodes on ``[-v_max, v_max]``; optional 3-node transverse axes."""
        dv = 2.0 * v_max / nv
        v3 = -v_max + (np.arange(nv) + 0.5) * dv
        if transverse_step is None:
            return cls(nz, length, v3, z0=z0)
        t = np.array([-transverse_step, 0.0, transverse_step])
        return cls(nz, length, v3, t, t.copy(), z0=z0)

    @property
    def dz(self):
        return self.length / self.nz

    @property
    def z(self):
        return self.z0 + np.arange(self.nz) * self.dz

    @property
    def dv(self):
        return tuple(float(ax[1] - ax[0]) if ax.size > 1 else 0.0 for ax in (self.v1, self.v2, self.v3))

    @property
    def vshape(self):
        return (self.v1.size, self.v2.size, self.v3.size)

    @property
    def shape(self):
        return (self.nz,) + self.vshape

    def velocity_mesh(self):
        """Reduced velocities at the velocity nodes, shape ``(n1, n2, n3, 3)``."""
        V1, V2, V3 = np.meshgrid(self.v1, self.v2, self.v3, indexing="ij")
        return np.stack([V1, V2, V3], axis=-1)

    def transverse_centre(self):
        """Index of the v1 = v2 = 0 node (the cold-transverse slice)."""
        i1 = int(np.argmin(np.abs(self.v1)))
        i2 = int(np.argmin(np.abs(self.v2)))
        return i1, i2


@dataclass(frozen=True)
class FieldJet:
    """Field on the z-grid with the derivatives the recursion needs.

    ``F[z, a, b]``, ``dF[z, d, a, b] = d_d F_ab`` and
    ``dF_t[z, d, a, b] = d_t d_d F_ab``.
    """

    F: np.ndarray
    dF: np.ndarray
    dF_t: np.ndarray | None = None

    @property
    def F_t(self):
        return self.dF[:, 0]

    def shifted(self, delta):
        """The jet advanced by ``delta`` along its own time derivative (to first order)."""
        dF_t = np.zeros_like(self.dF) if self.dF_t is None else self.dF_t
        return FieldJet(self.F + delta * self.F_t, self.dF + delta * dF_t, None)

    @classmethod
    def from_model(cls, model: FieldModel, grid: PhaseGrid, t=0.0, dt=1e-5):
        """Sample an analytic model along the grid's z-axis at time ``t``."""
        def sample(time):
            pts = [model.field_at(np.array([time, 0.0, 0.0, z])) for z in grid.z]
            return np.array([p.F for p in pts]), np.array([p.dF for p in pts])

        F, dF = sample(t)
        _, dF_plus = sample(t + dt)
        _, dF_minus = sample(t - dt)
        return cls(F, dF, (dF_plus - dF_minus) / (2 * dt))

    @classmethod
    def electrostatic(cls, E, dE_dz, dE_dt, d2E_dt2=None, d2E_dtdz=None):
        """Jet of a longitudinal field ``E_z(z, t)`` (``F_03 = E_z``)."""
        E = np.asarray(E, dtype=float)
        nz = E.size
        F = np.zeros((nz, 4, 4))
        F[:, 0, 3], F[:, 3, 0] = E, -E
        dF = np.zeros((nz, 4, 4, 4))
        dF[:, 0, 0, 3], dF[:, 0, 3, 0] = dE_dt, -np.asarray(dE_dt)
        dF[:, 3, 0, 3], dF[:, 3, 3, 0] = dE_dz, -np.asarray(dE_dz)
        dF_t = np.zeros_like(dF)
        if d2E_dt2 is not None:
            dF_t[:, 0, 0, 3], dF_t[:, 0, 3, 0] = d2E_dt2, -np.asarray(d2E_dt2)
        if d2E_dtdz is not None:
            dF_t[:, 3, 0, 3], dF_t[:, 3, 3, 0] = d2E_dtdz, -np.asarray(d2E_dtdz)
        return cls(F, dF, dF_t)


# ---------------------------------------------------------------------------
# derivative helpers
# ---------------------------------------------------------------------------

def _dz_periodic(A, dz):
    return (np.roll(A, -1, axis=0) - np.roll(A, 1, axis=0)) / (2 * dz)


def _dv_grid(A, grid: PhaseGrid):
    """``[dA/dv1, dA/dv2, dA/dv3]`` by 2nd-order central differences (one-sided at edges)."""
    out = []
    for k, ax in enumerate((grid.v1, grid.v2, grid.v3)):
        if ax.size == 1:
            out.append(np.zeros_like(A))
        else:
            out.append(np.gradient(A, ax[1] - ax[0], axis=k + 1, edge_order=2))
    return out


def _lift_grid(grid, A):
    return lift_acceleration(grid.velocity_mesh()[None], A)


def _mixed_apply(Fm, W):
    """``(F^mu_b W^b)`` for ``Fm`` shape (nz,4,4) and ``W`` shape (nz,n1,n2,n3,4); spatial part."""
    return np.einsum("zab,z...b->z...a", Fm, W, optimize=True)[..., 1:]


def a0_field(grid: PhaseGrid, jet: FieldJet, q_over_m):
    """Order-0 acceleration ``-(q/m) F^mu_a xdot^a`` at every grid node."""
    u = lift_velocity(grid.velocity_mesh())
    return -q_over_m * np.einsum("zab,...b->z...a", mixed(jet.F), u, optimize=True)[..., 1:]


def _order0_transport(grid, jet, q_over_m, W):
    """``W^nu dA_(0)/dv^nu`` in closed form: ``-(q/m) F^mu_b Wlift^b``."""
    return -q_over_m * _mixed_apply(mixed(jet.F), _lift_grid(grid, W))


def _order0_convective(grid, jet, q_over_m, spatial_only=False):
    """``xdot^d d_d A_(0)`` in closed form from the jet (``d >= 1`` only if ``spatial_only``)."""
    u = lift_velocity(grid.velocity_mesh())
    dF = jet.dF.copy()
    if spatial_only:
        dF[:, 0] = 0.0
    return -q_over_m * np.einsum("zdab,...b,...d->z...a", mixed(dF), u, u, optimize=True)[..., 1:]


def _time_derivative_order1(grid, jet, q_over_m):
    scale_F = np.max(np.abs(jet.F))
    scale_t = np.max(np.abs(jet.F_t))
    if scale_t == 0.0 and (jet.dF_t is None or not np.any(jet.dF_t)):
        return np.zeros(grid.shape + (3,))
    delta = scale_F / scale_t if scale_t > 0 and scale_F > 0 else 1.0
    plus, minus = jet.shifted(delta), jet.shifted(-delta)
    A1p = tau_recursion_step([a0_field(grid, plus, q_over_m)], grid, plus, q_over_m)
    A1m = tau_recursion_step([a0_field(grid, minus, q_over_m)], grid, minus, q_over_m)
    return (A1p - A1m) / (2 * delta)


def _convective(n, An, grid, jet, q_over_m, dA_dt=None):
    """``xdot^a d_a A_(n)`` on the 1D grid."""
    if n == 0:
        return _order0_convective(grid, jet, q_over_m)
    V = grid.velocity_mesh()
    g = gamma(V)[None, ..., None]
    if dA_dt is None:
        dA_dt = _time_derivative_order1(grid, jet, q_over_m) if n == 1 else np.zeros_like(An)
    return g * dA_dt + V[None, ..., 2:3] * _dz_periodic(An, grid.dz)


def _transport(W, j, Aj, grid, jet, q_over_m):
    """``W^nu d A_(j) / d v^nu``."""
    if j == 0:
        return _order0_transport(grid, jet, q_over_m, W)
    dv = _dv_grid(Aj, grid)
    return sum(W[..., k:k + 1] * dv[k] for k in range(3))


def tau_recursion_step(orders, grid: PhaseGrid, jet: FieldJet, q_over_m):
    """Next order ``A_(n+1)`` of the tau-series from ``orders = [A_(0), ..., A_(n)]``.

    The field is treated as ``F_(0)`` only (higher field orders absorbed), so

        A_(n+1) = xdot^a d_a A_(n) + sum_j A_(n-j)^nu d_nu A_(j)
                  - v^mu sum_j A_(n-j)^a A_(j)a .
    """
    n = len(orders) - 1
    if n + 1 > MAX_ORDER:
        raise ValueError(f"orders above {MAX_ORDER} are not supported")
    V = grid.velocity_mesh()[None]
    out = _convective(n, orders[n], grid, jet, q_over_m)
    contraction = np.zeros(grid.shape)
    for j in range(n + 1):
        out = out + _transport(orders[n - j], j, orders[j], grid, jet, q_over_m)
        contraction = contraction + minkowski_dot(lift_acceleration(V, orders[n - j]),
                                                  lift_acceleration(V, orders[j]))
    return out - V * contraction[..., None]


@dataclass
class AccelField:
    """Truncated tau-series of the physical acceleration on a phase grid."""

    grid: PhaseGrid
    jet: FieldJet
    orders: list
    tau: float
    q_over_m: float

    @property
    def N(self):
        return len(self.orders) - 1

    def total(self):
        return sum(self.tau**n * A for n, A in enumerate(self.orders))

    def component0(self):
        """``A^0 = v.A / gamma`` (derived, never stored)."""
        V = self.grid.velocity_mesh()[None]
        return np.sum(V * self.total(), axis=-1) / gamma(V)

    def longitudinal(self):
        """``A^3`` on the cold-transverse slice, shape ``(nz, n3)``."""
        i1, i2 = self.grid.transverse_centre()
        return self.total()[:, i1, i2, :, 2]

    def with_tau(self, tau):
        return replace(self, tau=tau)

    def to_csv(self, path):
        """Write node coordinates and the components of the total acceleration."""
        A = self.total()
        V = self.grid.velocity_mesh()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["z", "v1", "v2", "v3", "A1", "A2", "A3"])
            for iz, z in enumerate(self.grid.z):
                for idx in np.ndindex(*self.grid.vshape):
                    w.writerow([repr(float(c)) for c in (z, *V[idx], *A[(iz,) + idx])])


def build_accel_field(grid: PhaseGrid, jet: FieldJet, q_over_m, tau, N) -> AccelField:
    if N not in range(MAX_ORDER + 1):
        raise ValueError(f"truncation order must be in 0..{MAX_ORDER}")
    orders = [a0_field(grid, jet, q_over_m)]
    for _ in range(N):
        orders.append(tau_recursion_step(orders, grid, jet, q_over_m))
    return AccelField(grid, jet, orders, tau, q_over_m)


def accel_pde_residual(A: AccelField, dA_dt=None, jet: FieldJet | None = None, q_over_m=None, tau=None):
    """Residual of the submanifold equation for the truncated series ``A``.

        xdot^a d_a A + A^nu d_nu A - (A.A) v - (A + (q/m) F^mu_a xdot^a)/tau

    ``dA_dt`` (optional) overrides the time derivative of the total field;
    otherwise each order's time derivative follows the module's derivative
    rules (order 2 treated as static).  For an order-N truncation the
    residual is O(tau^N).
    """
    jet = A.jet if jet is None else jet
    q_over_m = A.q_over_m if q_over_m is None else q_over_m
    tau = A.tau if tau is None else tau
    grid = A.grid
    V = grid.velocity_mesh()[None]
    orders = A.orders
    total = sum(tau**n * An for n, An in enumerate(orders))

    if dA_dt is None:
        conv = sum(tau**n * _convective(n, An, grid, jet, q_over_m) for n, An in enumerate(orders))
    else:
        conv = gamma(V)[..., None] * dA_dt + _order0_convective(grid, jet, q_over_m, spatial_only=True)
        conv = conv + sum(tau**n * V[..., 2:3] * _dz_periodic(An, grid.dz) for n, An in enumerate(orders) if n > 0)

    transport = np.zeros_like(total)
    for n, An in enumerate(orders):
        transport = transport + _transport(total, n, An, grid, jet, q_over_m) * tau**n
    lifted = lift_acceleration(V, total)
    contraction = minkowski_dot(lifted, lifted)[..., None] * V
    bracket = total - a0_field(grid, jet, q_over_m)
    return conv + transport - contraction - bracket / tau
