"""Entropy of the reduced distribution and its production rate.

``s = -g ln g`` with ``g`` measured against a unit reference density in code
units; only rates are physically meaningful since particle number is
conserved.  Two rates are provided:

* :func:`entropy_rate_exact` integrates ``g d/dv^mu (A^mu / gamma)`` over
  phase space for a given acceleration field;
* :func:`entropy_rate_first_order` evaluates the closed form

      dS_1/dt = -(1/m) int [J_a (J^a + J_ext^a) + 4 (q/m)^2 T_ab S^ab] dz

  from the tau -> 0 moments and field, split into its three terms.

The exact rate of ``A_(0) + tau A_(1)`` equals ``tau`` times the closed form
up to ``O(tau^2)``, because ``A_(0)/gamma`` is divergence free.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import stress_energy
from .kinematics import gamma, minkowski_dot
from .submanifold import AccelField, FieldJet, PhaseGrid, build_accel_field

G_FLOOR = 1e-300


def entropy_total(g):
    """``S = -sum g ln g dz dv``; nodes with ``g < 1e-300`` contribute nothing."""
    vals = np.asarray(g.values, dtype=float)
    cell = g.grid.dz * g.grid.dv[2]
    pos = vals >= G_FLOOR
    return float(-np.sum(vals[pos] * np.log(vals[pos])) * cell)


def velocity_divergence(A: AccelField):
    """``d/dv^mu (A^mu / gamma)`` on the full grid, shape ``(nz, n1, n2, n3)``.

    Central differences (second order, one-sided at the box edges).
    Transverse axes with a single node contribute nothing, so a grid with
    three transverse nodes is needed whenever the transverse derivatives
    matter.
    """
    grid = A.grid
    W = A.total() / gamma(grid.velocity_mesh())[None, ..., None]
    out = np.zeros(grid.shape)
    axes = (grid.v1, grid.v2, grid.v3)
    for i, ax in enumerate(axes):
        if ax.size > 1:
            out += np.gradient(W[..., i], ax, axis=1 + i, edge_order=2)
    return out


def entropy_rate_exact(g, A: AccelField):
    """``dS/dt = int g d/dv^mu (A^mu/gamma) dv dz`` for the reduced 1D1V distribution.

    ``g`` lives on the (z, v3) slice; the divergence is sampled at the
    transverse centre (v1 = v2 = 0), matching a cold transverse profile.
    """
    div = velocity_divergence(A)
    c1, c2 = A.grid.transverse_centre()
    return float(np.sum(np.asarray(g.values) * div[:, c1, c2, :]) * A.grid.dz * A.grid.dv[2])


def entropy_grid(grid: PhaseGrid, transverse_step=1e-3) -> PhaseGrid:
    """Copy of a 1D1V grid with three-node transverse velocity axes ``{-h, 0, h}``."""
    h = float(transverse_step)
    ax = np.array([-h, 0.0, h])
    return PhaseGrid(grid.nz, grid.length, grid.v3, v1=ax, v2=ax, z0=grid.z0)


def state_accel_field(state, tau=None, order=1, transverse_step=1e-3) -> AccelField:
    """Acceleration field of a plasma state on an entropy grid (general recursion)."""
    from .vlasov import _field_jet

    tau = state.params.tau if tau is None else tau
    p = state.params
    jet = _field_jet(state, with_second=order >= 2)
    grid = entropy_grid(state.grid, transverse_step)
    return build_accel_field(grid, jet, p.q_over_m, tau, order)


@dataclass(frozen=True)
class EntropyReport:
    S_total: float
    dS_dt_exact: float | None
    dS_dt_first_order: float
    self_term: float
    ext_term: float
    field_term: float

    def as_dict(self):
        return {
            "S_total": self.S_total,
            "dS_dt_exact": self.dS_dt_exact,
            "dS_dt_first_order": self.dS_dt_first_order,
            "self_term": self.self_term,
            "ext_term": self.ext_term,
            "field_term": self.field_term,
        }


def entropy_rate_first_order(g, F, J_ext=None, q=-1.0, m=1.0, dS_dt_exact=None) -> EntropyReport:
    """Closed-form first-order entropy rate from the tau -> 0 state.

    ``F`` is ``F_ab`` on the z-grid (shape ``(nz, 4, 4)``, or a single
    ``(4, 4)`` tensor for a uniform field, or a :class:`FieldJet`); ``J_ext``
    is ``J_ext^a`` (shape ``(4,)`` or ``(nz, 4)``, default zero).  The three
    terms are returned separately and sum to ``dS_dt_first_order``.
    """
    from .vlasov import current_moment, stress_moment

    grid = g.grid
    dz = grid.dz
    if isinstance(F, FieldJet):
        F = F.F
    F = np.broadcast_to(np.asarray(F, dtype=float), (grid.nz, 4, 4))
    J = current_moment(g, q)
    Jext = np.zeros(4) if J_ext is None else np.asarray(J_ext, dtype=float)
    Jext = np.broadcast_to(Jext, J.shape)
    S = stress_moment(g, m)
    T = stress_energy(F)
    self_term = -np.sum(minkowski_dot(J, J)) * dz / m
    ext_term = -np.sum(minkowski_dot(J, Jext)) * dz / m
    field_term = -4.0 * q * q / m**3 * np.sum(np.einsum("zab,zab->z", T, S)) * dz
    return EntropyReport(
        S_total=entropy_total(g),
        dS_dt_exact=dS_dt_exact,
        dS_dt_first_order=float(self_term + ext_term + field_term),
        self_term=float(self_term),
        ext_term=float(ext_term),
        field_term=float(field_term),
    )


def entropy_report(state, transverse_step=1e-3) -> EntropyReport:
    """Both rates for a plasma state (the exact one with the state's own tau and order)."""
    from .vlasov import _field_jet, external_current

    p = state.params
    exact = 0.0
    if p.tau > 0:
        exact = entropy_rate_exact(state.g, state_accel_field(state, order=p.order, transverse_step=transverse_step))
    return entropy_rate_first_order(state.g, _field_jet(state), external_current(p), p.q, p.m, dS_dt_exact=exact)
