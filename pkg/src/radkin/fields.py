"""Electromagnetic field models and the field stress-energy tensor.

Sign convention (used everywhere in the package)
------------------------------------------------
``F`` is stored with both indices down and

    F_{0i} = E_i,        F_{ij} = -eps_{ijk} B_k .

With the equation of motion ``xddot^a = -(q/m) F^a_b xdot^b`` this gives
``dv/dt = (q/m)(E + v x B)`` for a slow particle, i.e. ``dp/dt = qE`` with the
charge sign carried by ``q`` (q < 0 for an electron).  The sourced Maxwell
equation ``d_a F^{ab} = J^b`` then reads ``div E = rho`` and
``dE/dt = curl B - J``.

``dF[d, a, b]`` holds ``d F_ab / d x^d``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .kinematics import METRIC

_LEVI = np.zeros((3, 3, 3))
_LEVI[0, 1, 2] = _LEVI[1, 2, 0] = _LEVI[2, 0, 1] = 1.0
_LEVI[0, 2, 1] = _LEVI[2, 1, 0] = _LEVI[1, 0, 2] = -1.0


def field_tensor(E, B):
    """Build ``F_ab`` from electric and magnetic 3-vectors (broadcasts)."""
    E = np.asarray(E, dtype=float)
    B = np.asarray(B, dtype=float)
    shape = np.broadcast_shapes(E.shape, B.shape)[:-1]
    F = np.zeros(shape + (4, 4))
    F[..., 0, 1:] = E
    F[..., 1:, 0] = -E
    F[..., 1:, 1:] = -np.einsum("ijk,...k->...ij", _LEVI, B)
    return F


def electric_field(F):
    return np.asarray(F)[..., 0, 1:].copy()


def magnetic_field(F):
    F = np.asarray(F)
    return np.stack([-F[..., 2, 3], -F[..., 3, 1], -F[..., 1, 2]], axis=-1)


def mixed(F):
    """``F^a_b`` obtained by raising the first index with the metric."""
    F = np.asarray(F, dtype=float)
    out = F.copy()
    out[..., 0, :] = -out[..., 0, :]
    return out


def raise_both(T):
    """``T^ab`` from ``T_ab``."""
    return np.einsum("ac,...cd,db->...ab", METRIC, T, METRIC)


def stress_energy(F):
    """Field stress-energy ``T_ab = F_ac F_b^c - (1/4) eta_ab F_cd F^cd``."""
    F = np.asarray(F, dtype=float)
    FF = np.einsum("...ac,cd,...bd->...ab", F, METRIC, F)
    invariant = np.einsum("...cd,...cd->...", F, raise_both(F))
    return FF - 0.25 * METRIC * invariant[..., None, None]


def bianchi_residual(dF):
    """Largest violation of ``d_a F_bc + d_b F_ca + d_c F_ab = 0``."""
    dF = np.asarray(dF)
    cyc = dF + np.transpose(dF, (1, 2, 0)) + np.transpose(dF, (2, 0, 1))
    return float(np.max(np.abs(cyc)))


@dataclass(frozen=True)
class FieldTensor:
    """Field value ``F_ab`` and first derivatives ``d_d F_ab`` at one event."""

    F: np.ndarray
    dF: np.ndarray = field(default_factory=lambda: np.zeros((4, 4, 4)))

    @property
    def E(self):
        return electric_field(self.F)

    @property
    def B(self):
        return magnetic_field(self.F)


class FieldModel:
    """Base class: a field defined on (a region of) spacetime."""

    def field_at(self, x) -> FieldTensor:
        raise NotImplementedError

    def __call__(self, x) -> FieldTensor:
        return self.field_at(x)


class UniformField(FieldModel):
    """Static, spatially uniform electric and magnetic fields."""

    def __init__(self, E=(0.0, 0.0, 0.0), B=(0.0, 0.0, 0.0)):
        self.E = np.asarray(E, dtype=float).reshape(3)
        self.B = np.asarray(B, dtype=float).reshape(3)
        self._tensor = FieldTensor(field_tensor(self.E, self.B))

    def field_at(self, x):
        return self._tensor

    def __repr__(self):
        return f"UniformField(E={self.E.tolist()}, B={self.B.tolist()})"


def uniform_electric(E):
    return UniformField(E=E)


def uniform_magnetic(B):
    return UniformField(B=B)


ZERO_FIELD = UniformField()


class PlaneWave(FieldModel):
    """Linearly polarised vacuum plane wave.

    ``E = amplitude * polarization * cos(k.x - |k| t + phase)`` and
    ``B = khat x E``.  ``polarization`` must be a unit vector orthogonal to
    ``wavevector``.
    """

    def __init__(self, amplitude, wavevector, polarization, phase=0.0):
        k = np.asarray(wavevector, dtype=float).reshape(3)
        pol = np.asarray(polarization, dtype=float).reshape(3)
        knorm = np.linalg.norm(k)
        if knorm == 0.0:
            raise ValueError("wavevector must be nonzero")
        pol = pol / np.linalg.norm(pol)
        if abs(pol @ k) > 1e-12 * knorm:
            raise ValueError("polarization must be orthogonal to the wavevector")
        self.amplitude = float(amplitude)
        self.k = k
        self.omega = knorm
        self.polarization = pol
        self.phase = float(phase)
        E0 = self.amplitude * pol
        self._F0 = field_tensor(E0, np.cross(k / knorm, E0))
        # covariant wave vector: d(phase)/dx^d
        self._kcov = np.concatenate([[-self.omega], k])

    def phase_at(self, x):
        x = np.asarray(x, dtype=float)
        return self._kcov @ x + self.phase

    def field_at(self, x):
        psi = self.phase_at(x)
        F = self._F0 * np.cos(psi)
        dF = -np.sin(psi) * self._kcov[:, None, None] * self._F0[None, :, :]
        return FieldTensor(F, dF)


class SwitchedField(FieldModel):
    """``base`` multiplied by a step in coordinate time at ``t_on``.

    The delta-function derivative at the switch is not represented in ``dF``.
    """

    def __init__(self, base: FieldModel, t_on: float):
        self.base = base
        self.t_on = float(t_on)

    def field_at(self, x):
        if x[0] < self.t_on:
            return FieldTensor(np.zeros((4, 4)), np.zeros((4, 4, 4)))
        return self.base.field_at(x)


class GridElectrostatic(FieldModel):
    """Longitudinal field ``E_z(z)`` sampled on a uniform grid (a solver snapshot).

    ``z0`` is the first node, ``dz`` the spacing.  Values between nodes are
    linearly interpolated; ``dE/dz`` uses the solver's second-order central
    stencil at the nodes.  ``dEdt`` (optional) supplies ``dE_z/dt`` at the
    nodes, e.g. ``-J_z`` from the Ampere law.  Arrays are copied, so the model
    never aliases a live solver buffer.
    """

    def __init__(self, E, z0, dz, dEdt=None, periodic=True):
        self.E = np.array(E, dtype=float)
        self.n = self.E.size
        self.z0 = float(z0)
        self.dz = float(dz)
        self.periodic = periodic
        self.dEdt = np.zeros(self.n) if dEdt is None else np.array(dEdt, dtype=float)
        if periodic:
            self.dEdz = (np.roll(self.E, -1) - np.roll(self.E, 1)) / (2 * self.dz)
        else:
            self.dEdz = np.gradient(self.E, self.dz, edge_order=2)

    @property
    def length(self):
        return self.n * self.dz

    def _interp(self, arr, z):
        s = (z - self.z0) / self.dz
        if self.periodic:
            s = s % self.n
            i = int(np.floor(s))
            w = s - i
            return (1 - w) * arr[i % self.n] + w * arr[(i + 1) % self.n]
        if not (0.0 <= s <= self.n - 1):
            raise DomainError(f"z = {z:.6g} outside grid [{self.z0:.6g}, {self.z0 + (self.n - 1) * self.dz:.6g}]")
        i = min(int(np.floor(s)), self.n - 2)
        w = s - i
        return (1 - w) * arr[i] + w * arr[i + 1]

    def field_at(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise DomainError("non-finite event coordinates")
        z = x[3]
        Ez = self._interp(self.E, z)
        F = field_tensor([0.0, 0.0, Ez], [0.0, 0.0, 0.0])
        dF = np.zeros((4, 4, 4))
        dF[0, 0, 3], dF[0, 3, 0] = self._interp(self.dEdt, z), -self._interp(self.dEdt, z)
        dF[3, 0, 3], dF[3, 3, 0] = self._interp(self.dEdz, z), -self._interp(self.dEdz, z)
        return FieldTensor(F, dF)


def model_from_config(spec: dict) -> FieldModel:
    """Build an analytic model from a config mapping with a ``kind`` key."""
    kind = spec["kind"]
    if kind == "none":
        return ZERO_FIELD
    if kind == "uniform-electric":
        return uniform_electric(spec["E"])
    if kind == "uniform-magnetic":
        return uniform_magnetic(spec["B"])
    if kind == "uniform":
        return UniformField(spec.get("E", (0, 0, 0)), spec.get("B", (0, 0, 0)))
    if kind == "plane-wave":
        return PlaneWave(spec["amplitude"], spec["wavevector"], spec["polarization"], spec.get("phase", 0.0))
    raise ValueError(f"unknown field kind {kind!r}")
