"""Self-consistent 1D1V Vlasov-Maxwell solver with radiation reaction.

The reduced distribution ``g(z, v)`` (density per unit z and per unit
longitudinal velocity ``v = v_z``; the transverse profile is cold) evolves in
lab time under

    dg/dt + d/dz (g v/gamma) + d/dv (g A/gamma) = 0,

where ``A`` is the physical acceleration rebuilt every step from the current
field by the tau-recursion (order ``N`` from the parameters).  The
longitudinal field lives on cell faces and follows the Ampere law
``dE/dt = -(J + J_ext)``; it is advanced with the time-integrated face flux
of the z-advection, so the discrete Gauss law holds to roundoff.

Normalised units: lengths in c/omega_p, times in 1/omega_p.  The defaults
``q = -1, m = 1, n0 = 1`` give ``omega_p = 1`` so ``tau`` means omega_p tau.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CFLError
from .submanifold import AccelField, FieldJet, PhaseGrid, build_accel_field

G_FLOOR = 1e-300
SCHEMES = ("van-leer", "spectral")
SPLITTINGS = ("strang", "yoshida4")
_YOSHIDA = (1 / (2 - 2 ** (1 / 3)), -(2 ** (1 / 3)) / (2 - 2 ** (1 / 3)))


def _gam(v):
    """Lorentz factor of a 1D array of longitudinal velocities (elementwise)."""
    return np.sqrt(1.0 + np.asarray(v, dtype=float) ** 2)


@dataclass(frozen=True)
class PlasmaParams:
    tau: float = 0.0
    q: float = -1.0
    m: float = 1.0
    n0: float = 1.0
    order: int = 1
    scheme: str = "van-leer"  # or "spectral"
    splitting: str = "strang"  # or "yoshida4"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.splitting not in SPLITTINGS:
            raise ValueError(f"splitting must be one of {SPLITTINGS}")

    @property
    def spectral(self):
        return self.scheme == "spectral"

    @property
    def q_over_m(self):
        return self.q / self.m

    @property
    def omega_p(self):
        return math.sqrt(self.q * self.q * self.n0 / self.m)


@dataclass
class DistG:
    """Reduced distribution on the (z, v3) slice of a phase grid."""

    values: np.ndarray
    grid: PhaseGrid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.nz, self.grid.v3.size):
            raise ValueError("distribution shape does not match the grid")

    @property
    def dv(self):
        return self.grid.dv[2]

    def total_number(self):
        return float(np.sum(self.values) * self.grid.dz * self.dv)

    def density(self):
        return np.sum(self.values, axis=1) * self.dv

    def copy(self):
        return DistG(self.values.copy(), self.grid)


@dataclass
class PlasmaState:
    g: DistG
    E: np.ndarray  # E_z on faces z_j + dz/2
    t: float
    params: PlasmaParams
    A: np.ndarray | None = None  # longitudinal acceleration used by the last step
    info: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.g.grid

    def copy(self):
        return replace(self, g=self.g.copy(), E=self.E.copy(), info=dict(self.info))


# ---------------------------------------------------------------------------
# moments and field helpers
# ---------------------------------------------------------------------------

def current_moment(g: DistG, q=-1.0):
    """``J^a`` at cell centres, shape ``(nz, 4)``; only ``J^0`` and ``J^3`` are nonzero."""
    v = g.grid.v3
    J = np.zeros((g.grid.nz, 4))
    J[:, 0] = q * np.sum(g.values, axis=1) * g.dv
    J[:, 3] = q * np.sum(g.values * (v / _gam(v)), axis=1) * g.dv
    return J


def stress_moment(g: DistG, m=1.0):
    """``S^ab = m int g xdot^a xdot^b dv/gamma`` at cell centres, shape ``(nz, 4, 4)``."""
    v = g.grid.v3
    gam = _gam(v)
    u = np.zeros((v.size, 4))
    u[:, 0], u[:, 3] = gam, v
    w = g.values * (g.dv / gam)[None, :]
    return m * np.einsum("zk,ka,kb->zab", w, u, u)


def external_current(params: PlasmaParams):
    """Neutralising background ``J_ext^a = -q n0 delta^a_0``."""
    return np.array([-params.q * params.n0, 0.0, 0.0, 0.0])


def charge_density(g: DistG, params: PlasmaParams):
    return params.q * (g.density() - params.n0)


def _wavenumbers(n, length):
    k = 2 * np.pi * np.fft.rfftfreq(n, d=length / n)
    return k


def _drop_nyquist(spec, n, axis=0):
    if n % 2 == 0:
        idx = [slice(None)] * spec.ndim
        idx[axis] = -1
        spec[tuple(idx)] = 0.0
    return spec


def _spectral_apply(E, dz, factor):
    n = E.size
    k = _wavenumbers(n, n * dz)
    spec = _drop_nyquist(np.fft.rfft(E) * factor(k), n)
    return np.fft.irfft(spec, n)


def gauss_field(rho, dz, spectral=False):
    """Zero-mean face field satisfying the discrete Gauss law for ``rho`` (neutral total).

    Finite-volume form: ``(E_j - E_{j-1})/dz = rho_j``.  Spectral form:
    ``dE/dz = rho`` with Fourier derivatives, ``E`` sampled at the faces.
    """
    rho = np.asarray(rho, dtype=float)
    if spectral:
        def inv(k):
            out = np.zeros(k.size, dtype=complex)
            out[1:] = np.exp(0.5j * k[1:] * dz) / (1j * k[1:])
            return out
        return _spectral_apply(rho, dz, inv)
    E = np.cumsum(rho) * dz
    return E - E.mean()


def centre_field(E, dz=None, spectral=False):
    """Face field interpolated to cell centres."""
    if spectral:
        return _spectral_apply(E, dz, lambda k: np.exp(-0.5j * k * dz))
    return 0.5 * (E + np.roll(E, 1))


def centre_gradient(E, dz, spectral=False):
    """``dE/dz`` at cell centres from the face field."""
    if spectral:
        return _spectral_apply(E, dz, lambda k: 1j * k * np.exp(-0.5j * k * dz))
    return (E - np.roll(E, 1)) / dz


def gauss_residual(state: PlasmaState):
    rho = charge_density(state.g, state.params)
    dEdz = centre_gradient(state.E, state.grid.dz, state.params.spectral)
    return float(np.max(np.abs(dEdz - rho)))


def maxwell_step(E, J, dt, J_ext=0.0):
    """Ampere law ``dE_z/dt = -(J^3 + J^3_ext)`` over one step of length ``dt``."""
    return E - dt * (np.asarray(J) + J_ext)


# ---------------------------------------------------------------------------
# advection kernels
# ---------------------------------------------------------------------------

def _limited(d_up, d_loc):
    """van Leer limited slope (harmonic mean of same-signed differences)."""
    num = d_up * np.abs(d_loc) + np.abs(d_up) * d_loc
    den = np.abs(d_up) + np.abs(d_loc)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _face_flux(gm1, g0, g1, g2, speed, courant):
    """Limited Lax-Wendroff flux through the face between ``g0`` and ``g1``."""
    pos = speed >= 0
    d_loc = g1 - g0
    slope_p = _limited(g0 - gm1, d_loc)
    slope_m = _limited(g2 - g1, d_loc)
    c = np.abs(courant)
    upwind = np.where(pos, g0 + 0.5 * (1 - c) * slope_p, g1 - 0.5 * (1 - c) * slope_m)
    return speed * upwind


def advect_z(values, speed, dt, dz):
    """Periodic z-advection with per-row speed ``speed[v]``; returns (new values, face flux * dt).

    Face ``j`` sits between cells ``j`` and ``j+1``.
    """
    s = speed[None, :]
    courant = s * dt / dz
    flux = _face_flux(np.roll(values, 1, 0), values, np.roll(values, -1, 0), np.roll(values, -2, 0), s, courant)
    moved = flux * dt
    return values - (moved - np.roll(moved, 1, 0)) / dz, moved


def advect_v(values, face_speed, dt, dv):
    """Flux-form v-advection with speeds at the ``nv-1`` interior faces; outer faces closed.

    Returns (new values, outflow through the closed boundaries that was suppressed).
    """
    pad = np.pad(values, ((0, 0), (2, 2)))
    gm1, g0, g1, g2 = pad[:, 1:-4], pad[:, 2:-3], pad[:, 3:-2], pad[:, 4:-1]
    flux = _face_flux(gm1, g0, g1, g2, face_speed, face_speed * dt / dv)
    moved = flux * dt
    full = np.zeros((values.shape[0], values.shape[1] + 1))
    full[:, 1:-1] = moved
    out = values - (full[:, 1:] - full[:, :-1]) / dv
    return out, 0.0


def advect_z_spectral(values, speed, dt, dz):
    """Exact periodic shift of every v-row by ``speed[v] * dt`` (Fourier interpolation).

    Returns (new values, exact time-integrated flux through the faces
    ``z_j + dz/2``), so the Ampere update stays consistent with the spectral
    Gauss law.
    """
    nz = values.shape[0]
    k = _wavenumbers(nz, nz * dz)[:, None]
    G = np.fft.rfft(values, axis=0)
    phase = np.exp(-1j * k * speed[None, :] * dt)
    shifted = _drop_nyquist(G * phase, nz)
    integ = np.empty_like(G)
    integ[0] = speed * dt * G[0]
    integ[1:] = G[1:] * (1 - phase[1:]) / (1j * k[1:])
    integ = _drop_nyquist(integ * np.exp(0.5j * k * dz), nz)
    return np.fft.irfft(shifted, nz, axis=0), np.fft.irfft(integ, nz, axis=0)


def shift_v_spectral(values, shift, dv):
    """Shift each z-row along v by ``shift[z]`` (Fourier interpolation, mass exact).

    The velocity box is treated as periodic, which is harmless while the
    distribution vanishes at the edges.
    """
    nv = values.shape[1]
    kappa = _wavenumbers(nv, nv * dv)[None, :]
    G = np.fft.rfft(values, axis=1)
    G = _drop_nyquist(G * np.exp(-1j * kappa * np.asarray(shift)[:, None]), nv, axis=1)
    return np.fft.irfft(G, nv, axis=1)


def advect_v_spectral(values, speed, dt, dv):
    """``dg/dt = -d/dv (speed g)`` over ``dt`` by classical RK4 with Fourier derivatives.

    Meant for small, smooth, v-dependent speeds (given at the nodes); the
    derivative has zero mean so the particle number is exact.
    """
    nv = values.shape[1]
    ik = 1j * _wavenumbers(nv, nv * dv)[None, :]

    def rhs(g):
        spec = _drop_nyquist(np.fft.rfft(speed * g, axis=1) * ik, nv, axis=1)
        return -np.fft.irfft(spec, nv, axis=1)

    k1 = rhs(values)
    k2 = rhs(values + 0.5 * dt * k1)
    k3 = rhs(values + 0.5 * dt * k2)
    k4 = rhs(values + dt * k3)
    return values + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _semi_discrete_flux(gm1, g0, g1, g2, speed):
    pos = speed >= 0
    d_loc = g1 - g0
    upwind = np.where(pos, g0 + 0.5 * _limited(g0 - gm1, d_loc), g1 - 0.5 * _limited(g2 - g1, d_loc))
    return speed * upwind


# ---------------------------------------------------------------------------
# the coupled system
# ---------------------------------------------------------------------------

def _field_jet(state: PlasmaState, with_second=False, values=None):
    grid = state.grid
    params = state.params
    g = state.g if values is None else DistG(values, grid)
    E = state.E
    Ec = centre_field(E, grid.dz, params.spectral)
    dE_dz = centre_gradient(E, grid.dz, params.spectral)
    J = current_moment(g, params.q)[:, 3]
    dE_dt = -J
    d2E_dt2 = d2E_dtdz = None
    if with_second:
        jet0 = FieldJet.electrostatic(Ec, dE_dz, dE_dt)
        A0 = build_accel_field(grid, jet0, params.q_over_m, 0.0, 0).longitudinal()
        dg = vlasov_rhs(state, A0, values=g.values)
        v = grid.v3
        J_t = params.q * np.sum(dg * (v / _gam(v)), axis=1) * g.dv
        d2E_dt2 = -J_t
        d2E_dtdz = -(np.roll(J, -1) - np.roll(J, 1)) / (2 * grid.dz)
    return FieldJet.electrostatic(Ec, dE_dz, dE_dt, d2E_dt2, d2E_dtdz)


def reconstruct_accel(state: PlasmaState, values=None) -> AccelField:
    """Rebuild the physical acceleration from the instantaneous field (quasi-static closure).

    Time derivatives of ``E`` come from the Ampere law (and, for order 2, from
    the order-0 Vlasov flux), so radiative damping enters through
    ``dE/dt = -J``.
    """
    p = state.params
    jet = _field_jet(state, with_second=p.order >= 2 and p.tau > 0, values=values)
    return build_accel_field(state.grid, jet, p.q_over_m, p.tau, p.order if p.tau > 0 else 0)


def longitudinal_accel(state: PlasmaState, values=None):
    """``A^3`` on the (z, v) slice, shape ``(nz, nv)``.

    For order <= 1 the recursion collapses on a longitudinal field to

        A^3 = (q/m) gamma [E + tau (gamma dE/dt + v dE/dz)]

    (the two ``(q/m)^2 E^2 v`` terms cancel), which is evaluated directly.
    Order 2 goes through the general recursion.
    """
    p = state.params
    if p.order >= 2 and p.tau > 0:
        return reconstruct_accel(state, values).longitudinal()
    grid = state.grid
    gv = state.g.values if values is None else values
    E = state.E
    Ec = centre_field(E, grid.dz, p.spectral)[:, None]
    v = grid.v3[None, :]
    gam = _gam(v)
    A = Ec
    if p.tau > 0 and p.order >= 1:
        dE_dz = centre_gradient(E, grid.dz, p.spectral)[:, None]
        dE_dt = -(p.q * np.sum(gv * (grid.v3 / _gam(grid.v3)), axis=1) * grid.dv[2])[:, None]
        A = A + p.tau * (gam * dE_dt + v * dE_dz)
    return p.q_over_m * gam * A


def vlasov_rhs(state: PlasmaState, A=None, values=None):
    """Semi-discrete ``dg/dt`` (flux form, limited upwind reconstruction).

    ``A`` is the longitudinal acceleration on the (z, v) slice; it is rebuilt
    from the state when omitted.
    """
    grid = state.grid
    gv = state.g.values if values is None else values
    if A is None:
        A = longitudinal_accel(state, values=gv)
    v = grid.v3
    gam = _gam(v)
    u = v / gam
    fz = _semi_discrete_flux(np.roll(gv, 1, 0), gv, np.roll(gv, -1, 0), np.roll(gv, -2, 0), u[None, :])
    dgdt = -(fz - np.roll(fz, 1, 0)) / grid.dz
    s = A / gam[None, :]
    face = 0.5 * (s[:, 1:] + s[:, :-1])
    pad = np.pad(gv, ((0, 0), (2, 2)))
    fv = _semi_discrete_flux(pad[:, 1:-4], pad[:, 2:-3], pad[:, 3:-2], pad[:, 4:-1], face)
    full = np.zeros((gv.shape[0], gv.shape[1] + 1))
    full[:, 1:-1] = fv
    return dgdt - (full[:, 1:] - full[:, :-1]) / grid.dv[2]


def max_stable_dt(state: PlasmaState, A=None):
    grid = state.grid
    v = grid.v3
    dz_bound = grid.dz * np.min(_gam(v) / np.maximum(np.abs(v), 1e-300))
    if A is None:
        A = longitudinal_accel(state)
    amax = float(np.max(np.abs(A)))
    dv_bound = grid.dv[2] / amax if amax > 0 else np.inf
    return 0.5 * min(dz_bound, dv_bound)


def _strang(g, E, p: PlasmaParams, grid, h, t):
    """One Strang sub-step of signed length ``h``; returns (g, E, A^3 used)."""
    v = grid.v3
    gam = _gam(v)
    u = v / gam
    dv = grid.dv[2]
    sign, hh = (1.0, h) if h >= 0 else (-1.0, -h)
    zadv = advect_z_spectral if p.spectral else advect_z

    def z_half(g, E):
        g, moved = zadv(g, sign * u, 0.5 * hh, grid.dz)
        return g, maxwell_step(E, p.q * np.sum(moved, axis=1) * dv / (0.5 * hh), 0.5 * hh)

    g, E = z_half(g, E)
    mid = PlasmaState(DistG(g, grid), E, t + 0.5 * h, p)
    A = longitudinal_accel(mid)
    amax = float(np.max(np.abs(A)))
    if amax > 0 and hh > 0.5 * dv / amax:
        raise CFLError(hh, 0.5 * dv / amax)
    s = sign * A / gam[None, :]
    if p.spectral:
        # the v-independent part (q/m) E is an exact shift; the small
        # v-dependent remainder (tau terms) is integrated with Fourier derivatives
        c = sign * p.q_over_m * centre_field(E, grid.dz, True)
        g = shift_v_spectral(g, 0.5 * c * hh, dv)
        rest = s - c[:, None]
        if np.any(rest):
            g = advect_v_spectral(g, rest, hh, dv)
        g = shift_v_spectral(g, 0.5 * c * hh, dv)
    else:
        g, _ = advect_v(g, 0.5 * (s[:, 1:] + s[:, :-1]), hh, dv)
    g, E = z_half(g, E)
    return g, E, A


def step(state: PlasmaState, dt) -> PlasmaState:
    """One self-consistent step of length ``dt``.

    Strang splitting (half z-advection, full v-advection, half z-advection),
    or its symmetric 4th-order triple-jump composition when
    ``params.splitting == "yoshida4"``.  The field is advanced inside the z
    sub-steps with the time-integrated face current and the acceleration is
    rebuilt at each mid-point.  Raises :class:`CFLError` when ``dt`` exceeds
    the stability bound.
    """
    grid = state.grid
    p = state.params
    w1, w0 = _YOSHIDA
    subs = (dt,) if p.splitting == "strang" else (w1 * dt, w0 * dt, w1 * dt)
    hmax = max(abs(h) for h in subs)
    # suggestions keep a 10% margin since the mid-point acceleration differs from the current one
    bound = max_stable_dt(state)
    if hmax > bound:
        raise CFLError(dt, 0.9 * dt * bound / hmax)

    g, E, t = state.g.values, state.E, state.t
    A = None
    try:
        for h in subs:
            g, E, A = _strang(g, E, p, grid, h, t)
            t += h
    except CFLError as exc:
        raise CFLError(dt, 0.9 * dt * exc.suggested_dt / hmax) from None
    return PlasmaState(DistG(g, grid), E, state.t + dt, p, A)


# ---------------------------------------------------------------------------
# initial states and diagnostics
# ---------------------------------------------------------------------------

def tail_fraction(g: DistG, fraction=0.9):
    """Share of particles with ``|v| > fraction * v_max``."""
    v = g.grid.v3
    vmax = np.max(np.abs(v)) + 0.5 * g.dv
    tail = np.abs(v) > fraction * vmax
    return float(np.sum(g.values[:, tail]) / np.sum(g.values))


def cold_oscillation_state(grid: PhaseGrid, params: PlasmaParams, amplitude=1e-3,
                           mode=1, width_cells=3.0, drift=0.0) -> PlasmaState:
    """Quiet-start Langmuir oscillation: ``n0 (1 + amplitude cos kz)`` times a narrow Gaussian.

    The Gaussian has width ``width_cells * dv`` and is normalised discretely,
    so the plasma is exactly neutral and the field follows from Gauss's law.
    """
    v = grid.v3
    dv = grid.dv[2]
    sigma = width_cells * dv
    prof = np.exp(-0.5 * ((v - drift) / sigma) ** 2)
    prof /= prof.sum() * dv
    k = 2 * math.pi * mode / grid.length
    dens = params.n0 * (1.0 + amplitude * np.cos(k * grid.z))
    g = DistG(dens[:, None] * prof[None, :], grid)
    if tail_fraction(g) >= 1e-10:
        raise ValueError("distribution mass beyond 0.9 v_max exceeds 1e-10; enlarge v_max")
    E = gauss_field(charge_density(g, params), grid.dz, params.spectral)
    return PlasmaState(g, E, 0.0, params)


def field_energy(state: PlasmaState):
    return float(0.5 * np.sum(state.E**2) * state.grid.dz)


def kinetic_energy(state: PlasmaState):
    v = state.grid.v3
    return float(state.params.m * np.sum(state.g.values * (_gam(v) - 1.0)[None, :])
                 * state.grid.dz * state.g.dv)


def mode_amplitude(values, mode=1):
    n = values.size
    return float(2.0 * np.abs(np.fft.rfft(values)[mode]) / n)


def diagnostics(state: PlasmaState, mode=1):
    from .entropy import entropy_total

    J = current_moment(state.g, state.params.q)
    fe = field_energy(state)
    ke = kinetic_energy(state)
    return {
        "t": state.t,
        "field_energy": fe,
        "kinetic_energy": ke,
        "total_energy": fe + ke,
        "N_tot": state.g.total_number(),
        "J1_mode_amplitude": mode_amplitude(J[:, 3], mode),
        "entropy": entropy_total(state.g),
    }


def run(state: PlasmaState, dt, n_steps, every=1, callback=None, mode=1):
    """Advance ``n_steps`` steps, recording diagnostics every ``every`` steps."""
    records = [diagnostics(state, mode)]
    if callback:
        callback(records[-1])
    for i in range(1, n_steps + 1):
        state = step(state, dt)
        if i % every == 0 or i == n_steps:
            records.append(diagnostics(state, mode))
            if callback:
                callback(records[-1])
    return state, records


def peak_envelope_rate(t, y):
    """Decay rate of the envelope of an oscillating positive signal.

    Local maxima are refined by a parabola through three samples and
    ``log`` of the peak values is fitted linearly; returns ``-slope``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    idx = np.where((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]))[0] + 1
    if idx.size < 3:
        raise ValueError("need at least three peaks to fit an envelope")
    tp, yp = [], []
    h = t[1] - t[0]
    for i in idx:
        a, b, c = y[i - 1], y[i], y[i + 1]
        den = a - 2 * b + c
        off = 0.5 * (a - c) / den if den != 0 else 0.0
        tp.append(t[i] + off * h)
        yp.append(b - 0.25 * (a - c) * off)
    slope, _ = np.polyfit(tp, np.log(yp), 1)
    return float(-slope), np.array(tp), np.array(yp)
