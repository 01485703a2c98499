import math

import numpy as np
import pytest

from radkin.errors import CFLError
from radkin.submanifold import PhaseGrid
from radkin.vlasov import (
    DistG, PlasmaParams, PlasmaState, advect_v_spectral, advect_z, advect_z_spectral, centre_gradient,
    charge_density, cold_oscillation_state, current_moment, diagnostics, external_current, field_energy,
    gauss_field, gauss_residual, kinetic_energy, longitudinal_accel, maxwell_step, max_stable_dt,
    peak_envelope_rate, reconstruct_accel, run, shift_v_spectral, step, stress_moment, vlasov_rhs,
)


def peak(grid, vd=0.0, width_cells=3.0, n0=1.0):
    v = grid.v3
    prof = np.exp(-0.5 * ((v - vd) / (width_cells * grid.dv[2])) ** 2)
    prof *= n0 / (prof.sum() * grid.dv[2])
    return DistG(np.tile(prof, (grid.nz, 1)), grid)


@pytest.fixture
def grid():
    return PhaseGrid.uniform(16, 10.0, 512, 2.0)


def test_current_of_even_distribution_vanishes(grid):
    J = current_moment(peak(grid, width_cells=20), -1.0)
    assert np.max(np.abs(J[:, 3])) < 1e-15
    assert np.allclose(J[:, 0], -1.0)
    assert not np.any(J[:, 1:3])


def test_current_of_drifting_peak():
    # the peak has width 3 dv, so the error against a delta is O(dv^2): 100x smaller at 10x resolution
    vd = 0.5
    exact = -vd / math.sqrt(1 + vd * vd)
    err = [abs(current_moment(peak(PhaseGrid.uniform(8, 1.0, nv, 2.0), vd), -1.0)[0, 3] - exact)
           for nv in (512, 5120)]
    assert err[0] < 1e-3 * abs(exact)
    assert err[1] < 1.2e-2 * err[0]


def test_stress_moment_examples(grid):
    S = stress_moment(peak(grid), 2.0)
    assert S[0, 0, 0] == pytest.approx(2.0, rel=1e-3)
    assert abs(S[0, 0, 3]) < 1e-14
    np.testing.assert_allclose(S, np.transpose(S, (0, 2, 1)), atol=1e-15)
    vd = 0.5
    S = stress_moment(peak(grid, vd), 1.0)
    assert S[0, 3, 3] / S[0, 0, 0] == pytest.approx(vd * vd / (1 + vd * vd), rel=2e-3)
    assert np.all(S[:, 0, 0] >= 0)


def test_maxwell_step_examples():
    E = np.linspace(-1, 1, 8)
    np.testing.assert_array_equal(maxwell_step(E, np.full(8, 0.3), 0.1, -0.3), E)
    np.testing.assert_allclose(maxwell_step(E, np.full(8, 2.0), 0.25), E - 0.5)


def test_external_current_neutralises():
    p = PlasmaParams()
    grid = PhaseGrid.uniform(8, 1.0, 64, 2.0)
    J = current_moment(peak(grid), p.q)
    np.testing.assert_allclose(J[:, 0] + external_current(p)[0], 0.0, atol=1e-14)
    np.testing.assert_allclose(charge_density(peak(grid), p), 0.0, atol=1e-14)


@pytest.mark.parametrize("spectral", [False, True])
def test_gauss_field_inverts_gradient(spectral):
    n, L = 64, 20.0
    z = np.arange(n) * L / n
    rho = np.sin(2 * math.pi * z / L) + 0.3 * np.cos(6 * math.pi * z / L)
    E = gauss_field(rho, L / n, spectral)
    np.testing.assert_allclose(centre_gradient(E, L / n, spectral), rho, atol=1e-12)
    assert abs(E.mean()) < 1e-14


def test_vlasov_rhs_uniform_state_is_stationary():
    grid = PhaseGrid.uniform(16, 10.0, 64, 2.0)
    s = PlasmaState(peak(grid, width_cells=5), np.zeros(16), 0.0, PlasmaParams(tau=1e-3))
    assert np.max(np.abs(vlasov_rhs(s, A=np.zeros(grid.shape[::3])))) < 1e-14
    assert np.max(np.abs(vlasov_rhs(s))) < 1e-14


def test_vlasov_rhs_free_streaming():
    grid = PhaseGrid.uniform(256, 2 * math.pi, 16, 2.0)
    z = grid.z
    g = np.sin(z)[:, None] * np.ones(16)[None, :] + 2.0
    s = PlasmaState(DistG(g, grid), np.zeros(256), 0.0, PlasmaParams())
    rhs = vlasov_rhs(s, A=np.zeros((256, 16)))
    u = grid.v3 / np.sqrt(1 + grid.v3**2)
    # limited reconstruction: second order away from extrema, clipped to first order at them
    np.testing.assert_allclose(rhs, -np.cos(z)[:, None] * u[None, :], atol=5e-3)


def _wave(n):
    L = 2 * math.pi
    z = np.arange(n) * L / n
    return z, L / n, (1.5 + np.sin(z))[:, None] * np.ones(3), np.array([-0.5, 0.0, 0.5])


def test_van_leer_z_advection_telescopes():
    z, dz, g, speed = _wave(64)
    new, moved = advect_z(g, speed, 0.05, dz)
    np.testing.assert_allclose(new.sum(axis=0), g.sum(axis=0), rtol=1e-14)
    np.testing.assert_allclose(new[:, 2], 1.5 + np.sin(z - 0.025), atol=1e-3)
    np.testing.assert_allclose(new - g, -(moved - np.roll(moved, 1, 0)) / dz, atol=1e-13)


def test_spectral_z_advection_is_exact_shift():
    z, dz, g, speed = _wave(64)
    new, moved = advect_z_spectral(g, speed, 0.05, dz)
    np.testing.assert_allclose(new[:, 2], 1.5 + np.sin(z - 0.025), atol=1e-13)
    np.testing.assert_allclose(new[:, 0], 1.5 + np.sin(z + 0.025), atol=1e-13)
    # face flux is consistent with the spectral Gauss law
    for c in range(3):
        np.testing.assert_allclose(new[:, c] - g[:, c], -centre_gradient(moved[:, c], dz, True), atol=1e-13)


def test_velocity_shift_and_transport_conserve_mass():
    nv, dv = 64, 0.05
    v = (np.arange(nv) - nv / 2 + 0.5) * dv
    amp = np.array([1.0, 1.1, 0.9, 1.05])[:, None]
    g = amp * np.exp(-0.5 * (v / 0.2) ** 2)[None, :]
    shifted = shift_v_spectral(g, np.full(4, 0.1), dv)
    np.testing.assert_allclose(shifted.sum(1), g.sum(1), rtol=1e-13)
    np.testing.assert_allclose(shifted, amp * np.exp(-0.5 * ((v - 0.1) / 0.2) ** 2)[None, :], atol=1e-8)
    moved = advect_v_spectral(g, 0.01 * v[None, :] * np.ones((4, 1)), 0.1, dv)
    np.testing.assert_allclose(moved.sum(1), g.sum(1), rtol=1e-13)


def test_cold_state_is_neutral_and_satisfies_gauss():
    grid = PhaseGrid.uniform(32, 20 * math.pi, 64, 2.0)
    for scheme in ("van-leer", "spectral"):
        s = cold_oscillation_state(grid, PlasmaParams(scheme=scheme), amplitude=1e-2)
        assert gauss_residual(s) < 1e-13
        assert s.g.total_number() == pytest.approx(grid.length)


def test_cold_state_rejects_heavy_tail():
    grid = PhaseGrid.uniform(16, 10.0, 40, 0.1)
    with pytest.raises(ValueError):
        cold_oscillation_state(grid, PlasmaParams(), width_cells=10.0)


def test_cfl_violation_suggests_smaller_step():
    grid = PhaseGrid.uniform(32, 20 * math.pi, 64, 2.0)
    s = cold_oscillation_state(grid, PlasmaParams(scheme="spectral"), amplitude=1e-2)
    dt = 5.0
    for _ in range(3):  # the z bound is checked first, then the acceleration bound
        try:
            step(s, dt)
            break
        except CFLError as exc:
            assert 0 < exc.suggested_dt < dt
            dt = exc.suggested_dt
    else:
        pytest.fail("suggested steps never satisfied the CFL bound")
    assert dt < 5.0
    assert max_stable_dt(s) > 0


@pytest.mark.parametrize("scheme", ["van-leer", "spectral"])
def test_step_conserves_number_and_gauss(scheme):
    grid = PhaseGrid.uniform(32, 20 * math.pi, 64, 2.0)
    s = cold_oscillation_state(grid, PlasmaParams(tau=1e-3, scheme=scheme), amplitude=1e-2)
    n0 = s.g.total_number()
    for _ in range(20):
        s = step(s, 0.05)
    assert abs(s.g.total_number() - n0) < 1e-12 * n0
    assert gauss_residual(s) < 1e-12
    assert s.t == pytest.approx(1.0)


def test_energy_conservation_at_tau_zero_improves_with_splitting_order():
    grid = PhaseGrid.uniform(32, 20 * math.pi, 64, 2.0)
    drifts = {}
    for splitting in ("strang", "yoshida4"):
        s = cold_oscillation_state(grid, PlasmaParams(scheme="spectral", splitting=splitting), amplitude=1e-2)
        s, rec = run(s, 0.05, 60)
        tot = np.array([r["total_energy"] for r in rec])
        drifts[splitting] = np.max(np.abs(tot - tot[0])) / tot[0]
    assert drifts["yoshida4"] < drifts["strang"]
    assert drifts["yoshida4"] < 1e-6


def test_plasma_frequency_matches_linear_theory():
    # long-wavelength limit of the dispersion relation for the discrete peak: omega^2 = <gamma^-3>
    grid = PhaseGrid.uniform(32, 80 * math.pi, 64, 2.0)
    prof = peak(grid).values[0]
    omega_lin = math.sqrt(np.sum(prof / (1 + grid.v3**2) ** 1.5) * grid.dv[2])
    assert omega_lin < 0.98  # a visible relativistic shift at this resolution
    s = cold_oscillation_state(grid, PlasmaParams(scheme="spectral"), amplitude=1e-3)
    s, rec = run(s, 0.05, int(4 * 2 * math.pi / 0.05))
    t = np.array([r["t"] for r in rec])
    _, tp, _ = peak_envelope_rate(t, np.array([r["field_energy"] for r in rec]))
    omega = math.pi / np.mean(np.diff(tp))  # field energy oscillates at 2 omega
    assert omega == pytest.approx(omega_lin, rel=2e-2)


def test_radiative_damping_small_grid():
    grid = PhaseGrid.uniform(64, 80 * math.pi, 64, 2.0)
    s = cold_oscillation_state(grid, PlasmaParams(tau=1e-2, scheme="spectral"), amplitude=1e-3)
    s, rec = run(s, 0.05, int(5 * 2 * math.pi / 0.05))
    t = np.array([r["t"] for r in rec])
    rate, _, _ = peak_envelope_rate(t, np.array([r["field_energy"] for r in rec]))
    assert rate == pytest.approx(1e-2, rel=0.1)


def test_closure_order_difference_scales_as_tau_squared():
    grid = PhaseGrid.uniform(32, 20 * math.pi, 64, 2.0)
    taus = [4e-3, 2e-3, 1e-3]
    diffs = []
    for tau in taus:
        E = []
        for order in (1, 2):
            s = cold_oscillation_state(grid, PlasmaParams(tau=tau, order=order, scheme="spectral"), amplitude=1e-2)
            for _ in range(40):
                s = step(s, 0.05)
            E.append(s.E)
        diffs.append(np.max(np.abs(E[0] - E[1])))
    slope = np.polyfit(np.log(taus), np.log(diffs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


def test_fast_longitudinal_path_matches_recursion():
    grid = PhaseGrid.uniform(32, 20 * math.pi, 64, 2.0)
    s = cold_oscillation_state(grid, PlasmaParams(tau=1e-2, scheme="spectral"), amplitude=1e-2)
    s = step(s, 0.05)
    fast = longitudinal_accel(s)
    generic = reconstruct_accel(s).longitudinal()
    np.testing.assert_allclose(fast, generic, atol=1e-14 * np.abs(generic).max())


def test_diagnostics_record():
    grid = PhaseGrid.uniform(16, 20 * math.pi, 64, 2.0)
    s = cold_oscillation_state(grid, PlasmaParams(), amplitude=1e-2)
    d = diagnostics(s)
    assert set(d) == {"t", "field_energy", "kinetic_energy", "total_energy", "N_tot", "J1_mode_amplitude", "entropy"}
    assert d["total_energy"] == pytest.approx(field_energy(s) + kinetic_energy(s))


def test_peak_envelope_rate_synthetic():
    t = np.linspace(0, 60, 3001)
    y = np.exp(-0.02 * t) * np.cos(t) ** 2 + 1e-12
    rate, tp, _ = peak_envelope_rate(t, y)
    assert rate == pytest.approx(0.02, rel=1e-3)
    assert np.mean(np.diff(tp)) == pytest.approx(math.pi, rel=1e-3)
    with pytest.raises(ValueError):
        peak_envelope_rate(t[:10], y[:10])


def test_params_validation():
    with pytest.raises(ValueError):
        PlasmaParams(scheme="upwind")
    with pytest.raises(ValueError):
        PlasmaParams(splitting="lie")
    assert PlasmaParams(q=-2.0, m=4.0, n0=3.0).omega_p == pytest.approx(math.sqrt(3.0))
