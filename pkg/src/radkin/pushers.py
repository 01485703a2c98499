"""Single-particle integrators for radiating charges.

Four equations of motion are available, all parametrised by proper time
``lambda`` and written in reduced coordinates ``(x, v, a)``:

* ``lorentz-dirac``: the third-order flow on ``(x, v, a)``.  Generic initial
  accelerations run away as ``exp(lambda/tau)``; integrations are expected to
  blow up and are kept short on purpose.
* ``landau-lifshitz``: second order in ``(x, v)``, first order in ``tau``.
* ``dirac-asymptotic``: the integro-differential form in which the
  acceleration is an exponentially weighted average of the future force,
  solved by relaxed Picard iteration over the whole history.
* ``tau-series``: the physical-submanifold acceleration expanded to order
  ``N`` in ``tau`` and evaluated pointwise along the characteristic.

``tau`` and ``q_over_m`` are independent inputs so that tau-scans are
possible; :func:`electron_tau` gives the physical tie when wanted.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_laguerre

from .errors import ConvergenceError, IntegrationError
from .fields import FieldModel, FieldTensor, UniformField, mixed
from .kinematics import (
    ReducedState,
    constraint_residuals,
    gamma,
    lift_acceleration,
    lift_velocity,
    minkowski_dot,
    orthogonal_projection,
)

METHODS = ("lorentz-dirac", "landau-lifshitz", "dirac-asymptotic", "tau-series")


def electron_tau(q, m):
    """Characteristic radiation time ``q^2 / (6 pi m)`` (Heaviside-Lorentz, c = 1)."""
    return q * q / (6.0 * math.pi * m)


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------

def lorentz_accel(v, F, q_over_m):
    """Spatial part of ``-(q/m) F^mu_a xdot^a``: the Lorentz-force acceleration."""
    u = lift_velocity(v)
    return -q_over_m * np.einsum("...ab,...b->...a", mixed(F), u)[..., 1:]


def ld_rhs(state: ReducedState, F: FieldTensor, tau, q_over_m):
    """Components of the Liouville field of the Lorentz-Dirac flow at ``state``.

    Returns ``(dx, dv, da)`` where ``dx = xdot``, ``dv = a`` and
    ``da = (xddot.xddot) v + (a + (q/m) F^mu_a xdot^a) / tau``.
    """
    v, a = state.v, state.a
    u = lift_velocity(v)
    acc = lift_acceleration(v, a)
    force = q_over_m * (mixed(F.F) @ u)[1:]
    da = minkowski_dot(acc, acc) * v + (a + force) / tau
    return u, a.copy(), da


def ll_accel(v, F: FieldTensor, tau, q_over_m):
    """Spatial acceleration from the Landau-Lifshitz equation."""
    u = lift_velocity(v)
    Fm = mixed(F.F)
    dFm = mixed(F.dF)
    lorentz = Fm @ u
    gradient = np.einsum("dab,b,d->a", dFm, u, u)
    ff = orthogonal_projection(u, Fm @ (Fm @ u))
    acc = -q_over_m * lorentz - q_over_m * tau * (gradient - q_over_m * ff)
    return acc[1:]


def _order0(x, v, model, q_over_m):
    return lorentz_accel(v, model.field_at(x).F, q_over_m)


def _order1(x, v, model, q_over_m):
    ft = model.field_at(x)
    u = lift_velocity(v)
    Fm = mixed(ft.F)
    A0 = -q_over_m * (Fm @ u)[1:]
    A0_4 = lift_acceleration(v, A0)
    convective = -q_over_m * np.einsum("dab,b,d->a", mixed(ft.dF), u, u)[1:]
    transport = -q_over_m * (Fm @ A0_4)[1:]
    return convective + transport - v * minkowski_dot(A0_4, A0_4)


def tau_series_orders(x, v, model: FieldModel, N, q_over_m, h=1e-5):
    """Orders ``A_(0) .. A_(N)`` of the submanifold acceleration at one phase point.

    The field is treated as external, so only ``F_(0)`` is nonzero.  Orders 0
    and 1 are closed-form in ``F`` and ``dF``; order 2 differentiates order 1
    by central differences of step ``h`` (relative to the coordinate scale).
    """
    if N not in (0, 1, 2):
        raise ValueError("tau-series order must be 0, 1 or 2")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    orders = [_order0(x, v, model, q_over_m)]
    if N >= 1:
        orders.append(_order1(x, v, model, q_over_m))
    if N >= 2:
        A0, A1 = orders
        u = lift_velocity(v)
        Fm = mixed(model.field_at(x).F)
        dA1_dx = np.empty((4, 3))
        for d in range(4):
            step = h * max(1.0, abs(x[d]))
            e = np.zeros(4)
            e[d] = step
            dA1_dx[d] = (_order1(x + e, v, model, q_over_m) - _order1(x - e, v, model, q_over_m)) / (2 * step)
        dA1_dv = np.empty((3, 3))
        for nu in range(3):
            step = h * max(1.0, abs(v[nu]))
            e = np.zeros(3)
            e[nu] = step
            dA1_dv[nu] = (_order1(x, v + e, model, q_over_m) - _order1(x, v - e, model, q_over_m)) / (2 * step)
        A0_4 = lift_acceleration(v, A0)
        A1_4 = lift_acceleration(v, A1)
        A2 = (u @ dA1_dx + A0 @ dA1_dv - q_over_m * (Fm @ A1_4)[1:]
              - 2.0 * v * minkowski_dot(A0_4, A1_4))
        orders.append(A2)
    return orders


def tau_series_accel(x, v, model: FieldModel, N, tau, q_over_m):
    """Truncated series ``sum_{n<=N} tau^n A_(n)`` at one phase point."""
    orders = tau_series_orders(x, v, model, N, q_over_m)
    return sum(tau**n * A for n, A in enumerate(orders))


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class PusherConfig:
    method: str = "lorentz-dirac"
    step: float = 1e-3
    tolerance: float = 1e-10
    horizon: float | None = None
    max_picard_iters: int = 200
    order: int = 1
    relaxation: float = 0.5
    quadrature: str = "laguerre"
    quadrature_nodes: int = 32

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.quadrature not in ("laguerre", "exponential"):
            raise ValueError("quadrature must be 'laguerre' or 'exponential'")
        if not 0.0 < self.relaxation <= 1.0:
            raise ValueError("relaxation must lie in (0, 1]")


@dataclass
class Trajectory:
    lam: np.ndarray
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray
    tau: float
    q_over_m: float
    method: str = ""
    info: dict = field(default_factory=dict)

    def __len__(self):
        return self.lam.size

    @property
    def xdot(self):
        return lift_velocity(self.v)

    @property
    def xddot(self):
        return lift_acceleration(self.v, self.a)

    def residuals(self):
        return constraint_residuals(self.xdot, self.xddot)

    def max_residual(self):
        phi1, phi2 = self.residuals()
        return float(max(np.max(np.abs(phi1)), np.max(np.abs(phi2))))

    def proper_acceleration(self):
        acc = self.xddot
        return np.sqrt(np.maximum(minkowski_dot(acc, acc), 0.0))

    def state(self, i) -> ReducedState:
        return ReducedState(self.x[i], self.v[i], self.a[i])

    def to_csv(self, path):
        """Write columns lambda, x0..x3, v1..v3, a1..a3, phi1, phi2."""
        phi1, phi2 = self.residuals()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "x0", "x1", "x2", "x3", "v1", "v2", "v3", "a1", "a2", "a3", "phi1", "phi2"])
            for i in range(len(self)):
                row = [self.lam[i], *self.x[i], *self.v[i], *self.a[i], phi1[i], phi2[i]]
                w.writerow([repr(float(r)) for r in row])


def _rk4_step(f, lam, y, h):
    k1 = f(lam, y)
    k2 = f(lam + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(lam + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(lam + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate(f, y0, lambda_end, step, check):
    n = max(1, int(math.ceil(lambda_end / step - 1e-9)))
    h = lambda_end / n
    ys = np.empty((n + 1, y0.size))
    ys[0] = y0
    lam = np.linspace(0.0, lambda_end, n + 1)
    for i in range(n):
        with np.errstate(over="ignore", invalid="ignore"):
            y = _rk4_step(f, lam[i], ys[i], h)
        if not np.all(np.isfinite(y)) or not check(y):
            raise IntegrationError("integration became unstable", lam[i])
        ys[i + 1] = y
    return lam, ys


def _residual_ok(v, a, tol):
    phi1, phi2 = constraint_residuals(lift_velocity(v), lift_acceleration(v, a))
    g = gamma(v)
    scale2 = g * (np.linalg.norm(a) + 1.0)
    return abs(phi1) <= tol * 1e3 * g * g and abs(phi2) <= tol * 1e3 * scale2


def _as_xv(init):
    if isinstance(init, ReducedState):
        return init.x.copy(), init.v.copy()
    x, v = init[:2]
    return np.asarray(x, dtype=float).reshape(4), np.asarray(v, dtype=float).reshape(3)


def push_lorentz_dirac(init: ReducedState, model: FieldModel, cfg: PusherConfig, lambda_end, *, tau, q_over_m):
    """Integrate the full Lorentz-Dirac flow with classical RK4.

    With ``tau == 0`` the acceleration is slaved to the Lorentz force and the
    motion reduces to ordinary Lorentz-force dynamics.
    """
    if tau == 0:
        def f0(lam, y):
            x, v = y[:4], y[4:7]
            return np.concatenate([lift_velocity(v), lorentz_accel(v, model.field_at(x).F, q_over_m)])

        y0 = np.concatenate([init.x, init.v])
        lam, ys = _integrate(f0, y0, lambda_end, cfg.step, lambda y: True)
        a = np.array([lorentz_accel(y[4:7], model.field_at(y[:4]).F, q_over_m) for y in ys])
        return Trajectory(lam, ys[:, :4], ys[:, 4:7], a, 0.0, q_over_m, "lorentz-dirac")

    def f(lam, y):
        s = ReducedState.from_array(y)
        dx, dv, da = ld_rhs(s, model.field_at(s.x), tau, q_over_m)
        return np.concatenate([dx, dv, da])

    lam, ys = _integrate(f, init.as_array(), lambda_end, cfg.step,
                         lambda y: _residual_ok(y[4:7], y[7:10], cfg.tolerance))
    return Trajectory(lam, ys[:, :4], ys[:, 4:7], ys[:, 7:10], tau, q_over_m, "lorentz-dirac")


def _push_second_order(accel, init, cfg, lambda_end, tau, q_over_m, method, model):
    x0, v0 = _as_xv(init)

    def f(lam, y):
        x, v = y[:4], y[4:]
        return np.concatenate([lift_velocity(v), accel(x, v)])

    lam, ys = _integrate(f, np.concatenate([x0, v0]), lambda_end, cfg.step, lambda y: True)
    a = np.array([accel(y[:4], y[4:]) for y in ys])
    return Trajectory(lam, ys[:, :4], ys[:, 4:], a, tau, q_over_m, method)


def push_landau_lifshitz(init, model: FieldModel, cfg: PusherConfig, lambda_end, *, tau, q_over_m):
    """Integrate the Landau-Lifshitz equation; the recorded ``a`` is the RHS value."""
    return _push_second_order(lambda x, v: ll_accel(v, model.field_at(x), tau, q_over_m),
                              init, cfg, lambda_end, tau, q_over_m, "landau-lifshitz", model)


def push_tau_series(init, model: FieldModel, N, cfg: PusherConfig, lambda_end, *, tau, q_over_m):
    """Integrate ``dv/dlambda = sum_{n<=N} tau^n A_(n)`` along one characteristic."""
    if N not in (0, 1, 2):
        raise ValueError("tau-series order must be 0, 1 or 2")
    return _push_second_order(lambda x, v: tau_series_accel(x, v, model, N, tau, q_over_m),
                              init, cfg, lambda_end, tau, q_over_m, f"tau-series({N})", model)


def _fields_along(model, xs):
    if isinstance(model, UniformField):
        return np.broadcast_to(model.field_at(None).F, (len(xs), 4, 4))
    return np.array([model.field_at(x).F for x in xs])


def _exponential_average(lam, K, tau):
    """``int_0^inf K(lam + alpha tau) e^-alpha d alpha`` for piecewise-linear K, K frozen past the end."""
    h = np.diff(lam)
    r = h / tau
    E = np.exp(-r)
    # weights on K_i and K_{i+1} over one cell
    w_right = (1.0 - E - r * E) / r
    w_left = (1.0 - E) - w_right
    out = np.empty_like(K)
    out[-1] = K[-1]
    for i in range(len(lam) - 2, -1, -1):
        out[i] = E[i] * out[i + 1] + w_left[i] * K[i] + w_right[i] * K[i + 1]
    return out


def push_dirac_asymptotic(init, model: FieldModel, cfg: PusherConfig, lambda_end, *, tau, q_over_m):
    """Solve the runaway-free integro-differential equation by Picard iteration.

    The acceleration history on ``[0, lambda_end + horizon]`` is iterated as

        a <- (1 - theta) a + theta * int_0^inf K(lambda + alpha tau) e^-alpha d alpha,
        K = -(q/m) F^mu_b xdot^b - tau (xddot.xddot) xdot^mu,

    with positions and velocities re-integrated from ``a`` each sweep (cubic
    spline antiderivatives).  The exponential average uses Gauss-Laguerre
    nodes on a cubic interpolant of ``K`` (``quadrature="laguerre"``) or the
    exact average of the piecewise-linear interpolant (``"exponential"``,
    robust for discontinuous switch-on profiles).  Beyond the horizon ``K`` is
    frozen at its last value.
    """
    if tau <= 0:
        raise ValueError("dirac-asymptotic requires tau > 0")
    horizon = 10.0 * tau if cfg.horizon is None else cfg.horizon
    if horizon < 5.0 * tau:
        raise ValueError("horizon must be at least 5 tau")
    x0, v0 = _as_xv(init)
    # lambda_end must be a grid node so samples line up with the other pushers
    n_run = max(1, int(math.ceil(lambda_end / cfg.step - 1e-9)))
    h = lambda_end / n_run
    n = n_run + max(3, int(math.ceil(horizon / h - 1e-9)))
    span = n * h
    lam = np.linspace(0.0, span, n + 1)

    guess = push_landau_lifshitz((x0, v0), model, PusherConfig("landau-lifshitz", step=h), span,
                                 tau=tau, q_over_m=q_over_m)
    a = guess.a.copy()
    alpha, weights = roots_laguerre(cfg.quadrature_nodes)
    theta = cfg.relaxation

    def kinematics_from(a):
        v = v0 + CubicSpline(lam, a, axis=0).antiderivative()(lam)
        u = lift_velocity(v)
        x = x0 + CubicSpline(lam, u, axis=0).antiderivative()(lam)
        return x, v

    residual = np.inf
    for it in range(1, cfg.max_picard_iters + 1):
        x, v = kinematics_from(a)
        u = lift_velocity(v)
        acc = lift_acceleration(v, a)
        Fm = mixed(_fields_along(model, x))
        K = -q_over_m * np.einsum("nab,nb->na", Fm, u)[:, 1:] - tau * minkowski_dot(acc, acc)[:, None] * v
        if cfg.quadrature == "laguerre":
            spline = CubicSpline(lam, K, axis=0)
            pts = lam[:, None] + tau * alpha[None, :]
            inside = pts <= lam[-1]
            vals = np.where(inside[..., None], spline(np.minimum(pts, lam[-1])), K[-1])
            update = np.einsum("nkc,k->nc", vals, weights)
        else:
            update = _exponential_average(lam, K, tau)
        new = (1.0 - theta) * a + theta * update
        residual = float(np.max(np.abs(new - a)))
        a = new
        if not np.all(np.isfinite(a)):
            break
        if residual < cfg.tolerance:
            break
    else:
        raise ConvergenceError(f"Picard iteration did not converge in {cfg.max_picard_iters} sweeps", residual)
    if not np.isfinite(residual):
        raise ConvergenceError("Picard iteration diverged", residual)

    x, v = kinematics_from(a)
    keep = lam <= lambda_end + 1e-12
    return Trajectory(lam[keep], x[keep], v[keep], a[keep], tau, q_over_m, "dirac-asymptotic",
                      info={"picard_iterations": it, "picard_residual": residual})


def push(init, model, cfg: PusherConfig, lambda_end, *, tau, q_over_m):
    """Dispatch on ``cfg.method``."""
    if cfg.method == "lorentz-dirac":
        if not isinstance(init, ReducedState):
            x0, v0 = _as_xv(init)
            init = ReducedState(x0, v0, lorentz_accel(v0, model.field_at(x0).F, q_over_m))
        return push_lorentz_dirac(init, model, cfg, lambda_end, tau=tau, q_over_m=q_over_m)
    if cfg.method == "landau-lifshitz":
        return push_landau_lifshitz(init, model, cfg, lambda_end, tau=tau, q_over_m=q_over_m)
    if cfg.method == "dirac-asymptotic":
        return push_dirac_asymptotic(init, model, cfg, lambda_end, tau=tau, q_over_m=q_over_m)
    return push_tau_series(init, model, cfg.order, cfg, lambda_end, tau=tau, q_over_m=q_over_m)


def fit_exponential_rate(lam, y):
    """Least-squares slope of ``log y`` against ``lam``."""
    lam = np.asarray(lam, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = y > 0
    slope, _ = np.polyfit(lam[mask], np.log(y[mask]), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# phase-space contraction
# ---------------------------------------------------------------------------

def liouville_field(point, model: FieldModel, tau, q_over_m):
    """The 10 components of the Lorentz-Dirac Liouville field at ``(x, v, a)``."""
    s = ReducedState.from_array(point)
    dx, dv, da = ld_rhs(s, model.field_at(s.x), tau, q_over_m)
    return np.concatenate([dx, dv, da])


def leray_divergence(point, model: FieldModel, tau, q_over_m, h=1e-4):
    """Divergence of the Liouville field with respect to the Leray measure.

    Computes ``rho^-1 sum_i d_i(rho L^i)`` with ``rho = 1/(1+|v|^2)`` by
    central differences of step ``h`` in all ten coordinates.  The exact
    value is ``3/tau`` everywhere.
    """
    point = np.asarray(point, dtype=float)

    def weighted(p):
        return liouville_field(p, model, tau, q_over_m) / (1.0 + p[4:7] @ p[4:7])

    total = 0.0
    for i in range(10):
        e = np.zeros(10)
        e[i] = h
        total += (weighted(point + e)[i] - weighted(point - e)[i]) / (2 * h)
    return total * (1.0 + point[4:7] @ point[4:7])
