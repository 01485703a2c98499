"""Linear longitudinal waves with radiation reaction.

For a homogeneous background ``g = ghat(v)`` with ``A = 0``, ``F = 0`` the
longitudinal dispersion function is

    D(omega, k) = 1 - (q^2/m) int (1 + v1^2 + v2^2) ghat
                  / [Delta (omega gamma - k v3)^2] d^3v / gamma,
    Delta = 1 + i tau (omega gamma - k v3),

and the cold background ``ghat = n0 delta(v)`` reduces ``D = 0`` to the cubic
``i tau omega^3 + omega^2 - omega_p^2 = 0``.  Its two roots near
``+-omega_p - i omega_p^2 tau / 2`` are the damped plasma waves; the third,
near ``i/tau``, grows without oscillation and has no tau -> 0 limit.

The integral is evaluated literally on the given complex ``omega``; no
analytic continuation across the real resonance is attempted.  Quadrature
nodes that come within ``eps_res`` of the resonance raise a
:class:`NearResonanceWarning`.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConvergenceError

EPS_RES = 1e-8
CONTINUATION_STEPS = 12


class NearResonanceWarning(RuntimeWarning):
    """A quadrature node sits (almost) on the resonance ``omega gamma = k v3``."""


@dataclass(frozen=True)
class Background:
    """Homogeneous equilibrium: ``cold`` (delta at rest) or a velocity density.

    For ``kind == "grid"`` the density ``density(v1, v2, v3)`` is sampled on a
    Gauss-Legendre tensor grid over ``[-box, box]^3``; ``isotropic`` marks
    densities depending on ``|v|`` only (enables the cylindrical fast path,
    with ``radial(r)`` the profile).
    """

    kind: str = "cold"
    n0: float = 1.0
    density: Callable | None = None
    box: float = 1.0
    isotropic: bool = False
    nodes: int = 64
    v_th: float | None = None

    def __post_init__(self):
        if self.kind not in ("cold", "grid"):
            raise ValueError("background kind must be 'cold' or 'grid'")
        if self.kind == "grid" and self.density is None:
            raise ValueError("grid background needs a density")
        if not self.n0 > 0:
            raise ValueError("n0 must be positive")

    @classmethod
    def cold(cls, n0=1.0):
        return cls("cold", n0)

    @classmethod
    def maxwellian(cls, v_th, n0=1.0, box_sigmas=8.0, nodes=64):
        """Non-relativistic Maxwellian in the spatial velocity, thermal speed ``v_th``."""
        norm = n0 / (2 * math.pi * v_th * v_th) ** 1.5

        def density(v1, v2, v3):
            return norm * np.exp(-0.5 * (v1 * v1 + v2 * v2 + v3 * v3) / (v_th * v_th))

        return cls("grid", n0, density, box_sigmas * v_th, True, nodes, v_th)

    def quadrature(self):
        """Nodes and weights ``(v1, v2, v3, w)`` with ``w`` including ``ghat``.

        Isotropic densities use a cylindrical rule: ``v1 = v_perp``,
        ``v2 = 0`` and weight ``2 pi v_perp`` (valid because the integrand
        depends on the transverse velocity only through ``v_perp^2``).
        """
        x, wx = leggauss(self.nodes)
        L = self.box
        if self.isotropic:
            vp = 0.5 * L * (x + 1.0)
            wp = 0.5 * L * wx * 2 * math.pi * vp
            v3 = L * x
            w3 = L * wx
            P, V3 = np.meshgrid(vp, v3, indexing="ij")
            W = np.outer(wp, w3) * self.density(P, 0.0 * P, V3)
            return P.ravel(), np.zeros(P.size), V3.ravel(), W.ravel()
        v = L * x
        w = L * wx
        V1, V2, V3 = np.meshgrid(v, v, v, indexing="ij")
        W = w[:, None, None] * w[None, :, None] * w[None, None, :] * self.density(V1, V2, V3)
        return V1.ravel(), V2.ravel(), V3.ravel(), W.ravel()

    def quadrature_n0(self):
        if self.kind == "cold":
            return self.n0
        return float(np.sum(self.quadrature()[3]))


@dataclass
class DispersionRoot:
    omega: complex
    k: float
    tau: float
    classification: str = "unclassified"
    continuation_path: list = field(default_factory=list)
    residual: float = float("nan")


def cold_residual(omega, omega_p, tau):
    return 1j * tau * omega**3 + omega**2 - omega_p**2


def _polish(omega, omega_p, tau, iters=4):
    for _ in range(iters):
        d = 3j * tau * omega**2 + 2 * omega
        if d == 0:
            break
        step = cold_residual(omega, omega_p, tau) / d
        omega = omega - step
        if abs(step) <= 1e-17 * abs(omega):
            break
    return omega


def cold_dispersion_roots(omega_p, tau, k=0.0):
    """All roots of ``i tau w^3 + w^2 - w_p^2 = 0`` (the pair ``+-w_p`` when ``tau = 0``).

    Companion-matrix eigenvalues polished by Newton on the cubic.  Roots are
    ordered: the two wave roots (``Re < 0`` first), then the runaway root.
    Returned roots are unclassified; see :func:`classify_root`.
    """
    if not omega_p > 0:
        raise ValueError("omega_p must be positive")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau == 0:
        roots = [complex(-omega_p), complex(omega_p)]
    else:
        raw = np.roots([1j * tau, 1.0, 0.0, -omega_p * omega_p])
        roots = [complex(_polish(complex(r), omega_p, tau)) for r in raw]
        runaway = max(roots, key=abs)
        roots.remove(runaway)
        roots.sort(key=lambda w: w.real)
        roots.append(runaway)
    return [DispersionRoot(w, k, tau, residual=abs(cold_residual(w, omega_p, tau))) for w in roots]


def physical_root_asymptotic(omega_p, tau, sign=1):
    """Small-tau form ``+-w_p (1 - (5/8)(w_p tau)^2) - (i/2) w_p^2 tau``."""
    return sign * omega_p * (1 - 0.625 * (omega_p * tau) ** 2) - 0.5j * omega_p**2 * tau


def runaway_root_asymptotic(tau):
    return 1j / tau


def warm_dispersion_function(omega, k, bg: Background, tau=0.0, q_over_m=-1.0, m=1.0, eps_res=EPS_RES):
    """``D(omega, k)`` for a background; the cold case uses the closed form.

    Emits :class:`NearResonanceWarning` when ``|omega gamma - k v3| < eps_res``
    at a quadrature node (the value is still returned).
    """
    omega = complex(omega)
    q2_m = q_over_m * q_over_m * m
    if bg.kind == "cold":
        if omega == 0:
            return complex(np.inf)
        # 1 + i tau w written as i tau (w - i/tau): no cancellation near the runaway pole
        delta = 1j * tau * (omega - 1j / tau) if tau > 0 else 1.0
        if delta == 0:
            return complex(np.inf)
        return 1.0 - q2_m * bg.n0 / (omega * omega * delta)
    v1, v2, v3, w = bg.quadrature()
    gam = np.sqrt(1.0 + v1 * v1 + v2 * v2 + v3 * v3)
    res = omega * gam - k * v3
    if np.any(np.abs(res) < eps_res):
        warnings.warn(f"resonant denominator within {eps_res:g} of zero at a quadrature node",
                      NearResonanceWarning, stacklevel=2)
    delta = 1.0 + 1j * tau * res
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        integrand = (1.0 + v1 * v1 + v2 * v2) * w / (delta * res * res * gam)
        return complex(1.0 - q2_m * np.sum(integrand))


def _derivative(fun, w, rel=1e-8, shrink=8.0, max_shrink=8):
    """Central difference, starting at ``h = rel |w|`` and shrinking while unstable.

    The step is reduced until two successive quotients agree to 1e-4, so a
    pole closer than ``h`` (the runaway root sits ``~tau`` from one) does not
    poison the derivative.
    """
    h = rel * max(abs(w), 1e-300)
    d = (fun(w + h) - fun(w - h)) / (2 * h)
    for _ in range(max_shrink):
        h /= shrink
        d_new = (fun(w + h) - fun(w - h)) / (2 * h)
        if np.isfinite(d_new) and np.isfinite(d) and abs(d_new - d) <= 1e-4 * abs(d_new):
            return d_new
        d = d_new
    return d


def newton_root(fun, seed, tol=1e-10, max_iter=100):
    """Damped complex Newton iteration on ``fun`` from ``seed``.

    The derivative is a central difference started at ``1e-8 |omega|``; a step
    is halved (up to 30 times) while it increases ``|fun|``.  Converged when
    ``|fun| < tol``, or when the Newton correction drops to the rounding
    resolution of ``omega`` (near the runaway pole one ulp of ``omega`` can
    move ``D`` by more than ``tol``).  Returns ``(omega, |fun(omega)|)``;
    raises :class:`ConvergenceError` carrying the last iterate.
    """
    w = complex(seed)
    f = fun(w)
    if not np.isfinite(f) and w != 0:
        # seed sits on a pole (e.g. exactly i/tau for a cold background): nudge it off
        w *= 1 + 1e-6
        f = fun(w)
    for _ in range(max_iter):
        if not np.isfinite(f):
            raise ConvergenceError("dispersion function not finite at the iterate", abs(f), w)
        if abs(f) < tol:
            return w, abs(f)
        df = _derivative(fun, w)
        if df == 0 or not np.isfinite(df):
            raise ConvergenceError("vanishing derivative", abs(f), w)
        step = f / df
        if abs(step) <= 8 * np.finfo(float).eps * abs(w):
            return w, abs(f)
        for _ in range(30):
            w_new = w - step
            f_new = fun(w_new)
            if np.isfinite(f_new) and abs(f_new) < abs(f):
                break
            step *= 0.5
        w, f = w_new, f_new
    if np.isfinite(f) and abs(f) < tol:
        return w, abs(f)
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations", abs(f), w)


def _solver(k, bg, tau, q_over_m, m):
    def fun(w):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NearResonanceWarning)
            return warm_dispersion_function(w, k, bg, tau, q_over_m, m)
    return fun


def default_seeds(omega_p, tau):
    seeds = [omega_p - 0.5j * omega_p**2 * tau, -omega_p - 0.5j * omega_p**2 * tau]
    if tau > 0:
        seeds.append(1j / tau + 1j * omega_p**2 * tau)
    return seeds


def classify_root(root: DispersionRoot, k, bg, tau, q_over_m=-1.0, m=1.0, steps=CONTINUATION_STEPS):
    """Label a root by continuing it along ``tau -> tau/2 -> ...`` (``steps`` halvings).

    physical: ``|omega|`` stays within 10x of its start and the increments
    shrink; runaway: the slope of ``log|omega|`` against ``log tau`` is within
    20% of -1; otherwise ambiguous.  ``tau = 0`` is physical by definition.
    """
    path = [(tau, complex(root.omega))]
    if tau == 0:
        root.classification = "physical"
        root.continuation_path = path
        return "physical"
    w, t = complex(root.omega), tau
    for _ in range(steps):
        t_new = 0.5 * t
        fun = _solver(k, bg, t_new, q_over_m, m)
        best = None
        for seed in (w, w * (t / t_new)):
            try:
                cand, _ = newton_root(fun, seed)
            except ConvergenceError:
                continue
            dist = abs(cand - seed) / abs(seed)
            if best is None or dist < best[0]:
                best = (dist, cand)
        if best is None:
            break
        w, t = best[1], t_new
        path.append((t, w))
    root.continuation_path = path
    mags = np.array([abs(p[1]) for p in path])
    taus = np.array([p[0] for p in path])
    label = "ambiguous"
    if len(path) >= 3:
        slope = np.polyfit(np.log(taus), np.log(mags), 1)[0]
        incs = np.abs(np.diff([p[1] for p in path]))
        bounded = np.all(mags <= 10 * mags[0])
        converging = incs[-1] < incs[0] or incs[-1] <= 1e-12 * mags[-1]
        if abs(slope + 1.0) <= 0.2:
            label = "runaway"
        elif bounded and converging:
            label = "physical"
    root.classification = label
    return label


def find_roots(k, bg: Background, tau, seeds=None, q_over_m=-1.0, m=1.0, classify=True):
    """Newton roots of ``D(omega, k)`` from each seed, classified by tau-continuation.

    Seeds default to ``+-omega_p - i omega_p^2 tau / 2`` and ``i/tau + i omega_p^2 tau``.
    Raises :class:`ConvergenceError` (with the last iterate) for a seed that
    fails to converge.
    """
    omega_p = math.sqrt(q_over_m * q_over_m * m * bg.quadrature_n0() / m)
    if seeds is None:
        seeds = default_seeds(omega_p, tau)
    fun = _solver(k, bg, tau, q_over_m, m)
    out = []
    for s in seeds:
        w, res = newton_root(fun, s)
        root = DispersionRoot(w, k, tau, residual=res)
        if classify:
            classify_root(root, k, bg, tau, q_over_m, m)
        out.append(root)
    return out


SCAN_COLUMNS = ("k", "tau", "re_omega", "im_omega", "classification", "residual")


def write_scan_csv(path, roots):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(SCAN_COLUMNS)
        for r in roots:
            wr.writerow([repr(float(r.k)), repr(float(r.tau)), repr(r.omega.real), repr(r.omega.imag),
                         r.classification, repr(float(r.residual))])


def scan(ks, taus, bg: Background, q_over_m=-1.0, m=1.0, classify=True):
    """Roots over a (k, tau) grid; seeds at each point are the defaults."""
    out = []
    for tau in taus:
        for k in ks:
            out.extend(find_roots(k, bg, tau, q_over_m=q_over_m, m=m, classify=classify))
    return out
