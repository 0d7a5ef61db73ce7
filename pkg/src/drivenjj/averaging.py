"""First-order averaged model of an (n:m) resonance.

In the frame co-rotating at (m/n) nu_d_tilde, the slow dynamics of the
amplitude R and phase theta (u = R sin theta, v = R cos theta) are

    d theta / ds = delta + beta_tilde * g(theta, R, xi_d) / R
    d R     / ds = -kappa * R + beta_tilde * h(theta, R, xi_d)

where g and h are double Bessel series. The model carries no drive
frequency: delta enters as an external parameter, and equilibria are
located by one-dimensional root-finding in theta at fixed R, after which
delta follows forwardly from the theta equation.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import j0, jv

from .errors import MarginalStability, NoRoot
from .params import ResonanceLabel

#: extra series orders beyond the Bessel turning point
BESSEL_CUTOFF_MARGIN = 20
#: theta sample count per fundamental sector for sign-change detection
THETA_GRID = 1440
#: below this radius the polar parameterization is bypassed
SMALL_RADIUS = 1e-8


class Stability(enum.Enum):
    NODE = "node"
    SADDLE = "saddle"


@dataclass(frozen=True)
class AveragedModel:
    """Averaged (n:m) model parameters; K limits the Bessel series."""

    label: ResonanceLabel
    beta_tilde: float
    kappa: float
    xi_d: float
    bessel_cutoff: int | None = None

    def cutoff_for(self, r_max: float) -> int:
        if self.bessel_cutoff is not None:
            return self.bessel_cutoff
        return int(math.ceil(abs(r_max) + abs(self.xi_d))) + BESSEL_CUTOFF_MARGIN


@dataclass
class Equilibrium:
    """A rotating-frame fixed point with its linear stability data."""

    theta_star: float
    r_star: float
    delta: float
    stability: Stability
    eigenvalues: np.ndarray


@dataclass
class BifurcationScan:
    """Equilibrium branches over a radius grid at fixed (beta_tilde, kappa, xi_d)."""

    r_grid: np.ndarray
    branches: list
    extremal_deltas: tuple


def _series_terms(r, xi_d, label: ResonanceLabel, k_cut: int):
    """Products J_{1+ak}(R) * J_{-bk}(xi_d) for k = -K..K, with a=(1+r)n, b=(1+r)m."""
    a = label.legs
    b = (1 + label.r) * label.m
    ks = np.arange(-k_cut, k_cut + 1)
    rad = jv(1 + a * ks[:, None], np.atleast_1d(r)[None, :])
    drv = jv(-b * ks, xi_d)
    return ks, a, rad * drv[:, None]


def g_func(theta, r, xi_d, label: ResonanceLabel, k_cut: int | None = None):
    """Phase component of the averaged Josephson term (series form)."""
    g, _ = g_and_h(theta, r, xi_d, label, k_cut)
    return g


def h_func(theta, r, xi_d, label: ResonanceLabel, k_cut: int | None = None):
    """Radial component of the averaged Josephson term (series form)."""
    _, h = g_and_h(theta, r, xi_d, label, k_cut)
    return h


def g_and_h(theta, r, xi_d, label: ResonanceLabel, k_cut: int | None = None):
    """Evaluate both series at once (they share all Bessel products)."""
    scalar_in = np.ndim(theta) == 0 and np.ndim(r) == 0
    theta_arr, r_arr = np.broadcast_arrays(
        np.asarray(theta, dtype=float), np.asarray(r, dtype=float)
    )
    shape = theta_arr.shape
    th = np.atleast_1d(theta_arr).ravel()
    rv = np.atleast_1d(r_arr).ravel()
    if k_cut is None:
        k_cut = int(math.ceil(float(np.abs(rv).max()) + abs(xi_d))) + BESSEL_CUTOFF_MARGIN
    ks, a, prod = _series_terms(rv, xi_d, label, k_cut)
    phase = a * np.outer(ks, th)
    g = np.sum(np.cos(phase) * prod, axis=0)
    h = -np.sum(np.sin(phase) * prod, axis=0)
    if scalar_in:
        return float(g[0]), float(h[0])
    return g.reshape(shape), h.reshape(shape)


def averaged_vector_field(u, v, delta: float, model: AveragedModel):
    """Cartesian averaged field (du/ds, dv/ds) in the rotating frame.

    Near the origin the polar angle is ill-defined; the field there reduces
    to a damped rotation at the AC-Stark-shifted rate.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    radius = np.hypot(u, v)
    scalar = radius.ndim == 0
    u, v, radius = np.atleast_1d(u, v, radius)
    du = np.empty_like(u)
    dv = np.empty_like(v)
    small = radius < SMALL_RADIUS
    if np.any(small):
        omega = delta + 0.5 * model.beta_tilde * j0(model.xi_d)
        du[small] = -model.kappa * u[small] + omega * v[small]
        dv[small] = -model.kappa * v[small] - omega * u[small]
    if np.any(~small):
        us, vs, rs = u[~small], v[~small], radius[~small]
        theta = np.arctan2(us, vs)
        g, h = g_and_h(theta, rs, model.xi_d, model.label, model.bessel_cutoff)
        rdot = -model.kappa * rs + model.beta_tilde * h
        thdot = delta + model.beta_tilde * g / rs
        du[~small] = rdot * np.sin(theta) + rs * thdot * np.cos(theta)
        dv[~small] = rdot * np.cos(theta) - rs * thdot * np.sin(theta)
    if scalar:
        return float(du[0]), float(dv[0])
    return du, dv


def sector_angle(label: ResonanceLabel) -> float:
    """Angular width 2 pi / ((1+r) n) of the fundamental symmetry sector."""
    return 2.0 * math.pi / label.legs


def equilibria_at_radius(
    r_star: float,
    model: AveragedModel,
    delta_tol: float = 1e-12,
    theta_grid: int = THETA_GRID,
) -> list[tuple[float, float]]:
    """Angles theta* with dR/ds = 0 at the given radius, and their deltas.

    Scans the fundamental sector only (rotational symmetry restores the
    rest), refines sign changes by bisection, and computes the unique
    detuning delta = -beta_tilde g / R that makes each root a fixed point.
    An empty list simply means no equilibria exist at this radius.
    """
    if r_star <= 0:
        raise ValueError("r_star must be > 0")
    sector = sector_angle(model.label)
    k_cut = model.cutoff_for(r_star)

    def rdot(theta):
        _, h = g_and_h(theta, r_star, model.xi_d, model.label, k_cut)
        return -model.kappa * r_star + model.beta_tilde * h

    thetas = np.linspace(0.0, sector, theta_grid, endpoint=False)
    _, h_grid = g_and_h(thetas, r_star, model.xi_d, model.label, k_cut)
    vals = -model.kappa * r_star + model.beta_tilde * h_grid
    roots = []
    for i in range(theta_grid):
        j = (i + 1) % theta_grid
        a, b = vals[i], vals[j]
        t_hi = thetas[j] if j != 0 else sector
        if a == 0.0:
            roots.append(thetas[i])
        elif a * b < 0.0:
            roots.append(brentq(rdot, thetas[i], t_hi, xtol=1e-15, rtol=8.9e-16))
    out = []
    for theta in roots:
        if abs(rdot(theta)) > max(delta_tol, 1e-12 * model.beta_tilde):
            continue
        g, _ = g_and_h(theta, r_star, model.xi_d, model.label, k_cut)
        out.append((float(theta % sector), float(-model.beta_tilde * g / r_star)))
    return out


def _stability_integrals(theta_star, r_star, model: AveragedModel, rel_tol=1e-9):
    """Period averages of cos(zeta) weighted by the rotating-frame trig factors.

    The integrand is smooth and periodic, so a uniform trapezoid rule with
    panel doubling converges spectrally.
    """
    n, m = model.label.n, model.label.m
    u_star = r_star * math.sin(theta_star)
    v_star = r_star * math.cos(theta_star)

    def averages(num):
        sigma = np.linspace(0.0, 2.0 * math.pi * n, num, endpoint=False)
        w = (m / n) * sigma
        zeta = u_star * np.cos(w) + v_star * np.sin(w) + model.xi_d * np.sin(sigma)
        cz = np.cos(zeta)
        sin_w, cos_w = np.sin(w), np.cos(w)
        return np.array([
            np.mean(sin_w * cos_w * cz),
            np.mean(sin_w**2 * cz),
            np.mean(cos_w**2 * cz),
        ])

    num = 512
    prev = averages(num)
    for _ in range(12):
        num *= 2
        cur = averages(num)
        if np.max(np.abs(cur - prev)) <= rel_tol * max(1.0, float(np.max(np.abs(cur)))):
            return cur
        prev = cur
    return cur


def stability_matrix(theta_star, r_star, delta, model: AveragedModel) -> np.ndarray:
    """Jacobian of the averaged Cartesian field at the equilibrium."""
    i_sc, i_ss, i_cc = _stability_integrals(theta_star, r_star, model)
    bt = model.beta_tilde
    return np.array([
        [-model.kappa + bt * i_sc, delta + bt * i_ss],
        [-delta - bt * i_cc, -model.kappa - bt * i_sc],
    ])


def classify_stability(
    theta_star: float,
    r_star: float,
    delta: float,
    model: AveragedModel,
    margin: float = 1e-8,
) -> Equilibrium:
    """Stability type of an equilibrium from its linearization.

    The eigenvalues are -kappa +/- chi; a real chi crossing kappa is the
    saddle-node transition, where classification is refused. Purely
    imaginary chi gives a node (a center in the Hamiltonian limit).
    """
    a_mat = stability_matrix(theta_star, r_star, delta, model)
    eigs = np.linalg.eigvals(a_mat)
    chi = 0.5 * abs(eigs[0] - eigs[1])
    if abs(eigs[0].imag) < 1e-14 * max(1.0, abs(eigs[0])):
        # real pair: node if both below zero, saddle if they straddle it
        if abs(chi - model.kappa) <= margin:
            raise MarginalStability(
                f"equilibrium at (theta={theta_star:.6f}, R={r_star:.6f}) "
                f"sits on a saddle-node point"
            )
        stability = Stability.SADDLE if chi > model.kappa else Stability.NODE
    else:
        stability = Stability.NODE
    return Equilibrium(
        theta_star=float(theta_star),
        r_star=float(r_star),
        delta=float(delta),
        stability=stability,
        eigenvalues=eigs,
    )


def is_degenerate_circle(model: AveragedModel) -> bool:
    """True when every angle is radially neutral (xi_d = 0, kappa = 0)."""
    return model.xi_d == 0.0 and model.kappa == 0.0


def bifurcation_scan(model: AveragedModel, r_grid) -> BifurcationScan:
    """Equilibrium branches over a radius grid.

    Local extrema of delta along a branch are saddle-node points; the
    extremal deltas over the stable nodes bound the resonance region at
    this drive amplitude.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(np.diff(r_grid) <= 0):
        raise ValueError("r_grid must be strictly increasing")
    branches = []
    for r_star in r_grid:
        if r_star <= 0:
            continue
        for theta_star, delta in equilibria_at_radius(r_star, model):
            try:
                branches.append(classify_stability(theta_star, r_star, delta, model))
            except MarginalStability:
                continue
    node_deltas = [b.delta for b in branches if b.stability is Stability.NODE]
    extremal = (min(node_deltas), max(node_deltas)) if node_deltas else (math.nan, math.nan)
    return BifurcationScan(r_grid=r_grid, branches=branches, extremal_deltas=extremal)


def resonance_region(
    model: AveragedModel,
    xi_grid,
    r_grid=None,
) -> list[tuple[float, float, float]]:
    """Extremal detunings admitting stable nodes, per drive amplitude.

    Returns (xi_d, delta_min, delta_max) triples; the equivalent drive
    frequencies follow from nu_d = (n/m)(1 - delta).
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    if np.any(np.diff(xi_grid) < 0):
        raise ValueError("xi_grid must be increasing")
    if r_grid is None:
        r_grid = np.linspace(0.05, 12.0, 240)
    out = []
    for xi in xi_grid:
        scan = bifurcation_scan(
            AveragedModel(model.label, model.beta_tilde, model.kappa, float(xi),
                          model.bessel_cutoff),
            r_grid,
        )
        out.append((float(xi), scan.extremal_deltas[0], scan.extremal_deltas[1]))
    return out


def delta_to_drive_frequency(label: ResonanceLabel, delta) -> np.ndarray:
    """Convert a rotating-frame detuning back to the drive frequency."""
    return (label.n / label.m) * (1.0 - np.asarray(delta, dtype=float))


def ac_stark(xi_d, beta_tilde):
    """Drive-induced frequency shift (beta_tilde/2)(J0(xi_d) - 1)."""
    return 0.5 * beta_tilde * (j0(xi_d) - 1.0)


def resonant_drive_frequency(label: ResonanceLabel, beta, xi_d):
    """Drive frequency (n/m)(1 + (beta/2) J0(xi_d)) compensating the shift."""
    return (label.n / label.m) * (1.0 + 0.5 * beta * j0(xi_d))


def alpha_from_equilibrium(
    theta_star: float,
    r_star: float,
    lambda_: float,
    label: ResonanceLabel,
) -> np.ndarray:
    """Coherent amplitudes of the cat legs implied by an equilibrium.

    The l'th leg sits at i exp(-i (2 pi l / legs + theta*)) R* / (2 lambda);
    the mean photon number is R*^2 / (4 lambda^2).
    """
    if lambda_ <= 0:
        raise ValueError("lambda_ must be > 0")
    legs = label.legs
    ls = np.arange(legs)
    return 1j * np.exp(-1j * (2.0 * math.pi * ls / legs + theta_star)) * r_star / (2.0 * lambda_)


def small_amplitude_rotation_rate(delta: float, model: AveragedModel) -> float:
    """Rotation rate of the averaged flow at vanishing radius."""
    return delta + 0.5 * model.beta_tilde * j0(model.xi_d)


def radius_for_mean_photons(mean_photons: float, lambda_: float) -> float:
    """Rotating-frame radius whose cat legs hold the given photon number."""
    return 2.0 * lambda_ * math.sqrt(mean_photons)


def delta_for_radius(
    r_star: float,
    model: AveragedModel,
    prefer_theta: float | None = None,
) -> tuple[float, float]:
    """Pick the equilibrium at the given radius and return (theta*, delta).

    With several roots, the one closest to prefer_theta wins (default: the
    node-bearing axis theta = 0).
    """
    roots = equilibria_at_radius(r_star, model)
    if not roots:
        raise ValueError(f"no equilibria at radius {r_star}")
    target = 0.0 if prefer_theta is None else prefer_theta
    sector = sector_angle(model.label)

    def ang_dist(theta):
        d = (theta - target) % sector
        return min(d, sector - d)

    theta_star, delta = min(roots, key=lambda td: ang_dist(td[0]))
    return theta_star, delta


def equilibrium_for_delta(
    model: AveragedModel,
    delta_target: float,
    r_grid=None,
    delta_tol: float = 5e-3,
) -> Equilibrium:
    """Locate the stable node whose forward detuning matches the target.

    Scans the radius grid, classifies every root and returns the stable
    node closest to the origin among those within ``delta_tol`` of the
    target (the innermost nodes dominate the dissipative steady state);
    falls back to the node with the nearest detuning.
    """
    if r_grid is None:
        r_grid = np.linspace(0.1, 8.0, 160)
    nodes = []
    for r_star in r_grid:
        for theta_star, delta in equilibria_at_radius(float(r_star), model):
            try:
                eq = classify_stability(theta_star, float(r_star), delta, model)
            except MarginalStability:
                continue
            if eq.stability is Stability.NODE:
                nodes.append(eq)
    if not nodes:
        raise NoRoot(f"no stable nodes on the radius grid for xi_d = {model.xi_d}")
    close = [eq for eq in nodes if abs(eq.delta - delta_target) <= delta_tol]
    if close:
        return min(close, key=lambda eq: eq.r_star)
    return min(nodes, key=lambda eq: abs(eq.delta - delta_target))
