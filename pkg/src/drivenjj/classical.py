"""Classical dynamics of the driven oscillator in the symmetric-dissipation frame.

State vectors are plain length-2 arrays (x, p). The equations of motion are

    dx/ds =  p - kappa * x
    dp/ds = -x - kappa * p - beta_tilde * sin(x + xi_d * sin(nu_d_tilde * s))

and the stroboscopic (Poincare) map advances a state by one drive period
2 pi / nu_d_tilde starting at section phase s = 0 (mod period).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    AmbiguousWinding,
    Escaped,
    NoConvergence,
    SingularJacobian,
    StepSizeUnderflow,
)
from .params import SymmetricFrame

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-10
#: escape radius for portraits in the Hamiltonian limit (kappa = 0),
#: comfortably beyond every structure of interest
HAMILTONIAN_ESCAPE_RADIUS = 50.0
#: dissipative escape bound as a multiple of the invariant-disk radius
ESCAPE_DISK_FACTOR = 10.0
#: per-unit-s Lyapunov exponent above which an orbit counts as chaotic
CHAOS_THRESHOLD = 0.01


class OrbitSymmetry(enum.Enum):
    SYMMETRIC = "Symmetric"
    PAIRED_PARTNER = "PairedPartner"


class OrbitClass(enum.Enum):
    REGULAR = "Regular"
    CHAOTIC = "Chaotic"
    ESCAPED = "Escaped"


@dataclass
class PeriodicOrbit:
    """An n-point orbit of the Poincare map with its linearization data."""

    n: int
    points: list
    winding_m: int
    multipliers: np.ndarray
    symmetry: OrbitSymmetry
    residual: float


@dataclass
class PortraitOrbit:
    """Iterates of one seed under the Poincare map plus a chaos diagnostic."""

    seed: np.ndarray
    iterates: list = field(default_factory=list)
    lyapunov_estimate: float = math.nan
    classification: OrbitClass = OrbitClass.REGULAR


def _solve(rhs, y0, s0, s1, rtol, atol):
    sol = solve_ivp(
        rhs, (s0, s1), y0, method="DOP853", rtol=rtol, atol=atol, dense_output=False,
    )
    if not sol.success:
        raise StepSizeUnderflow(f"integrator failed on [{s0}, {s1}]: {sol.message}")
    return sol.y[:, -1]


def flow(
    start,
    s0: float,
    s1: float,
    frame: SymmetricFrame,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> np.ndarray:
    """Advance a state from time s0 to s1 (s1 >= s0)."""
    if s1 < s0:
        raise ValueError(f"s1 must be >= s0, got [{s0}, {s1}]")
    start = np.asarray(start, dtype=float)
    if s1 == s0:
        return start.copy()
    bt, k, xi, nu = frame.beta_tilde, frame.kappa, frame.xi_d, frame.nu_d_tilde

    def rhs(s, y):
        x, p = y
        return (
            p - k * x,
            -x - k * p - bt * math.sin(x + xi * math.sin(nu * s)),
        )

    return _solve(rhs, start, s0, s1, rtol, atol)


def flow_many(
    starts,
    s0: float,
    s1: float,
    frame: SymmetricFrame,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> np.ndarray:
    """Advance a batch of states (shape (k, 2)) in a single adaptive solve."""
    starts = np.asarray(starts, dtype=float)
    if s1 == s0:
        return starts.copy()
    bt, k, xi, nu = frame.beta_tilde, frame.kappa, frame.xi_d, frame.nu_d_tilde

    def rhs(s, y):
        z = y.reshape(-1, 2)
        x, p = z[:, 0], z[:, 1]
        out = np.empty_like(z)
        out[:, 0] = p - k * x
        out[:, 1] = -x - k * p - bt * np.sin(x + xi * math.sin(nu * s))
        return out.ravel()

    return _solve(rhs, starts.ravel(), s0, s1, rtol, atol).reshape(starts.shape)


def sample_flow(
    start,
    times,
    frame: SymmetricFrame,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> np.ndarray:
    """Return the trajectory sampled at the given increasing times."""
    times = np.asarray(times, dtype=float)
    bt, k, xi, nu = frame.beta_tilde, frame.kappa, frame.xi_d, frame.nu_d_tilde

    def rhs(s, y):
        x, p = y
        return (
            p - k * x,
            -x - k * p - bt * math.sin(x + xi * math.sin(nu * s)),
        )

    sol = solve_ivp(
        rhs, (times[0], times[-1]), np.asarray(start, dtype=float),
        method="DOP853", rtol=rtol, atol=atol, t_eval=times,
    )
    if not sol.success:
        raise StepSizeUnderflow(sol.message)
    return sol.y.T


def variational_flow(
    start,
    s0: float,
    s1: float,
    frame: SymmetricFrame,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Jointly integrate a trajectory and its 2x2 tangent flow.

    Returns (state at s1, tangent matrix Phi with Phi(s0) = identity).
    """
    if s1 < s0:
        raise ValueError(f"s1 must be >= s0, got [{s0}, {s1}]")
    start = np.asarray(start, dtype=float)
    if s1 == s0:
        return start.copy(), np.eye(2)
    bt, k, xi, nu = frame.beta_tilde, frame.kappa, frame.xi_d, frame.nu_d_tilde

    def rhs(s, y):
        x, p = y[0], y[1]
        phi = y[2:].reshape(2, 2)
        drive = xi * math.sin(nu * s)
        jac = np.array(
            [[-k, 1.0], [-1.0 - bt * math.cos(x + drive), -k]]
        )
        dphi = jac @ phi
        return np.concatenate(
            ([p - k * x, -x - k * p - bt * math.sin(x + drive)], dphi.ravel())
        )

    y0 = np.concatenate((start, np.eye(2).ravel()))
    out = _solve(rhs, y0, s0, s1, rtol, atol)
    return out[:2], out[2:].reshape(2, 2)


def variational_flow_many(
    starts,
    s0: float,
    s1: float,
    frame: SymmetricFrame,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Batched joint integration of trajectories and their tangent matrices.

    Returns (states (k, 2), tangents (k, 2, 2)); one adaptive solve drives
    the whole batch, so all members share step-size control.
    """
    starts = np.asarray(starts, dtype=float)
    k_count = starts.shape[0]
    if s1 == s0:
        return starts.copy(), np.broadcast_to(np.eye(2), (k_count, 2, 2)).copy()
    bt, k, xi, nu = frame.beta_tilde, frame.kappa, frame.xi_d, frame.nu_d_tilde

    def rhs(s, y):
        z = y.reshape(k_count, 6)
        x, p = z[:, 0], z[:, 1]
        phi = z[:, 2:].reshape(k_count, 2, 2)
        drive = xi * math.sin(nu * s)
        lower = -1.0 - bt * np.cos(x + drive)
        out = np.empty_like(z)
        out[:, 0] = p - k * x
        out[:, 1] = -x - k * p - bt * np.sin(x + drive)
        # jac @ phi rows: [-k, 1; lower, -k]
        out[:, 2] = -k * phi[:, 0, 0] + phi[:, 1, 0]
        out[:, 3] = -k * phi[:, 0, 1] + phi[:, 1, 1]
        out[:, 4] = lower * phi[:, 0, 0] - k * phi[:, 1, 0]
        out[:, 5] = lower * phi[:, 0, 1] - k * phi[:, 1, 1]
        return out.ravel()

    y0 = np.concatenate(
        [np.hstack([starts, np.tile(np.eye(2).ravel(), (k_count, 1))]).ravel()]
    )
    out = _solve(rhs, y0, s0, s1, rtol, atol).reshape(k_count, 6)
    return out[:, :2], out[:, 2:].reshape(k_count, 2, 2)


def poincare(
    start,
    frame: SymmetricFrame,
    periods: int = 1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> np.ndarray:
    """Apply the stroboscopic map (one drive period per application)."""
    return flow(start, 0.0, periods * frame.period, frame, rtol, atol)


def poincare_with_tangent(
    start,
    frame: SymmetricFrame,
    periods: int = 1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> tuple[np.ndarray, np.ndarray]:
    """Stroboscopic map together with its linearization around the orbit."""
    return variational_flow(start, 0.0, periods * frame.period, frame, rtol, atol)


def tangent_determinant_expected(frame: SymmetricFrame, periods: int = 1) -> float:
    """Exact determinant of the linearized map after the given periods."""
    return math.exp(-4.0 * math.pi * frame.kappa * periods / frame.nu_d_tilde)


def find_periodic_orbit(
    guess,
    n: int,
    frame: SymmetricFrame,
    tol: float = 1e-9,
    max_iter: int = 50,
    harmonic_ref: PeriodicOrbit | None = None,
    compute_winding: bool = True,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> PeriodicOrbit:
    """Newton-solve P^n(z) = z starting from the guess.

    The Newton step uses the variational tangent; when a full step increases
    the residual it is halved up to eight times (basins near saddle-node
    points are thin). The converged orbit is returned with its section
    points, multipliers, winding number and symmetry class.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    z = np.asarray(guess, dtype=float).copy()
    zn, phi = poincare_with_tangent(z, frame, n, rtol, atol)
    res = np.linalg.norm(zn - z)
    converged = res <= tol
    for _ in range(max_iter):
        if converged:
            break
        m = phi - np.eye(2)
        det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(det) < 1e-14 * max(1.0, float(np.abs(m).max()) ** 2):
            raise SingularJacobian(
                f"grad P^{n} - I is numerically singular (det = {det:.3e})"
            )
        step = np.linalg.solve(m, -(zn - z))
        scale = 1.0
        for _ in range(8):
            z_try = z + scale * step
            zn_try, phi_try = poincare_with_tangent(z_try, frame, n, rtol, atol)
            res_try = np.linalg.norm(zn_try - z_try)
            if res_try < res or res <= tol:
                break
            scale *= 0.5
        z, zn, phi, res = z_try, zn_try, phi_try, res_try
        converged = res <= tol
    if not converged:
        raise NoConvergence(
            f"no {n}-orbit within {max_iter} iterations (residual {res:.3e})"
        )

    points = [z.copy()]
    for _ in range(n - 1):
        points.append(flow(points[-1], 0.0, frame.period, frame, rtol, atol))
    multipliers = np.linalg.eigvals(phi)
    expected = tangent_determinant_expected(frame, n)
    det_err = abs(float(np.prod(multipliers).real) - expected) / expected
    if det_err > 1e-6:
        raise NoConvergence(
            f"multiplier product off by {det_err:.2e} relative; integration suspect"
        )

    orbit = PeriodicOrbit(
        n=n,
        points=points,
        winding_m=0,
        multipliers=multipliers,
        symmetry=OrbitSymmetry.PAIRED_PARTNER,
        residual=float(res),
    )
    orbit.symmetry = symmetry_check(orbit, frame, rtol=rtol, atol=atol)
    if compute_winding and n >= 2:
        if harmonic_ref is None:
            harmonic_ref = find_periodic_orbit(
                np.zeros(2), 1, frame, tol=tol, max_iter=max_iter,
                compute_winding=False, rtol=rtol, atol=atol,
            )
        orbit.winding_m = winding_number(orbit, harmonic_ref, frame, rtol=rtol, atol=atol)
    return orbit


def winding_number(
    orbit: PeriodicOrbit,
    harmonic_ref: PeriodicOrbit,
    frame: SymmetricFrame,
    samples_per_period: int = 256,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> int:
    """Laps the orbit completes around the harmonic orbit per orbit period.

    Integrates the continuous angle of (orbit - harmonic) over the full
    orbit period and rounds the lap count; a fractional part above 0.05
    means the two trajectories got too close to tell laps apart.
    """
    if harmonic_ref.n != 1:
        raise ValueError("harmonic_ref must be a 1-orbit")
    if orbit.n < 2:
        raise ValueError("winding number is defined for n >= 2 orbits only")
    times = np.linspace(
        0.0, orbit.n * frame.period, orbit.n * samples_per_period + 1
    )
    traj = sample_flow(orbit.points[0], times, frame, rtol, atol)
    href = sample_flow(harmonic_ref.points[0], times, frame, rtol, atol)
    d = traj - href
    radii = np.hypot(d[:, 0], d[:, 1])
    if radii.min() < 1e-9 * max(radii.max(), 1e-30):
        raise AmbiguousWinding("orbit passes through the harmonic reference")
    angle = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
    laps = (angle[-1] - angle[0]) / (2.0 * math.pi)
    m = round(abs(laps))
    if abs(abs(laps) - m) > 0.05:
        raise AmbiguousWinding(f"lap count {laps:.4f} too far from an integer")
    return int(m)


def symmetry_check(
    orbit: PeriodicOrbit,
    frame: SymmetricFrame,
    tol: float = 1e-6,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> OrbitSymmetry:
    """Classify an orbit under the half-period sign-flip symmetry.

    Even-n orbits can never be symmetric (the symmetry would halve their
    period); odd-n orbits are symmetric iff the trajectory shifted by half
    the orbit period and sign-flipped coincides with itself.
    """
    if orbit.n % 2 == 0:
        return OrbitSymmetry.PAIRED_PARTNER
    z0 = np.asarray(orbit.points[0], dtype=float)
    half = 0.5 * orbit.n * frame.period
    z_half = flow(z0, 0.0, half, frame, rtol, atol)
    scale = max(1.0, float(np.linalg.norm(z0)))
    if np.linalg.norm(-z_half - z0) <= tol * scale:
        return OrbitSymmetry.SYMMETRIC
    return OrbitSymmetry.PAIRED_PARTNER


def partner_points(
    orbit: PeriodicOrbit,
    frame: SymmetricFrame,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> list:
    """Section points of the sign-flip partner orbit.

    The partner trajectory is the original one shifted by half a drive
    period and sign-flipped; for a symmetric odd orbit this returns the
    same point set (possibly permuted), otherwise a distinct orbit.
    """
    half = 0.5 * frame.period
    return [-flow(z, 0.0, half, frame, rtol, atol) for z in orbit.points]


def _escape_radius(frame: SymmetricFrame, escape_radius: float | None) -> float:
    if escape_radius is not None:
        return escape_radius
    if frame.kappa > 0.0:
        # never tighter than the Hamiltonian default (beta_tilde may be 0)
        return max(ESCAPE_DISK_FACTOR * frame.beta_tilde / frame.kappa,
                   HAMILTONIAN_ESCAPE_RADIUS)
    return HAMILTONIAN_ESCAPE_RADIUS


def lyapunov_exponent(
    seed,
    horizon_periods: int,
    frame: SymmetricFrame,
    renorm_every: int = 4,
    escape_radius: float | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> float:
    """Largest finite-time Lyapunov exponent per unit s.

    A tangent vector is evolved alongside the trajectory and renormalized
    every few periods; the exponent is the accumulated log-growth divided
    by the elapsed time. Raises Escaped if the trajectory leaves the
    configured bound.
    """
    if horizon_periods < 1:
        raise ValueError("horizon_periods must be >= 1")
    bound = _escape_radius(frame, escape_radius)
    z = np.asarray(seed, dtype=float).copy()
    v = np.array([1.0, 0.0])
    log_growth = 0.0
    done = 0
    while done < horizon_periods:
        chunk = min(renorm_every, horizon_periods - done)
        z, phi = variational_flow(z, 0.0, chunk * frame.period, frame, rtol, atol)
        if np.hypot(z[0], z[1]) > bound:
            raise Escaped(f"trajectory left radius {bound:.3g}")
        v = phi @ v
        norm = float(np.linalg.norm(v))
        log_growth += math.log(norm)
        v /= norm
        done += chunk
    return log_growth / (horizon_periods * frame.period)


def phase_portrait(
    seeds,
    iterations: int,
    frame: SymmetricFrame,
    chaos_threshold: float = CHAOS_THRESHOLD,
    escape_radius: float | None = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> list[PortraitOrbit]:
    """Iterate the Poincare map from each seed and classify the orbits.

    Escapes are recorded per orbit (truncated iterate list), never fatal.
    The Lyapunov estimate accumulates over the portrait's own horizon, so
    short portraits classify more coarsely than a dedicated exponent run.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    bound = _escape_radius(frame, escape_radius)
    portraits = []
    for seed in seeds:
        z = np.asarray(seed, dtype=float).copy()
        v = np.array([1.0, 0.0])
        orbit = PortraitOrbit(seed=z.copy())
        log_growth = 0.0
        escaped = False
        for _ in range(iterations):
            z, phi = variational_flow(z, 0.0, frame.period, frame, rtol, atol)
            if np.hypot(z[0], z[1]) > bound:
                escaped = True
                break
            orbit.iterates.append(z.copy())
            v = phi @ v
            norm = float(np.linalg.norm(v))
            log_growth += math.log(norm)
            v /= norm
        steps = len(orbit.iterates)
        if steps:
            orbit.lyapunov_estimate = log_growth / (steps * frame.period)
        if escaped:
            orbit.classification = OrbitClass.ESCAPED
        elif orbit.lyapunov_estimate > chaos_threshold:
            orbit.classification = OrbitClass.CHAOTIC
        else:
            orbit.classification = OrbitClass.REGULAR
        portraits.append(orbit)
    return portraits
