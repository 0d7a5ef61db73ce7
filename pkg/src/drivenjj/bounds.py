"""Analytic regularity criteria for the classical driven oscillator.

Each bound answers a yes/no question about a parameter point without
integrating anything: is the system contracting, can the linearized return
map reach eigenvalue -1 (the period-doubling threshold), and can an
n-subharmonic exist at all. The constant 0.53 in the period-doubling bound
is re-derived at test time from the criterion-matching equation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import DeltaBarOutOfRange, NoDissipation, NoRoot, OverdampedRegime
from .params import NormalizedModel, SymmetricFrame, to_symmetric_frame

#: safe rounding of the criterion-matching constant (see optimal_delta_bar)
PD_CONSTANT = 0.53


@dataclass(frozen=True)
class RegularityReport:
    """Zone classification of one parameter point under every criterion."""

    contracting: bool
    pd_excluded_up_to: int
    invariant_radius: float
    beta_bound_contraction: float
    beta_bound_pd: float
    delta_bar_used: float


def contraction_bound(q_tilde: float) -> float:
    """Largest beta for which damping provably dominates the nonlinearity."""
    if not (q_tilde > 0.5):
        raise OverdampedRegime(f"q_tilde must exceed 1/2, got {q_tilde}")
    if math.isinf(q_tilde):
        return 0.0
    return math.sqrt(1.0 - 1.0 / (4.0 * q_tilde**2)) / q_tilde


def invariant_disk_radius(frame: SymmetricFrame) -> float:
    """Radius beyond which every disk around the origin maps into itself."""
    if frame.kappa <= 0.0:
        raise NoDissipation("no finite invariant disk is guaranteed at kappa = 0")
    return frame.beta_tilde / frame.kappa


def no_minusone_criterion(
    beta_tilde: float, nu_d_tilde: float, n: int, delta_bar: float
) -> bool:
    """True when no eigenvalue of the linearized n-period map can reach -1.

    Valid for detunings |delta| <= |delta_bar|; delta_bar itself must stay
    within the half-Brillouin width nu_d_tilde / (2n).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    half_width = nu_d_tilde / (2.0 * n)
    if abs(delta_bar) > half_width * (1.0 + 1e-15):
        raise DeltaBarOutOfRange(
            f"|delta_bar| = {abs(delta_bar)} exceeds nu_d_tilde/(2n) = {half_width}"
        )
    lhs = math.expm1(beta_tilde * 4.0 * math.pi * n / nu_d_tilde)
    rhs = 2.0 * math.cos(delta_bar * math.pi * n / nu_d_tilde)
    return lhs < rhs


def subharmonic_exclusion(beta_tilde: float, nu_d_tilde: float, n: int) -> bool:
    """True when no n-subharmonic can exist at all.

    The lap count of any closed orbit around the harmonic one is pinned to
    [(1 - beta_tilde)/nu_d_tilde, (1 + beta_tilde)/nu_d_tilde] laps per
    drive period; if that interval contains no multiple of 1/n, no orbit
    of period n periods other than the harmonic can close on itself.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    lo = (1.0 - beta_tilde) / nu_d_tilde
    hi = (1.0 + beta_tilde) / nu_d_tilde
    return math.ceil(lo * n) > math.floor(hi * n)


def optimal_delta_bar(n: int, nu_d_tilde: float) -> float:
    """Detuning split equating the eigenvalue and lap-count beta bounds.

    Solves (nu/4 pi n) log(1 + 2 cos(delta_bar pi n / nu)) = delta_bar,
    which in the variable y = delta_bar pi n / nu is the parameter-free
    equation log(1 + 2 cos y) = 4 y. The combination
    delta_bar * 2 pi n / nu_d_tilde is therefore a universal constant
    (about 0.537).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if nu_d_tilde <= 0:
        raise ValueError("nu_d_tilde must be > 0")

    def mismatch(y):
        return 4.0 * y - math.log(1.0 + 2.0 * math.cos(y))

    try:
        y_star = brentq(mismatch, 1e-12, math.pi / 2.0 - 1e-12, xtol=1e-15)
    except ValueError as exc:
        raise NoRoot(f"criterion matching failed: {exc}") from exc
    return y_star * nu_d_tilde / (math.pi * n)


def pd_exclusion_bound(tau_bar: float, q_min: float) -> float:
    """Largest beta excluding period-doubling of solutions shorter than tau_bar."""
    if tau_bar <= 0:
        raise ValueError("tau_bar must be > 0")
    if not (q_min > 0.5):
        raise OverdampedRegime(f"q_min must exceed 1/2, got {q_min}")
    factor = 1.0 if math.isinf(q_min) else math.sqrt(1.0 - 1.0 / (4.0 * q_min**2))
    return PD_CONSTANT / tau_bar * factor


def combined_bound(tau_bar: float) -> float:
    """Period-doubling bound that also overlaps the contraction zone.

    The overlap pins the crossover damping at 1/Q = 0.53/tau_bar, turning
    the quality-factor term into a pure function of tau_bar.
    """
    if tau_bar <= 0:
        raise ValueError("tau_bar must be > 0")
    x = PD_CONSTANT / (2.0 * tau_bar)
    return PD_CONSTANT / tau_bar * math.sqrt(1.0 - x * x)


def classify_point(model: NormalizedModel, n_bar: int) -> RegularityReport:
    """Evaluate every criterion at one parameter point.

    pd_excluded_up_to is the largest subharmonic order not exceeding n_bar
    whose period-doubling is excluded; beta = 0 trivially covers the whole
    queried horizon.
    """
    if n_bar < 1:
        raise ValueError("n_bar must be >= 1")
    frame = to_symmetric_frame(model)
    beta_c = contraction_bound(model.q_tilde)
    tau_bar = 2.0 * math.pi * n_bar / model.nu_d
    beta_pd = pd_exclusion_bound(tau_bar, model.q_tilde)
    if model.beta == 0.0:
        covered = n_bar
    else:
        # invert beta < (0.53 / (2 pi n / nu_d)) * sqrt(1 - 1/(4 q^2)) for n
        factor = 1.0 if math.isinf(model.q_tilde) else math.sqrt(
            1.0 - 1.0 / (4.0 * model.q_tilde**2)
        )
        n_max = math.floor(
            PD_CONSTANT * model.nu_d * factor / (2.0 * math.pi * model.beta)
        )
        covered = min(n_bar, max(0, n_max))
    radius = math.inf if frame.kappa == 0.0 else frame.beta_tilde / frame.kappa
    return RegularityReport(
        contracting=model.beta < beta_c,
        pd_excluded_up_to=covered,
        invariant_radius=radius,
        beta_bound_contraction=beta_c,
        beta_bound_pd=beta_pd,
        delta_bar_used=optimal_delta_bar(max(2, n_bar), frame.nu_d_tilde),
    )
