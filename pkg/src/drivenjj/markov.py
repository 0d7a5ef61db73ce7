"""Dissipative asymptotics: golden-rule rates between Floquet modes and the
steady-state mixture they select.

The bath couples through a - a^dag, so the only inputs are the harmonics of
the mode matrix elements of that operator; with a zero-temperature bath the
transition r <- l carries

    L_rl = sum_m 2 pi Theta(Delta_rlm) J |P_rlm|^2,
    Delta_rlm = eps_l - eps_r + m nu_d,

with a strictly-positive-part step (zero-frequency transitions carry no
rate). The thermal hook multiplies in the Bose occupation at |Delta|.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSampling, NoKernel
from .quantum import FloquetDecomposition, FockOperators

DEFAULT_M_MAX = 5
DEFAULT_N_KEEP = 60
KERNEL_TOL = 1e-10
DEGENERACY_TOL = 1e-6


class SteadyStatus(enum.Enum):
    UNIQUE = "Unique"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class BathSpec:
    """Constant spectral density, bath temperature and harmonic cutoff."""

    j_const: float = 1.0
    t_bath: float = 0.0
    m_max: int = DEFAULT_M_MAX

    def __post_init__(self):
        if self.j_const <= 0:
            raise ValueError("j_const must be > 0")
        if self.m_max < 1:
            raise ValueError("m_max must be >= 1")

    def n_th(self, omega):
        """Bose occupation at |omega| (dimensionless temperature units)."""
        omega = np.abs(np.asarray(omega, dtype=float))
        if self.t_bath == 0.0:
            return np.zeros_like(omega)
        with np.errstate(over="ignore", divide="ignore"):
            occ = 1.0 / np.expm1(omega / self.t_bath)
        return np.where(omega > 0, occ, 0.0)


@dataclass
class TransitionElements:
    """Harmonics P_rlm of i <phi_r(t)| a - a^dag |phi_l(t)>, |m| <= m_max."""

    p_rlm: np.ndarray  # shape (n_modes, n_modes, 2 m_max + 1)
    m_max: int

    def at(self, m: int) -> np.ndarray:
        return self.p_rlm[:, :, m + self.m_max]


def transition_elements(
    decomp: FloquetDecomposition,
    ops: FockOperators,
    m_max: int = DEFAULT_M_MAX,
) -> TransitionElements:
    """Extract drive harmonics of the coupling matrix elements by DFT.

    The sampled element is exactly band-limited only at infinite sampling;
    requiring n_t >= 4 m_max keeps the aliasing error of the retained
    harmonics negligible.
    """
    n_t = decomp.modes.shape[0]
    if n_t < max(4 * m_max, 2 * m_max + 2):
        raise InsufficientSampling(
            f"n_t = {n_t} too small for m_max = {m_max} (need >= {4 * m_max})"
        )
    op = 1j * (ops.a_op - ops.a_op.conj().T)
    elems = np.einsum("tir,tik->trk", decomp.modes.conj(),
                      np.einsum("ij,tjk->tik", op, decomp.modes))
    spectrum = np.fft.fft(elems, axis=0) / n_t  # coefficient of e^{+i m w_d t}
    ms = np.arange(-m_max, m_max + 1)
    p_rlm = np.moveaxis(spectrum[ms % n_t], 0, -1)
    return TransitionElements(p_rlm=p_rlm, m_max=m_max)


def golden_rule_rates(
    elems: TransitionElements,
    decomp: FloquetDecomposition,
    bath: BathSpec,
) -> np.ndarray:
    """Total transition-rate matrix L (gain into r from l at entry [r, l]).

    The harmonic index of P_rlm follows the e^{+i m w_d t} expansion, so the
    energy handed to the bath in the (r <- l, m) channel is
    eps_l - eps_r - m nu_d; the step function must gate on that quantity,
    or a zero-temperature bath would pump the oscillator uphill.
    """
    quasi = decomp.quasienergies[: elems.p_rlm.shape[0]]
    ms = np.arange(-elems.m_max, elems.m_max + 1)
    delta = quasi[None, :, None] - quasi[:, None, None] - ms[None, None, :] * decomp.nu_d
    gamma = 2.0 * math.pi * bath.j_const * (delta > 0) * np.abs(elems.p_rlm) ** 2
    rates = gamma.sum(axis=2)
    if bath.t_bath > 0.0:
        gamma_rev = np.transpose(gamma, (1, 0, 2))[:, :, ::-1]  # gamma_{l,r,-m}
        rates = rates + (bath.n_th(delta) * (gamma + gamma_rev)).sum(axis=2)
    return rates


def rate_matrix(rates: np.ndarray) -> np.ndarray:
    """Probability-conserving generator R with zero column sums.

    Off-diagonal entries are the gain rates; each diagonal entry carries
    the total loss out of its mode, so that d p / dt = R p preserves the
    total probability. Self-rates cancel out of the balance and are
    dropped.
    """
    if np.any(rates < 0):
        raise ValueError("rates must be non-negative")
    gen = np.array(rates, dtype=float, copy=True)
    np.fill_diagonal(gen, 0.0)
    np.fill_diagonal(gen, -gen.sum(axis=0))
    return gen


@dataclass
class SteadyState:
    """Kernel of the rate matrix as a probability vector, plus diagnostics."""

    probabilities: np.ndarray
    entropy: float
    n_occ: float
    status: SteadyStatus
    kernel_gap: float


def steady_state(gen: np.ndarray) -> SteadyState:
    """Solve R p = 0 by singular value decomposition.

    The smallest singular value must vanish to numerical precision; a
    second nearly-zero singular value means two long-lived mixtures
    coexist and the steady state cannot be trusted (status Inconclusive).
    """
    gen = np.asarray(gen, dtype=float)
    col_sums = np.abs(gen.sum(axis=0)).max()
    scale = np.abs(gen).max() or 1.0
    if col_sums > 1e-9 * scale:
        raise ValueError("rate matrix columns must sum to zero")
    _, svals, vh = np.linalg.svd(gen)
    norm = svals[0]
    if norm == 0.0:
        # no transitions at all: any distribution is stationary
        n = gen.shape[0]
        probs = np.full(n, 1.0 / n)
        return SteadyState(probs, math.log(n), float(n), SteadyStatus.INCONCLUSIVE, 0.0)
    if svals[-1] > KERNEL_TOL * norm:
        raise NoKernel(
            f"smallest singular value {svals[-1]:.3e} not consistent with a kernel"
        )
    gap = float(svals[-2] / norm) if len(svals) > 1 else math.inf
    status = SteadyStatus.INCONCLUSIVE if gap < DEGENERACY_TOL else SteadyStatus.UNIQUE
    kernel = vh[-1]
    total = kernel.sum()
    if abs(total) < 1e-12:
        return SteadyState(
            np.full(gen.shape[0], 1.0 / gen.shape[0]),
            math.log(gen.shape[0]), float(gen.shape[0]),
            SteadyStatus.INCONCLUSIVE, gap,
        )
    probs = kernel / total
    if probs.min() < -1e-6:
        # genuine negative weight signals a defective kernel vector
        raise NoKernel(f"kernel vector has negative weight {probs.min():.3e}")
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    return SteadyState(
        probabilities=probs,
        entropy=mixture_entropy(probs),
        n_occ=float(math.exp(mixture_entropy(probs))),
        status=status,
        kernel_gap=gap,
    )


def mixture_entropy(probs: np.ndarray) -> float:
    """Shannon entropy with the 0 ln 0 = 0 convention."""
    probs = np.asarray(probs, dtype=float)
    positive = probs[probs > 0.0]
    return float(-np.sum(positive * np.log(positive)))


def asymptotic_state(
    steady: SteadyState,
    decomp: FloquetDecomposition,
    tau: float = 0.0,
) -> np.ndarray:
    """Density matrix of the asymptotic mixture at the nearest sampled time."""
    n_t = decomp.modes.shape[0]
    period = 2.0 * math.pi / decomp.nu_d
    idx = int(round((tau % period) / (period / n_t))) % n_t
    n_modes = steady.probabilities.size
    modes = decomp.modes[idx][:, :n_modes]
    return (modes * steady.probabilities[None, :]) @ modes.conj().T


def rate_ode_evolution(
    gen: np.ndarray, p0: np.ndarray, t_final: float, steps: int = 2000
) -> np.ndarray:
    """Integrate d p / dt = R p by dense matrix exponentials (test oracle)."""
    from scipy.linalg import expm

    propagator = expm(gen * (t_final / steps))
    p = np.asarray(p0, dtype=float).copy()
    for _ in range(steps):
        p = propagator @ p
    return p
