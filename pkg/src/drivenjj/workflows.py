"""End-to-end pipelines shared by the command-line interface and tests."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import averaging, classical, markov, params, quantum
from .errors import DrivenJJError


@dataclass(frozen=True)
class QuantumSettings:
    """Numerical knobs of the Floquet-Markov pipeline."""

    dim: int = quantum.DEFAULT_DIM
    steps_per_period: int = quantum.DEFAULT_STEPS
    n_t: int = quantum.DEFAULT_MODE_SAMPLES
    n_keep: int = markov.DEFAULT_N_KEEP
    m_max: int = markov.DEFAULT_M_MAX
    j_const: float = 1.0
    t_bath: float = 0.0
    auto_converge: bool = True
    propagator_tol: float = 1e-8

    def bath(self) -> markov.BathSpec:
        return markov.BathSpec(j_const=self.j_const, t_bath=self.t_bath, m_max=self.m_max)


@dataclass
class FloquetMarkovResult:
    """Decomposition plus dissipative steady state at one parameter point."""

    model: params.NormalizedModel
    decomp: quantum.FloquetDecomposition
    steady: markov.SteadyState
    ops: quantum.FockOperators = field(repr=False)


def floquet_decomposition(
    model: params.NormalizedModel,
    settings: QuantumSettings = QuantumSettings(),
    ops: quantum.FockOperators | None = None,
    keep: int | None = None,
) -> tuple[quantum.FloquetDecomposition, quantum.FockOperators]:
    """Propagate one period (step-converged by default) and diagonalize."""
    if ops is None:
        ops = quantum.build_operators(settings.dim, model.lambda_)
    if settings.auto_converge:
        prop = quantum.converged_propagator(
            model, ops, n_t=settings.n_t,
            start_steps=settings.steps_per_period, tol=settings.propagator_tol,
        )
    else:
        prop = quantum.one_period_propagator(
            model, ops, settings.steps_per_period, settings.n_t
        )
    decomp = quantum.floquet_decompose(
        prop.u_total, prop.u_partials, model.nu_d,
        keep=keep if keep is not None else settings.n_keep,
        times=prop.times, converged=prop.converged,
    )
    return decomp, ops


def floquet_markov_point(
    model: params.NormalizedModel,
    settings: QuantumSettings = QuantumSettings(),
    ops: quantum.FockOperators | None = None,
) -> FloquetMarkovResult:
    """Full pipeline: propagator, Floquet modes, golden-rule steady state."""
    decomp, ops = floquet_decomposition(model, settings, ops)
    elems = markov.transition_elements(decomp, ops, settings.m_max)
    rates = markov.golden_rule_rates(elems, decomp, settings.bath())
    steady = markov.steady_state(markov.rate_matrix(rates))
    return FloquetMarkovResult(model=model, decomp=decomp, steady=steady, ops=ops)


@dataclass
class GapPoint:
    """Confinement gap at a drive point solved for a target photon number."""

    lambda_: float
    nu_d: float
    delta: float
    r_star: float
    theta_star: float
    gap: float
    cat_indices: np.ndarray
    cat_fidelities: np.ndarray


def gap_for_mean_photons(
    beta: float,
    lambda_: float,
    xi_d: float,
    label: params.ResonanceLabel,
    mean_photons: float,
    settings: QuantumSettings = QuantumSettings(),
) -> GapPoint:
    """Solve the averaged model for the drive frequency reaching the target
    photon number, then measure the quantum confinement gap there."""
    avg = averaging.AveragedModel(label=label, beta_tilde=beta, kappa=0.0, xi_d=xi_d)
    r_star = averaging.radius_for_mean_photons(mean_photons, lambda_)
    theta_star, delta = averaging.delta_for_radius(r_star, avg)
    nu_d = float(averaging.delta_to_drive_frequency(label, delta))
    model = params.NormalizedModel(
        beta=beta, lambda_=lambda_, nu_d=nu_d, xi_d=xi_d, q_tilde=math.inf
    )
    decomp, ops = floquet_decomposition(model, settings)
    hint = averaging.alpha_from_equilibrium(theta_star, r_star, lambda_, label)[0]
    fit = quantum.cat_fidelity(decomp, label, ops, alpha0_init=hint)
    gap = quantum.quasienergy_gap(decomp, fit.mode_indices, ops)
    return GapPoint(
        lambda_=lambda_, nu_d=nu_d, delta=delta, r_star=r_star,
        theta_star=theta_star, gap=gap,
        cat_indices=fit.mode_indices, cat_fidelities=fit.fidelities,
    )


def gap_at_drive(
    beta: float,
    lambda_: float,
    xi_d: float,
    nu_d: float,
    label: params.ResonanceLabel,
    settings: QuantumSettings = QuantumSettings(),
) -> GapPoint:
    """Confinement gap at a pinned drive frequency.

    The cat-leg amplitude hint comes from the averaged-model stable node
    whose detuning matches the drive, which keeps the fit from locking
    onto a coexisting outer manifold.
    """
    avg = averaging.AveragedModel(label=label, beta_tilde=beta, kappa=0.0, xi_d=xi_d)
    delta = 1.0 - (label.m / label.n) * nu_d
    eq = averaging.equilibrium_for_delta(avg, delta)
    model = params.NormalizedModel(
        beta=beta, lambda_=lambda_, nu_d=nu_d, xi_d=xi_d, q_tilde=math.inf
    )
    decomp, ops = floquet_decomposition(model, settings)
    hint = averaging.alpha_from_equilibrium(eq.theta_star, eq.r_star, lambda_, label)[0]
    fit = quantum.cat_fidelity(decomp, label, ops, alpha0_init=hint)
    gap = quantum.quasienergy_gap(decomp, fit.mode_indices, ops)
    return GapPoint(
        lambda_=lambda_, nu_d=nu_d, delta=delta, r_star=eq.r_star,
        theta_star=eq.theta_star, gap=gap,
        cat_indices=fit.mode_indices, cat_fidelities=fit.fidelities,
    )


def nocc_scan(
    base_model: params.NormalizedModel,
    nu_d_values,
    xi_d_values,
    settings: QuantumSettings = QuantumSettings(),
    skip: set | None = None,
):
    """Yield (index, nu_d, xi_d, n_occ, status) over the drive grid.

    Grid points are enumerated row-major in (nu_d, xi_d); entries listed in
    ``skip`` are not recomputed. Failures are reported with nan and an
    error status so a scan can continue past bad points.
    """
    ops = quantum.build_operators(settings.dim, base_model.lambda_)
    index = 0
    for nu in nu_d_values:
        for xi in xi_d_values:
            if skip and index in skip:
                index += 1
                continue
            model = replace(base_model, nu_d=float(nu), xi_d=float(xi))
            try:
                point = floquet_markov_point(model, settings, ops=ops)
                yield index, float(nu), float(xi), point.steady.n_occ, \
                    point.steady.status.value
            except DrivenJJError as exc:
                yield index, float(nu), float(xi), math.nan, f"error:{type(exc).__name__}"
            index += 1
