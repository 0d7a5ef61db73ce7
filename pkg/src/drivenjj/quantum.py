"""Truncated-Fock-space model: driven Hamiltonian, one-period propagator,
Floquet decomposition, cat states and phase-space distributions.

The drive enters the Hamiltonian only as a scalar phase on one fixed
displacement-type operator, so the cosine potential is never
re-exponentiated inside the time loop: the propagator advances with a
split-step scheme whose factors are exactly unitary.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur
from scipy.optimize import minimize
from scipy.special import gammaln

from .errors import (
    DegenerateEigenbasisWarning,
    DimensionTooSmall,
    NoCatManifold,
    TruncationUnsafe,
    UnitarityLoss,
)
from .params import NormalizedModel, ResonanceLabel

DEFAULT_DIM = 300
DEFAULT_STEPS = 256
DEFAULT_MODE_SAMPLES = 64
UNITARITY_TOL = 1e-6


@dataclass(frozen=True)
class FockOperators:
    """Ladder-operator matrices on a Fock space truncated at dim levels.

    The displacement factor exp(i sqrt(2) lambda x) is precomputed through
    the eigendecomposition of its Hermitian exponent, which the propagator
    reuses for every potential exponential.
    """

    dim: int
    lambda_: float
    x_op: np.ndarray
    p_op: np.ndarray
    a_op: np.ndarray
    number_op: np.ndarray
    displacement_op: np.ndarray
    xarg_eigs: np.ndarray = field(repr=False)
    xarg_vecs: np.ndarray = field(repr=False)


def build_operators(dim: int, lambda_: float) -> FockOperators:
    """Standard truncated ladder operators plus the displacement factor."""
    if dim < 16:
        raise DimensionTooSmall(f"dim must be >= 16, got {dim}")
    ks = np.arange(dim)
    a = np.diag(np.sqrt(ks[1:]), k=1).astype(complex)
    x = (a + a.conj().T) / math.sqrt(2.0)
    p = 1j * (a.conj().T - a) / math.sqrt(2.0)
    number = np.diag(ks).astype(complex)
    xarg = math.sqrt(2.0) * lambda_ * x
    eigs, vecs = np.linalg.eigh(xarg)
    displacement = (vecs * np.exp(1j * eigs)) @ vecs.conj().T
    return FockOperators(
        dim=dim, lambda_=lambda_, x_op=x, p_op=p, a_op=a, number_op=number,
        displacement_op=displacement, xarg_eigs=eigs, xarg_vecs=vecs,
    )


def hamiltonian_at(tau: float, model: NormalizedModel, ops: FockOperators) -> np.ndarray:
    """Hamiltonian matrix at drive phase nu_d * tau.

    The quadratic part is taken as number + 1/2 (its exact truncated
    spectrum), and the cosine as the Hermitian part of a scalar phase
    times the fixed displacement factor.
    """
    phase = np.exp(1j * model.xi_d * math.sin(model.nu_d * tau))
    half = phase * ops.displacement_op
    cosine = 0.5 * (half + half.conj().T)
    strength = model.beta / (2.0 * model.lambda_**2)
    h = -strength * cosine
    h[np.diag_indices(ops.dim)] += np.arange(ops.dim) + 0.5
    return h


@dataclass
class PropagatorResult:
    """One-period propagator with sub-period snapshots for mode sampling."""

    u_total: np.ndarray
    u_partials: np.ndarray
    times: np.ndarray
    steps_per_period: int
    unitarity_defect: float
    converged: bool = True


#: Yoshida composition weights; each entry yields a unitary scheme of the
#: stated global order built from symmetric second-order substeps
_CUBE2 = 2.0 ** (1.0 / 3.0)
_Y6_W1, _Y6_W2, _Y6_W3 = -1.17767998417887, 0.235573213359357, 0.784513610477560
SPLIT_WEIGHTS = {
    2: (1.0,),
    4: (1.0 / (2.0 - _CUBE2), -_CUBE2 / (2.0 - _CUBE2), 1.0 / (2.0 - _CUBE2)),
    6: (_Y6_W3, _Y6_W2, _Y6_W1, 1.0 - 2.0 * (_Y6_W1 + _Y6_W2 + _Y6_W3),
        _Y6_W1, _Y6_W2, _Y6_W3),
}
DEFAULT_SPLIT_ORDER = 6


def one_period_propagator(
    model: NormalizedModel,
    ops: FockOperators,
    steps_per_period: int = DEFAULT_STEPS,
    n_t: int = DEFAULT_MODE_SAMPLES,
    split_order: int = DEFAULT_SPLIT_ORDER,
) -> PropagatorResult:
    """Propagator over one drive period by unitary split-stepping.

    The base step applies exp(-i H0 h/2) exp(-i V(t_mid) h) exp(-i H0 h/2);
    higher orders compose these substeps with Yoshida weights. Every factor
    is exactly unitary: the harmonic part is diagonal in the Fock basis and
    the potential exponential is diagonal in the precomputed displacement
    eigenbasis. Adjacent harmonic half-steps and basis rotations are fused,
    so one substep costs a single dense multiplication. Snapshots at n_t
    uniform sub-times are collected for Floquet-mode reconstruction.
    """
    if split_order not in SPLIT_WEIGHTS:
        raise ValueError(f"split_order must be one of {sorted(SPLIT_WEIGHTS)}")
    if steps_per_period % n_t:
        steps_per_period = ((steps_per_period // n_t) + 1) * n_t
    weights = SPLIT_WEIGHTS[split_order]
    dim = ops.dim
    period = 2.0 * math.pi / model.nu_d
    dt = period / steps_per_period
    strength = model.beta / (2.0 * model.lambda_**2)
    harm = np.arange(dim) + 0.5
    vecs = ops.xarg_vecs
    vecs_h = vecs.conj().T

    def harm_phase(span):
        return np.exp(-1j * harm * span / 2.0)

    # junction operators between consecutive substeps, in the potential
    # eigenbasis: V^H exp(-i H0 (w_i + w_{i+1}) dt / 2) V
    junctions = {}
    pair_sums = [weights[i] + weights[i + 1] for i in range(len(weights) - 1)]
    pair_sums.append(weights[-1] + weights[0])  # across base-step boundaries
    for s in set(pair_sums):
        junctions[s] = (vecs_h * harm_phase(s * dt)[None, :]) @ vecs

    enter = vecs_h * harm_phase(weights[0] * dt)[None, :]  # V^H E(w_first dt/2)
    leave = harm_phase(weights[-1] * dt)[:, None] * vecs  # E(w_last dt/2) V

    def pot_phase(t_mid, span):
        drive = model.xi_d * math.sin(model.nu_d * t_mid)
        return np.exp(1j * span * strength * np.cos(ops.xarg_eigs + drive))

    u = np.eye(dim, dtype=complex)
    partials = np.empty((n_t, dim, dim), dtype=complex)
    stride = steps_per_period // n_t
    n_sub = len(weights)
    for snap in range(n_t):
        partials[snap] = u
        w = enter @ u
        t_loc = snap * stride * dt
        total_sub = stride * n_sub
        for idx in range(total_sub):
            wgt = weights[idx % n_sub]
            span = wgt * dt
            w = pot_phase(t_loc + span / 2.0, span)[:, None] * w
            t_loc += span
            if idx != total_sub - 1:
                w = junctions[pair_sums[idx % n_sub]] @ w
        u = leave @ w
    gram = u.conj().T @ u
    gram[np.diag_indices(dim)] -= 1.0
    defect = float(np.linalg.norm(gram[:, : dim // 2], 2))
    if defect > UNITARITY_TOL:
        raise UnitarityLoss(f"unitarity defect {defect:.3e} exceeds {UNITARITY_TOL}")
    times = np.arange(n_t) * (period / n_t)
    return PropagatorResult(
        u_total=u, u_partials=partials, times=times,
        steps_per_period=steps_per_period, unitarity_defect=defect,
    )


def converged_propagator(
    model: NormalizedModel,
    ops: FockOperators,
    n_t: int = DEFAULT_MODE_SAMPLES,
    start_steps: int = DEFAULT_STEPS,
    tol: float = 1e-8,
    max_doublings: int = 6,
    split_order: int = DEFAULT_SPLIT_ORDER,
) -> PropagatorResult:
    """Double the step count until the one-period propagator stabilizes."""
    result = one_period_propagator(model, ops, start_steps, n_t, split_order)
    for _ in range(max_doublings):
        finer = one_period_propagator(
            model, ops, 2 * result.steps_per_period, n_t, split_order
        )
        drift = float(np.linalg.norm(finer.u_total - result.u_total, 2))
        result = finer
        if drift <= tol:
            result.converged = True
            return result
    result.converged = False
    return result


def fold_to_brillouin(energy, nu_d: float):
    """Fold an energy into the first Brillouin zone [-nu_d/2, nu_d/2)."""
    return (np.asarray(energy) + nu_d / 2.0) % nu_d - nu_d / 2.0


@dataclass
class FloquetDecomposition:
    """Quasienergies plus period-sampled Floquet modes on the truncation.

    modes has shape (n_t, dim, n_kept); column r of modes[i] is mode r at
    sample time times[i]. Modes are sorted by ascending time-averaged
    photon number, and the global phase of each mode is fixed by making
    its largest-magnitude component at time zero real positive.
    """

    nu_d: float
    quasienergies: np.ndarray
    modes: np.ndarray
    mean_photons: np.ndarray
    times: np.ndarray
    dim: int
    convergence_flag: bool


def floquet_decompose(
    u_total: np.ndarray,
    u_partials: np.ndarray,
    nu_d: float,
    keep: int | None = None,
    times: np.ndarray | None = None,
    converged: bool = True,
    degeneracy_tol: float = 1e-10,
) -> FloquetDecomposition:
    """Diagonalize the one-period propagator into Floquet modes.

    A complex Schur factorization keeps eigenvectors orthonormal even
    through quasienergy degeneracies (the propagator is numerically
    normal, so its Schur form is diagonal to machine precision).
    """
    dim = u_total.shape[0]
    n_t = u_partials.shape[0]
    if times is None:
        times = np.arange(n_t) * (2.0 * math.pi / nu_d / n_t)
    t_mat, z_mat = schur(u_total, output="complex")
    eigvals = np.diag(t_mat)
    if dim > 1:
        gaps = np.abs(eigvals[None, :] - eigvals[:, None])
        gaps[np.diag_indices(dim)] = np.inf
        if gaps.min() < degeneracy_tol:
            warnings.warn(
                "near-degenerate propagator eigenvalues; mode basis is gauge-dependent",
                DegenerateEigenbasisWarning,
            )
    quasi = -np.angle(eigvals) * nu_d / (2.0 * math.pi)

    # first pass: time-averaged photon number of every mode
    levels = np.arange(dim)[:, None]
    nbar = np.zeros(dim)
    for i in range(n_t):
        w = u_partials[i] @ z_mat
        nbar += np.sum(levels * np.abs(w) ** 2, axis=0)
    nbar /= n_t

    order = np.argsort(nbar, kind="stable")
    if keep is not None:
        order = order[:keep]
    quasi = quasi[order]
    nbar = nbar[order]

    # second pass: sampled modes for the retained set, winding removed
    kept_vecs = z_mat[:, order]
    samples = np.empty((n_t, dim, order.size), dtype=complex)
    winding = np.exp(1j * np.outer(times, quasi))
    for i in range(n_t):
        samples[i] = (u_partials[i] @ kept_vecs) * winding[i][None, :]

    # gauge: largest-magnitude amplitude at time zero made real positive
    first = samples[0]
    anchor = np.argmax(np.abs(first), axis=0)
    ref = first[anchor, np.arange(first.shape[1])]
    samples *= (np.abs(ref) / ref)[None, None, :]

    return FloquetDecomposition(
        nu_d=nu_d,
        quasienergies=quasi,
        modes=samples,
        mean_photons=nbar,
        times=times,
        dim=dim,
        convergence_flag=converged,
    )


# --- cat states ---------------------------------------------------------------


@dataclass(frozen=True)
class CatStateSpec:
    """A leg-count, a cat index and the coherent amplitude of leg zero."""

    alpha0: complex
    n: int
    m: int
    r: int
    k: int
    tau: float = 0.0
    nu_d: float = 0.0

    @property
    def legs(self) -> int:
        return (1 + self.r) * self.n


def coherent_state(alpha: complex, dim: int) -> np.ndarray:
    """Coherent state in the Fock basis (stable recursive amplitudes)."""
    vec = np.empty(dim, dtype=complex)
    vec[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for k in range(1, dim):
        vec[k] = vec[k - 1] * alpha / math.sqrt(k)
    return vec


def cat_state(spec: CatStateSpec, ops: FockOperators) -> np.ndarray:
    """Normalized superposition of (1+r)n coherent states on a circle."""
    amp = abs(spec.alpha0)
    if amp**2 + 6.0 * amp >= ops.dim:
        raise TruncationUnsafe(
            f"|alpha0| = {amp:.3f} unsafe for dim = {ops.dim}"
        )
    legs = spec.legs
    if not (0 <= spec.k < legs):
        raise ValueError(f"cat index k must lie in [0, {legs}), got {spec.k}")
    rot = np.exp(-1j * (spec.m / spec.n) * spec.nu_d * spec.tau)
    vec = np.zeros(ops.dim, dtype=complex)
    for leg in range(legs):
        alpha = spec.alpha0 * np.exp(2j * math.pi * leg / legs) * rot
        vec += np.exp(2j * math.pi * leg * spec.k / legs) * coherent_state(alpha, ops.dim)
    return vec / np.linalg.norm(vec)


def _cat_subspace(alpha0: complex, legs: int, dim: int) -> np.ndarray:
    """Orthonormal basis of the span of the cat-leg coherent states."""
    cols = np.stack(
        [coherent_state(alpha0 * np.exp(2j * math.pi * l / legs), dim) for l in range(legs)],
        axis=1,
    )
    q, _ = np.linalg.qr(cols)
    return q


@dataclass
class CatFit:
    """Best-fit cat family for the dominant Floquet modes."""

    alpha0: complex
    mode_indices: np.ndarray
    fidelities: np.ndarray


def cat_fidelity(
    decomp: FloquetDecomposition,
    label: ResonanceLabel,
    ops: FockOperators,
    min_mean_fidelity: float = 0.5,
    weights=None,
    alpha0_init: complex | None = None,
    min_alpha: float = 1.0,
) -> CatFit:
    """Fit the leg amplitude and score modes against the cat family.

    The fitted quantity is the summed projection of the (1+r)n candidate
    modes onto the span of the coherent legs of radius |alpha0|. Dominant
    modes are taken from ``weights`` (e.g. steady-state occupations) when
    given, otherwise the candidate set floats to the best-fitting modes.
    Without ``alpha0_init`` the amplitude is seeded from the leg-count
    moments <a^legs>; several coexisting cat-like manifolds can make that
    seed ambiguous, so callers that know the expected radius (for example
    from the averaged model) should pass a hint.

    A fit ending below ``min_alpha`` is rejected: as the amplitude shrinks
    the leg span degenerates to the lowest Fock states, so every
    decomposition would trivially "contain cats" there.
    """
    legs = label.legs
    modes0 = decomp.modes[0]
    n_kept = modes0.shape[1]
    if n_kept < legs + 1:
        raise NoCatManifold(f"only {n_kept} modes retained, need > {legs}")

    fixed = None
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        fixed = np.argsort(weights)[-legs:][::-1]

    def fidelities_for(alpha0: complex) -> np.ndarray:
        basis = _cat_subspace(alpha0, legs, ops.dim)
        return np.sum(np.abs(basis.conj().T @ modes0) ** 2, axis=0)

    def objective(xy) -> float:
        alpha0 = complex(xy[0], xy[1])
        if abs(alpha0) ** 2 + 6.0 * abs(alpha0) >= ops.dim:
            return 0.0
        fids = fidelities_for(alpha0)
        sel = fids[fixed] if fixed is not None else np.sort(fids)[-legs:]
        return -float(np.sum(sel))

    if alpha0_init is not None:
        seed = complex(alpha0_init)
    else:
        a_pow = np.linalg.matrix_power(ops.a_op, legs)
        moments = np.einsum("ir,ij,jr->r", modes0.conj(), a_pow, modes0)
        pool = moments[fixed] if fixed is not None else moments
        seed_idx = int(np.argmax(np.abs(pool)))
        seed = complex(pool[seed_idx]) ** (1.0 / legs)
        if abs(seed) < 1e-6:
            raise NoCatManifold("no candidate mode carries a leg-count coherence")

    res = minimize(
        objective, x0=[seed.real, seed.imag], method="Nelder-Mead",
        options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 400},
    )
    alpha_fit = complex(res.x[0], res.x[1])
    if abs(alpha_fit) < min_alpha:
        raise NoCatManifold(
            f"fitted amplitude |alpha0| = {abs(alpha_fit):.3f} below "
            f"{min_alpha}; legs are not resolved"
        )
    fids = fidelities_for(alpha_fit)
    indices = fixed if fixed is not None else np.argsort(fids)[-legs:][::-1]
    selected = fids[indices]
    if float(np.mean(selected)) < min_mean_fidelity:
        raise NoCatManifold(
            f"best summed fidelity {np.sum(selected):.3f} below "
            f"{min_mean_fidelity} * {legs}"
        )
    return CatFit(alpha0=alpha_fit, mode_indices=np.asarray(indices), fidelities=selected)


def quasienergy_gap(
    decomp: FloquetDecomposition,
    cat_modes,
    ops: FockOperators,
    coupling_floor: float = 0.25,
) -> float:
    """Confinement gap between the cat manifold and its excited partners.

    Confinement is limited by the nearest excited mode the manifold
    actually talks to: for each cat mode, candidate partners are the
    retained modes outside the manifold whose period-averaged
    |<eta| a |psi>| is within ``coupling_floor`` of the strongest such
    coupling, and the gap is the smallest quasienergy distance to any
    candidate, folded modulo the manifold spacing nu_d / legs.
    """
    cat_modes = np.asarray(cat_modes, dtype=int)
    if cat_modes.size == 0:
        raise NoCatManifold("empty cat manifold")
    legs = cat_modes.size
    quantum = decomp.nu_d / legs
    others = np.setdiff1d(np.arange(decomp.modes.shape[2]), cat_modes)
    if others.size == 0:
        raise NoCatManifold("no modes outside the cat manifold were retained")
    # period-averaged |<eta(t)| a |psi(t)>| for every (eta, psi) pair
    a_modes = np.einsum("ij,tjr->tir", ops.a_op, decomp.modes[:, :, cat_modes])
    coupling = np.abs(
        np.einsum("tie,tik->tek", decomp.modes[:, :, others].conj(), a_modes)
    ).mean(axis=0)
    gaps = []
    for k in range(legs):
        strongest = float(coupling[:, k].max())
        if strongest <= 0.0:
            continue
        candidates = others[coupling[:, k] >= coupling_floor * strongest]
        d = np.abs(decomp.quasienergies[candidates] - decomp.quasienergies[cat_modes[k]])
        d = d % quantum
        gaps.append(float(np.minimum(d, quantum - d).min()))
    if not gaps:
        raise NoCatManifold("cat manifold is uncoupled from the retained modes")
    return float(min(gaps))


# --- phase-space distributions -------------------------------------------------


@dataclass
class PhaseSpaceGrid:
    """Real-valued distribution sampled on a rectangular (x, p) grid."""

    xs: np.ndarray
    ps: np.ndarray
    values: np.ndarray

    def integral(self) -> float:
        """Integral over d^2 alpha = dx dp / 2."""
        dx = self.xs[1] - self.xs[0] if self.xs.size > 1 else 1.0
        dp = self.ps[1] - self.ps[0] if self.ps.size > 1 else 1.0
        return float(np.sum(self.values) * dx * dp / 2.0)


def _as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def husimi_q(state, ops: FockOperators, xs, ps) -> PhaseSpaceGrid:
    """Husimi function Q(alpha) = <alpha| rho |alpha> / pi on the grid."""
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    xg, pg = np.meshgrid(xs, ps)
    alphas = (xg + 1j * pg).ravel() / math.sqrt(2.0)
    coh = np.empty((alphas.size, ops.dim), dtype=complex)
    coh[:, 0] = np.exp(-0.5 * np.abs(alphas) ** 2)
    for k in range(1, ops.dim):
        coh[:, k] = coh[:, k - 1] * alphas / math.sqrt(k)
    state = np.asarray(state)
    if state.ndim == 1:
        vals = np.abs(coh.conj() @ state) ** 2
    else:
        vals = np.einsum("gi,ij,gj->g", coh.conj(), state, coh).real
    return PhaseSpaceGrid(xs=xs, ps=ps, values=(vals / math.pi).reshape(pg.shape))


def wigner(state, ops: FockOperators, xs, ps) -> PhaseSpaceGrid:
    """Wigner function from the displaced-parity kernel, W(0) = 2/pi for vacuum.

    Evaluates W(alpha) = (2/pi) Tr[rho D(2 alpha) Pi] diagonal-by-diagonal
    with a stable upward recurrence for the normalized displacement matrix
    elements <n+d| D |n> (everything bounded by one).
    """
    rho = _as_density(state)
    dim = rho.shape[0]
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    xg, pg = np.meshgrid(xs, ps)
    gammas = math.sqrt(2.0) * (xg + 1j * pg).ravel()  # 2 alpha
    xabs = np.abs(gammas) ** 2
    signs = (-1.0) ** np.arange(dim)
    total = np.zeros(gammas.size, dtype=complex)
    at_origin = xabs == 0.0
    log_mag = np.log(np.where(at_origin, 1.0, np.abs(gammas)))
    phase = np.where(at_origin, 1.0, gammas / np.where(at_origin, 1.0, np.abs(gammas)))
    for d in range(dim):
        diag = np.diagonal(rho, offset=d)  # rho[n, n+d]
        weights = diag * signs[: dim - d]
        if not np.any(weights):
            continue
        # u_n = <n+d| D(gamma) |n>, started at n = 0 in log scale
        u_prev = np.zeros_like(gammas)
        u = np.exp(d * log_mag - 0.5 * gammaln(d + 1) - 0.5 * xabs) * phase**d
        if d > 0:
            u = np.where(at_origin, 0.0, u)
        acc = weights[0] * u
        for n in range(dim - d - 1):
            ratio1 = math.sqrt((n + 1.0) / (n + 1.0 + d))
            ratio2 = math.sqrt((n + 1.0) * n / ((n + 1.0 + d) * (n + d))) if n else 0.0
            u_next = ((2 * n + d + 1 - xabs) * u * ratio1 - (n + d) * u_prev * ratio2) / (n + 1.0)
            u_prev, u = u, u_next
            acc += weights[n + 1] * u
        total += acc if d == 0 else 2.0 * np.real(acc)
    vals = (2.0 / math.pi) * np.real(total)
    return PhaseSpaceGrid(xs=xs, ps=ps, values=vals.reshape(pg.shape))


# --- parity symmetry ------------------------------------------------------------


def parity_partner(mode_samples: np.ndarray, nu_d: float) -> np.ndarray:
    """Half-period-shifted, parity-flipped copy of a sampled Floquet mode.

    The result is again a Floquet mode of the same quasienergy: either the
    input itself (a symmetric mode) or its distinct partner.
    """
    n_t = mode_samples.shape[0]
    if n_t % 2:
        raise ValueError("mode must be sampled at an even number of times")
    parity = (-1.0) ** np.arange(mode_samples.shape[1])
    shifted = np.roll(mode_samples, -n_t // 2, axis=0)
    return parity[None, :] * shifted


def modes_equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-8) -> bool:
    """Whether two sampled modes coincide after one global phase rotation."""
    overlap = np.vdot(a[0], b[0])
    if abs(overlap) < 1e-12:
        return False
    rot = overlap / abs(overlap)
    return bool(np.max(np.abs(a * rot - b)) <= tol * max(1.0, float(np.max(np.abs(b)))))
