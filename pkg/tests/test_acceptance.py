"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned here, not configurable. Heavy quantum points run with
256 split-steps of the order-6 unitary scheme, whose measured one-period
self-convergence at these parameters is below 1e-10 in operator norm.
"""
import math
import time

import numpy as np
from scipy.special import j0

from drivenjj import averaging, bounds, classical, markov, params, quantum, workflows
from drivenjj.errors import StepSizeUnderflow
from oracles import averaged_field_quadrature, rate_ode_limit

LAB31 = params.make_resonance(3, 1)
LAB21 = params.make_resonance(2, 1)


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")


def heavy_settings(dim: int, n_keep: int = 60, m_max: int = 5):
    return workflows.QuantumSettings(
        dim=dim, steps_per_period=256, n_t=64, n_keep=n_keep, m_max=m_max,
        auto_converge=False,
    )


def test_c01_analytic_floquet_spectrum():
    start = time.time()
    ops = quantum.build_operators(100, 0.2)
    model = params.NormalizedModel(beta=0.0, lambda_=0.2, nu_d=3.0, xi_d=1.0)
    prop = quantum.one_period_propagator(model, ops, 256, 64)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dec = quantum.floquet_decompose(prop.u_total, prop.u_partials, 3.0)
    expected = quantum.fold_to_brillouin(np.arange(100) + 0.5, 3.0)
    # compare on the circle: the +-nu/2 fold boundary is hit exactly here
    got = np.sort((dec.quasienergies - 0.25) % 3.0)
    want = np.sort((expected - 0.25) % 3.0)
    err = float(np.abs(got - want).max())
    elapsed = time.time() - start
    ok = err <= 1e-9 and elapsed < 10.0
    report("analytic Floquet spectrum",
           ok, f"max quasienergy error {err:.2e}, {elapsed:.1f} s")
    assert ok


def test_c02_determinant_law():
    start = time.time()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(50):
        frame = params.SymmetricFrame(
            beta_tilde=rng.uniform(0.0, 1.5), nu_d_tilde=rng.uniform(1.0, 4.0),
            kappa=rng.uniform(0.0, 0.1), xi_d=rng.uniform(0.0, 4.0),
        )
        z0 = rng.uniform(-2.0, 2.0, size=2)
        _, phi = classical.poincare_with_tangent(z0, frame,
                                                 rtol=1e-12, atol=1e-12)
        expected = classical.tangent_determinant_expected(frame)
        worst = max(worst, abs(np.linalg.det(phi) - expected) / expected)
    elapsed = time.time() - start
    ok = worst <= 1e-6 and elapsed < 60.0
    report("determinant law (50 draws)",
           ok, f"worst relative error {worst:.2e}, {elapsed:.1f} s")
    assert ok


def test_c03_averaging_master_oracle():
    start = time.time()
    rng = np.random.default_rng(102)
    worst = 0.0
    for label in (LAB31, LAB21):
        for _ in range(100):
            theta = rng.uniform(0.0, 2.0 * math.pi)
            radius = rng.uniform(0.02, 12.0)
            xi_d = rng.uniform(0.0, 6.0)
            g, h = averaging.g_and_h(theta, radius, xi_d, label)
            g_ref, h_ref = averaged_field_quadrature(theta, radius, xi_d, label)
            worst = max(worst, abs(g - g_ref), abs(h - h_ref))
    elapsed = time.time() - start
    ok = worst <= 1e-8 and elapsed < 60.0
    report("averaging master oracle (200 points)",
           ok, f"max |series - quadrature| {worst:.2e}, {elapsed:.1f} s")
    assert ok


def test_c04_ac_stark_limit():
    delta = 0.05
    radius = 1e-3
    worst = 0.0
    for xi_d in np.linspace(0.0, 4.0, 41):
        model = averaging.AveragedModel(label=LAB31, beta_tilde=0.5,
                                        kappa=0.0, xi_d=float(xi_d))
        u, v = radius, 0.0
        du, dv = averaging.averaged_vector_field(u, v, delta, model)
        rate = (v * du - u * dv) / radius**2
        expected = delta + 0.25 * j0(xi_d)
        worst = max(worst, abs(rate - expected))
    ok = worst <= 1e-4
    report("AC-Stark small-amplitude limit",
           ok, f"max rotation-rate error {worst:.2e}")
    assert ok


def test_c05_three_to_one_resonance():
    start = time.time()
    nu_d = float(averaging.resonant_drive_frequency(LAB31, 0.5, 1.7))
    assert abs(nu_d - 3.2985) < 1e-3
    model = params.NormalizedModel(beta=0.5, lambda_=0.2, nu_d=nu_d, xi_d=1.7)
    result = workflows.floquet_markov_point(model, heavy_settings(300))
    probs = result.steady.probabilities
    n_occ = result.steady.n_occ
    top3 = np.argsort(probs)[::-1][:3]
    quantum_step = nu_d / 3.0
    worst_deg = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            d = abs(result.decomp.quasienergies[top3[i]]
                    - result.decomp.quasienergies[top3[j]]) % quantum_step
            worst_deg = max(worst_deg, min(d, quantum_step - d))
    fit = quantum.cat_fidelity(result.decomp, LAB31, result.ops, weights=probs)
    min_fid = float(fit.fidelities.min())
    elapsed = time.time() - start

    ok_nocc = abs(n_occ - 3.0) <= 0.3
    ok_deg = worst_deg <= 1e-3
    ok_fid = min_fid >= 0.9
    report("(3:1) resonance / n_occ = 3 +- 0.3",
           ok_nocc, f"n_occ = {n_occ:.3f}")
    report("(3:1) resonance / triplet degeneracy mod nu_d/3 <= 1e-3",
           ok_deg, f"worst pair distance {worst_deg:.2e}")
    report("(3:1) resonance / cat fidelities >= 0.9",
           ok_fid, f"min fidelity {min_fid:.4f} ({elapsed:.0f} s)")
    assert ok_nocc and ok_deg and ok_fid, (
        f"n_occ={n_occ:.3f} (want 3+-0.3), degeneracy={worst_deg:.2e} "
        f"(want <=1e-3), min fidelity={min_fid:.4f} (want >=0.9)"
    )


def test_c06_two_to_one_gap_values():
    start = time.time()
    gaps = {}
    for lam, nu_d in ((0.6, 1.96), (0.4, 1.898)):
        point = workflows.gap_at_drive(0.5, lam, 3.3, nu_d, LAB21,
                                       heavy_settings(200))
        gaps[lam] = point.gap
    elapsed = time.time() - start
    ok_06 = abs(gaps[0.6] - 0.08) <= 0.02
    ok_04 = abs(gaps[0.4] - 0.05) <= 0.015
    ok_mono = gaps[0.4] < gaps[0.6]
    ok = ok_06 and ok_04 and ok_mono
    report("(2:1) confinement gaps", ok,
           f"gap(0.6) = {gaps[0.6]:.4f} (want 0.08+-0.02), "
           f"gap(0.4) = {gaps[0.4]:.4f} (want 0.05+-0.015), "
           f"monotone: {ok_mono} ({elapsed:.0f} s)")
    assert ok


def test_c07_chaos_signature():
    start = time.time()
    # classical chaos at the supplementary-caption frequency
    frame_chaotic = params.SymmetricFrame(beta_tilde=1.5, nu_d_tilde=2.35,
                                          kappa=0.0, xi_d=1.85)
    rng = np.random.default_rng(5)
    lyap = max(
        classical.lyapunov_exponent(rng.uniform(-4, 4, size=2), 300,
                                    frame_chaotic)
        for _ in range(6)
    )
    ok_lyap = lyap > 0.01

    # wave-packet explosion at the main-text frequency of the same figure
    # (the two prints disagree; see the decisions ledger)
    model_explosion = params.NormalizedModel(beta=1.5, lambda_=0.3,
                                             nu_d=2.135, xi_d=1.85)
    exploded = workflows.floquet_markov_point(model_explosion,
                                              heavy_settings(300))
    ok_explosion = exploded.steady.n_occ >= 10.0

    # the supplementary-caption frequency itself relaxes to a near-pure state
    model_sup = params.NormalizedModel(beta=1.5, lambda_=0.3, nu_d=2.35,
                                       xi_d=1.85)
    sup = workflows.floquet_markov_point(model_sup, heavy_settings(300))
    ok_sup = sup.steady.n_occ < 2.0

    # beta = 0.5 counterpart: moderate mixing, regular islands
    model_reg = params.NormalizedModel(beta=0.5, lambda_=0.6, nu_d=1.96,
                                       xi_d=3.3)
    regular = workflows.floquet_markov_point(model_reg, heavy_settings(200))
    ok_nocc_reg = regular.steady.n_occ <= 6.0
    frame_reg = params.to_symmetric_frame(model_reg)
    avg = averaging.AveragedModel(label=LAB21, beta_tilde=0.5, kappa=0.0,
                                  xi_d=3.3)
    eq = averaging.equilibrium_for_delta(avg, params.detuning(LAB21, frame_reg))
    island_lyaps = []
    for k in range(4):
        theta = eq.theta_star + k * averaging.sector_angle(LAB21)
        seed = np.array([eq.r_star * math.sin(theta),
                         eq.r_star * math.cos(theta)])
        island_lyaps.append(
            classical.lyapunov_exponent(seed, 400, frame_reg)
        )
    ok_islands = max(island_lyaps) <= classical.CHAOS_THRESHOLD
    elapsed = time.time() - start

    ok = ok_lyap and ok_explosion and ok_sup and ok_nocc_reg and ok_islands
    report("chaos signature", ok,
           f"lyapunov(beta=1.5) = {lyap:.3f} (> 0.01), "
           f"n_occ(nu=2.135) = {exploded.steady.n_occ:.1f} (>= 10), "
           f"n_occ(nu=2.35) = {sup.steady.n_occ:.2f} (< 2), "
           f"n_occ(beta=0.5) = {regular.steady.n_occ:.2f} (<= 6), "
           f"max island lyapunov = {max(island_lyaps):.4f} (<= 0.01) "
           f"({elapsed:.0f} s)")
    assert ok


def test_c08_delta_bar_constant():
    worst = 0.0
    for n in (2, 3, 5):
        for nu in (1.7, 3.0):
            coeff = bounds.optimal_delta_bar(n, nu) * 2.0 * math.pi * n / nu
            worst = max(worst, abs(coeff - 0.537))
    ok = worst <= 2e-3
    report("optimal delta-bar constant 0.537", ok,
           f"worst |coefficient - 0.537| = {worst:.2e}")
    assert ok


def test_c09a_eigenvalue_exclusion_soundness():
    start = time.time()
    rng = np.random.default_rng(201)
    min_dist = math.inf
    for _ in range(100):
        n = int(rng.integers(1, 4))
        nu = rng.uniform(1.0, 4.0)
        delta_bar = bounds.optimal_delta_bar(max(2, n), nu)
        beta_cap = nu / (4.0 * math.pi * n) * math.log1p(
            2.0 * math.cos(delta_bar * math.pi * n / nu)
        )
        beta = rng.uniform(0.0, 0.95 * beta_cap)
        assert bounds.no_minusone_criterion(beta, nu, n, delta_bar)
        frame = params.SymmetricFrame(
            beta_tilde=beta, nu_d_tilde=nu, kappa=rng.uniform(0.0, 0.05),
            xi_d=rng.uniform(0.0, 4.0),
        )
        z0 = rng.uniform(-3.0, 3.0, size=2)
        _, phi = classical.poincare_with_tangent(z0, frame, periods=n)
        min_dist = min(min_dist, float(np.abs(
            np.linalg.eigvals(phi) + 1.0
        ).min()))
    elapsed = time.time() - start
    ok = min_dist > 1e-3
    report("bound soundness / eigenvalues away from -1 (100 draws)",
           ok, f"min distance {min_dist:.3e}, {elapsed:.0f} s")
    assert ok


def test_c09b_contraction_soundness():
    start = time.time()
    rng = np.random.default_rng(202)
    ok = True
    for _ in range(100):
        q = rng.uniform(0.8, 8.0)
        beta = rng.uniform(0.0, 0.95 * bounds.contraction_bound(q))
        model = params.NormalizedModel(
            beta=beta, lambda_=0.2, nu_d=rng.uniform(1.0, 4.0),
            xi_d=rng.uniform(0.0, 4.0), q_tilde=q,
        )
        frame = params.to_symmetric_frame(model)
        disk = frame.beta_tilde / frame.kappa
        a = rng.uniform(-1.0, 1.0, size=2) * min(disk, 3.0)
        b = a + 1e-2 * rng.uniform(-1.0, 1.0, size=2)
        times = np.linspace(0.0, 50.0 * frame.period, 200)
        ta = classical.sample_flow(a, times, frame)
        tb = classical.sample_flow(b, times, frame)
        dist = np.sum((ta - tb) ** 2, axis=1)
        meaningful = dist[:-1] > max(1e-18, 1e-8 * dist[0])
        if not np.all(np.diff(dist)[meaningful] < 0.0):
            ok = False
            break
    elapsed = time.time() - start
    report("bound soundness / monotone contraction (100 draws over 50 periods)",
           ok, f"{elapsed:.0f} s")
    assert ok


def _batched_subharmonic_search(frame, n, seeds, iters=25, tol=1e-8):
    """Newton on P^n(z) = z for a batch of seeds; returns converged points."""
    z = np.array(seeds, dtype=float)
    active = np.ones(len(z), dtype=bool)
    converged = []
    span = n * frame.period
    for _ in range(iters):
        if not active.any():
            break
        idx = np.where(active)[0]
        try:
            zs, phis = classical.variational_flow_many(
                z[idx], 0.0, span, frame, rtol=1e-9, atol=1e-9
            )
        except StepSizeUnderflow:
            break
        residual = zs - z[idx]
        res_norm = np.hypot(residual[:, 0], residual[:, 1])
        done = res_norm <= tol
        for local_i in np.where(done)[0]:
            converged.append(z[idx[local_i]].copy())
            active[idx[local_i]] = False
        keep = ~done
        if not keep.any():
            continue
        sub = idx[keep]
        a = phis[keep, 0, 0] - 1.0
        b = phis[keep, 0, 1]
        c = phis[keep, 1, 0]
        d = phis[keep, 1, 1] - 1.0
        det = a * d - b * c
        bad = np.abs(det) < 1e-12
        f0, f1 = residual[keep, 0], residual[keep, 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            dz0 = (-d * f0 + b * f1) / det
            dz1 = (c * f0 - a * f1) / det
        z[sub, 0] += np.where(bad, 0.0, dz0)
        z[sub, 1] += np.where(bad, 0.0, dz1)
        escaped = np.hypot(z[sub, 0], z[sub, 1]) > 100.0
        active[sub[escaped | bad]] = False
    return converged


def test_c09c_subharmonic_exclusion_soundness():
    start = time.time()
    rng = np.random.default_rng(203)
    draws = 0
    non_harmonic = 0
    while draws < 100:
        n = int(rng.integers(2, 4))
        nu = rng.uniform(1.0, 4.0)
        beta = rng.uniform(0.01, 0.2)
        if not bounds.subharmonic_exclusion(beta, nu, n):
            continue
        draws += 1
        frame = params.SymmetricFrame(
            beta_tilde=beta, nu_d_tilde=nu, kappa=rng.uniform(0.0, 0.02),
            xi_d=rng.uniform(0.0, 3.0),
        )
        seeds = rng.uniform(-3.0, 3.0, size=(100, 2))
        for z_star in _batched_subharmonic_search(frame, n, seeds):
            one = classical.poincare(z_star, frame)
            if np.abs(one - z_star).max() > 1e-6:
                non_harmonic += 1
    elapsed = time.time() - start
    ok = non_harmonic == 0
    report("bound soundness / no n-orbit when excluded (100 draws x 100 seeds)",
           ok, f"non-harmonic fixed points found: {non_harmonic}, {elapsed:.0f} s")
    assert ok


def test_c10_averaged_model_structure():
    start = time.time()
    model = averaging.AveragedModel(label=LAB31, beta_tilde=0.5, kappa=1e-5,
                                    xi_d=1.7)
    scan = averaging.bifurcation_scan(model, np.linspace(0.2, 3.0, 57))
    axis = [b for b in scan.branches
            if round(b.theta_star / (math.pi / 3.0)) % 2 == 0]
    first_sn = min(axis, key=lambda b: b.delta)
    ok_sn = 0.7 <= first_sn.r_star <= 1.3

    # index balance at a detuning where only the innermost branch exists
    target = -0.115
    families = {0: [], 1: []}
    for radius in np.linspace(0.2, 3.0, 60):
        for theta, delta in averaging.equilibria_at_radius(radius, model):
            families[round(theta / (math.pi / 3.0)) % 2].append(
                (radius, theta, delta))
    kinds = []
    for fam in families.values():
        fam.sort()
        for (r0, t0, d0), (_, _, d1) in zip(fam, fam[1:]):
            if (d0 - target) * (d1 - target) < 0:
                kinds.append(averaging.classify_stability(t0, r0, d0,
                                                          model).stability)
    nodes = sum(1 for k in kinds if k is averaging.Stability.NODE)
    saddles = sum(1 for k in kinds if k is averaging.Stability.SADDLE)
    # full-plane count: 3 copies of each, plus the stable origin
    index_count = 1 + 3 * (nodes - saddles)
    ok_count = index_count == 1 and nodes >= 1

    worst_rot = 0.0
    for theta, delta in averaging.equilibria_at_radius(1.4, model):
        for k in (1, 2):
            angle = theta + k * averaging.sector_angle(LAB31)
            du, dv = averaging.averaged_vector_field(
                1.4 * math.sin(angle), 1.4 * math.cos(angle), delta, model
            )
            worst_rot = max(worst_rot, math.hypot(du, dv))
    ok_rot = worst_rot <= 1e-10

    lo, hi = scan.extremal_deltas
    ok_range = lo <= -0.08 and hi >= -0.12
    elapsed = time.time() - start

    ok = ok_sn and ok_count and ok_rot and ok_range
    report("averaged-model structure", ok,
           f"first saddle-node R* = {first_sn.r_star:.2f} (1 +- 0.3), "
           f"node-saddle count = {index_count} (= 1), "
           f"rotated-equilibrium residual {worst_rot:.1e} (<= 1e-10), "
           f"delta range [{lo:.3f}, {hi:.3f}] contains -0.1 +- 0.02 "
           f"({elapsed:.0f} s)")
    assert ok


def test_c11_rate_matrix_oracle():
    rng = np.random.default_rng(204)
    worst = 0.0
    for _ in range(12):
        size = int(rng.integers(5, 11))
        rates = rng.uniform(0.0, 1.0, size=(size, size))
        gen = markov.rate_matrix(rates)
        steady = markov.steady_state(gen)
        p0 = rng.uniform(0.1, 1.0, size=size)
        p0 /= p0.sum()
        limit = rate_ode_limit(gen, p0, t_final=3000.0)
        worst = max(worst, float(np.abs(limit - steady.probabilities).max()))
    ok = worst <= 1e-8
    report("rate-matrix kernel vs long-time rate ODE",
           ok, f"worst deviation {worst:.2e}")
    assert ok
