import math

import numpy as np
import pytest

from drivenjj import markov, quantum, workflows
from drivenjj.errors import InsufficientSampling, NoCatManifold
from drivenjj.markov import BathSpec, SteadyStatus
from drivenjj.params import NormalizedModel, make_resonance
from oracles import rate_ode_limit


@pytest.fixture(scope="module")
def free_decomposition():
    """beta = 0 at incommensurate nu_d: modes are pure Fock states."""
    ops = quantum.build_operators(60, 0.2)
    model = NormalizedModel(beta=0.0, lambda_=0.2, nu_d=math.pi, xi_d=1.0)
    prop = quantum.one_period_propagator(model, ops, 256, 64)
    dec = quantum.floquet_decompose(prop.u_total, prop.u_partials, math.pi,
                                    keep=20, times=prop.times)
    return dec, ops


class TestTransitionElements:
    def test_fock_ladder_structure(self, free_decomposition):
        dec, ops = free_decomposition
        elems = markov.transition_elements(dec, ops, 5)
        p_all = elems.p_rlm
        mags = np.abs(p_all)
        for r in range(20):
            for l in range(20):
                if abs(r - l) == 1:
                    assert mags[r, l].max() > 0.99
                else:
                    assert mags[r, l].max() < 1e-8

    def test_conjugation_symmetry(self, two_one_point):
        elems = markov.transition_elements(two_one_point.decomp,
                                           two_one_point.ops, 5)
        p = elems.p_rlm
        swapped = np.transpose(p, (1, 0, 2))[:, :, ::-1]
        assert np.abs(swapped - p.conj()).max() < 1e-8

    def test_parseval(self, two_one_point):
        dec, ops = two_one_point.decomp, two_one_point.ops
        n_t = dec.modes.shape[0]
        op = 1j * (ops.a_op - ops.a_op.conj().T)
        elems_t = np.einsum(
            "tir,tik->trk", dec.modes.conj(),
            np.einsum("ij,tjk->tik", op, dec.modes),
        )
        spectrum = np.fft.fft(elems_t, axis=0) / n_t
        total_power = np.sum(np.abs(spectrum) ** 2, axis=0)
        time_avg = np.mean(np.abs(elems_t) ** 2, axis=0)
        assert np.abs(total_power - time_avg).max() < 1e-8

    def test_alias_free_at_doubled_sampling(self):
        model = NormalizedModel(beta=0.5, lambda_=0.6, nu_d=1.96, xi_d=3.3)
        ops = quantum.build_operators(120, 0.6)
        results = {}
        for n_t in (64, 128):
            prop = quantum.one_period_propagator(model, ops, 256, n_t)
            dec = quantum.floquet_decompose(prop.u_total, prop.u_partials,
                                            model.nu_d, keep=20, times=prop.times)
            results[n_t] = markov.transition_elements(dec, ops, 5).p_rlm
        assert np.abs(np.abs(results[64]) - np.abs(results[128])).max() < 1e-8

    def test_insufficient_sampling(self, free_decomposition):
        dec, ops = free_decomposition
        sub = quantum.FloquetDecomposition(
            nu_d=dec.nu_d, quasienergies=dec.quasienergies,
            modes=dec.modes[::4], mean_photons=dec.mean_photons,
            times=dec.times[::4], dim=dec.dim, convergence_flag=True,
        )
        with pytest.raises(InsufficientSampling):
            markov.transition_elements(sub, ops, 5)


class TestRates:
    def test_cold_bath_only_relaxes(self, free_decomposition):
        dec, ops = free_decomposition
        elems = markov.transition_elements(dec, ops, 5)
        rates = markov.golden_rule_rates(elems, dec, BathSpec())
        # gain into r from l: only downward (r = l - 1), rate 2 pi J l
        for l in range(1, 20):
            assert rates[l - 1, l] / (2 * math.pi) == pytest.approx(l, rel=1e-6)
        assert np.tril(rates, k=-1).max() < 1e-10

    def test_scale_invariance_of_steady_state(self, free_decomposition):
        dec, ops = free_decomposition
        elems = markov.transition_elements(dec, ops, 5)
        base = markov.golden_rule_rates(elems, dec, BathSpec(j_const=1.0))
        scaled = markov.golden_rule_rates(elems, dec, BathSpec(j_const=7.3))
        assert np.abs(scaled - 7.3 * base).max() < 1e-8 * np.abs(base).max()
        p1 = markov.steady_state(markov.rate_matrix(base)).probabilities
        p2 = markov.steady_state(markov.rate_matrix(scaled)).probabilities
        assert np.abs(p1 - p2).max() < 1e-10

    def test_thermal_hook_enables_upward_flow(self, free_decomposition):
        dec, ops = free_decomposition
        elems = markov.transition_elements(dec, ops, 5)
        warm = markov.golden_rule_rates(elems, dec, BathSpec(t_bath=0.5))
        # absorption r = l + 1 now carries n_th(1) * emission weight
        occupation = 1.0 / math.expm1(1.0 / 0.5)
        assert warm[1, 0] / (2 * math.pi) == pytest.approx(occupation, rel=1e-5)

    def test_vacuum_steady_state(self, free_decomposition):
        dec, ops = free_decomposition
        elems = markov.transition_elements(dec, ops, 5)
        rates = markov.golden_rule_rates(elems, dec, BathSpec())
        steady = markov.steady_state(markov.rate_matrix(rates))
        assert steady.probabilities[0] >= 1.0 - 1e-6
        assert steady.n_occ == pytest.approx(1.0, abs=1e-5)


class TestRateMatrix:
    def test_two_mode_kernel(self):
        rates = np.array([[0.0, 1.0], [0.0, 0.0]])  # flow into 0 from 1
        gen = markov.rate_matrix(rates)
        steady = markov.steady_state(gen)
        assert steady.probabilities == pytest.approx([1.0, 0.0], abs=1e-12)

    def test_columns_sum_to_zero(self):
        rng = np.random.default_rng(12)
        rates = rng.uniform(0, 1, size=(7, 7))
        gen = markov.rate_matrix(rates)
        assert np.abs(gen.sum(axis=0)).max() < 1e-12

    def test_kernel_matches_long_time_ode(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            size = int(rng.integers(5, 11))
            rates = rng.uniform(0, 1, size=(size, size))
            gen = markov.rate_matrix(rates)
            steady = markov.steady_state(gen)
            p0 = rng.uniform(0.1, 1.0, size=size)
            p0 /= p0.sum()
            limit = rate_ode_limit(gen, p0, t_final=2000.0)
            assert np.abs(limit - steady.probabilities).max() < 1e-8

    def test_probability_conserved_under_ode(self):
        rng = np.random.default_rng(14)
        rates = rng.uniform(0, 1, size=(6, 6))
        gen = markov.rate_matrix(rates)
        p0 = np.full(6, 1.0 / 6.0)
        p = rate_ode_limit(gen, p0, t_final=5.0, steps=50)
        assert p.sum() == pytest.approx(1.0, abs=1e-10)

    def test_negative_rates_rejected(self):
        with pytest.raises(ValueError):
            markov.rate_matrix(np.array([[0.0, -1.0], [1.0, 0.0]]))

    def test_coherence_decay_rates_negative(self):
        rng = np.random.default_rng(15)
        rates = rng.uniform(0.01, 1, size=(6, 6))
        # off-diagonal element (r, l) decays at half the total loss of both
        decay = -0.5 * (rates.sum(axis=0)[:, None] + rates.sum(axis=0)[None, :])
        assert np.all(decay < 0)


class TestSteadyState:
    def test_uniform_mixture_entropy(self):
        gen = np.array([[-2.0, 1.0, 1.0], [1.0, -2.0, 1.0], [1.0, 1.0, -2.0]])
        steady = markov.steady_state(gen)
        assert steady.status is SteadyStatus.UNIQUE
        assert steady.entropy == pytest.approx(math.log(3.0), abs=1e-10)
        assert steady.n_occ == pytest.approx(3.0, abs=1e-9)

    def test_pure_mode(self):
        rates = np.zeros((4, 4))
        rates[0, 1] = rates[0, 2] = rates[0, 3] = 1.0
        steady = markov.steady_state(markov.rate_matrix(rates))
        assert steady.n_occ == pytest.approx(1.0, abs=1e-10)

    def test_disconnected_blocks_inconclusive(self):
        rates = np.zeros((4, 4))
        rates[0, 1] = 1.0
        rates[2, 3] = 1.0
        steady = markov.steady_state(markov.rate_matrix(rates))
        assert steady.status is SteadyStatus.INCONCLUSIVE

    def test_column_sum_validation(self):
        with pytest.raises(ValueError):
            markov.steady_state(np.array([[1.0, 0.0], [0.0, 1.0]]))

    def test_nonnegative_and_normalized(self):
        rng = np.random.default_rng(16)
        rates = rng.uniform(0, 2, size=(9, 9))
        steady = markov.steady_state(markov.rate_matrix(rates))
        assert steady.probabilities.min() >= 0.0
        assert steady.probabilities.sum() == pytest.approx(1.0, abs=1e-10)
        assert steady.n_occ == pytest.approx(math.exp(steady.entropy))


class TestAsymptoticState:
    def test_single_mode_projector(self, two_one_point):
        dec = two_one_point.decomp
        probs = np.zeros(dec.quasienergies.size)
        probs[0] = 1.0
        steady = markov.SteadyState(
            probabilities=probs, entropy=0.0, n_occ=1.0,
            status=SteadyStatus.UNIQUE, kernel_gap=1.0,
        )
        rho = markov.asymptotic_state(steady, dec)
        assert np.linalg.matrix_rank(rho, tol=1e-8) == 1
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)

    def test_mixture_properties(self, two_one_point):
        rho = markov.asymptotic_state(two_one_point.steady,
                                      two_one_point.decomp)
        assert np.abs(rho - rho.conj().T).max() < 1e-10
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
        eigs = np.linalg.eigvalsh(rho)
        assert eigs.min() > -1e-10


class TestDocumentedWorkingPoint:
    """The (2:1) working point reproduces the published mode structure."""

    def test_four_dominant_cat_modes(self, two_one_point):
        p = two_one_point.steady.probabilities
        top4 = np.argsort(p)[::-1][:4]
        assert p[top4].min() > 0.2
        nbar = two_one_point.decomp.mean_photons[top4]
        assert np.abs(nbar - 9.0).max() < 0.5

    def test_pairwise_quasienergy_degeneracy(self, two_one_point):
        p = two_one_point.steady.probabilities
        top4 = np.argsort(p)[::-1][:4]
        eps = np.sort(two_one_point.decomp.quasienergies[top4])
        assert eps[1] - eps[0] < 1e-3
        assert eps[3] - eps[2] < 1e-3
        assert eps[2] - eps[1] > 0.1

    def test_fifth_mode_is_displaced_vacuum(self, two_one_point):
        p = two_one_point.steady.probabilities
        fifth = np.argsort(p)[::-1][4]
        assert two_one_point.decomp.mean_photons[fifth] < 1.0
        assert p[fifth] > 0.005

    def test_parity_partner_pairs(self, two_one_point):
        # The tunneling splitting (~1e-4 here) makes the numerical Floquet
        # modes the parity-definite cat combinations, so each dominant mode
        # maps to itself; a well-localized superposition of a degenerate
        # pair instead maps to a distinct state of the same quasienergy.
        dec = two_one_point.decomp
        p = two_one_point.steady.probabilities
        top4 = np.argsort(p)[::-1][:4]
        for k in top4:
            partner = quantum.parity_partner(dec.modes[:, :, k], dec.nu_d)
            overlaps = np.abs(
                np.einsum("ti,tir->tr", partner.conj(),
                          dec.modes[:, :, top4]).mean(axis=0)
            )
            match = top4[int(np.argmax(overlaps))]
            assert overlaps.max() > 0.99
            assert abs(dec.quasienergies[match] - dec.quasienergies[k]) < 1e-3
        eps = dec.quasienergies[top4]
        pairs = [
            (i, j) for i in range(4) for j in range(i + 1, 4)
            if abs(eps[i] - eps[j]) < 1e-3
        ]
        assert len(pairs) == 2
        i, j = pairs[0]
        localized = (dec.modes[:, :, top4[i]] + dec.modes[:, :, top4[j]]) / math.sqrt(2)
        partner = quantum.parity_partner(localized, dec.nu_d)
        assert not quantum.modes_equal_up_to_phase(partner, localized, tol=1e-2)
        overlap = abs(np.vdot(partner[0], localized[0]))
        assert overlap < 0.5  # genuinely distinct state, same quasienergy pair

    def test_gap_value(self, two_one_point):
        fit = quantum.cat_fidelity(
            two_one_point.decomp, make_resonance(2, 1), two_one_point.ops,
            weights=two_one_point.steady.probabilities,
        )
        gap = quantum.quasienergy_gap(two_one_point.decomp, fit.mode_indices,
                                      two_one_point.ops)
        assert gap == pytest.approx(0.08, abs=0.02)

    def test_husimi_of_asymptotic_state_shows_four_lobes(self, two_one_point):
        rho = markov.asymptotic_state(two_one_point.steady,
                                      two_one_point.decomp)
        xs = np.linspace(-7.0, 7.0, 57)
        grid = quantum.husimi_q(rho, two_one_point.ops, xs, xs)
        radius = np.hypot(*np.meshgrid(xs, xs))
        ring = (radius > 2.5) & (radius < 5.5)
        angles = np.arctan2(*np.meshgrid(xs, xs))
        lobes = 0
        for target in (-3 * math.pi / 4, -math.pi / 4, math.pi / 4, 3 * math.pi / 4):
            sector = ring & (np.abs(np.angle(np.exp(1j * (angles - target)))) < 0.6)
            lobes += grid.values[sector].max() > 0.3 * grid.values.max()
        assert lobes >= 3
