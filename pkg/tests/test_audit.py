import math
from itertools import combinations_with_replacement, product

import numpy as np
import pytest

from dprelax.audit import (
    audit_composition_ldp,
    audit_noisy_sampling_epsilon,
    audit_step_epsilon,
    chain_log_probs,
    enumerate_chain_distribution,
    enumerated_output_marginal,
    run_standard_audits,
)
from dprelax.errors import EnumerationLimitError, ParameterError
from dprelax.mechanism import chain_likelihood, rr_distribution
from dprelax.rappor import eps_noisy_sampling, rappor_params


class TestEnumerateChainDistribution:
    def test_single_round_equals_response_distribution(self):
        dist = rr_distribution(0.8, 4)
        table = enumerate_chain_distribution([0.8], 4, 1)
        assert table[(1,)] == pytest.approx(dist.p_retain, abs=1e-15)
        for v in (0, 2, 3):
            assert table[(v,)] == pytest.approx(dist.p_other, abs=1e-15)

    def test_binary_two_rounds(self):
        table = enumerate_chain_distribution([1.0, 2.0], 2, 0)
        assert len(table) == 4
        assert sum(table.values()) == pytest.approx(1.0, abs=1e-9)

    def test_matches_scalar_likelihood(self):
        # the enumeration and the per-sequence product are independent routes
        schedule = [0.1, 0.5, 1.0]
        for x in range(3):
            table = enumerate_chain_distribution(schedule, 3, x)
            for outputs, prob in table.items():
                expected = chain_likelihood(list(outputs), schedule, 3, x)
                assert prob == pytest.approx(expected, rel=1e-12, abs=1e-300)

    def test_total_mass(self):
        for schedule, m in [([0.1, 0.5, 1.0], 3), ([0.5] * 4, 2), ([0.2, 0.2, 1.5], 4)]:
            for x in range(m):
                table = enumerate_chain_distribution(schedule, m, x)
                assert sum(table.values()) == pytest.approx(1.0, abs=1e-9)

    def test_size_cap(self):
        with pytest.raises(EnumerationLimitError):
            chain_log_probs([0.1] * 7, 10)

    def test_schedule_validation(self):
        with pytest.raises(ParameterError):
            chain_log_probs([1.0, 0.5], 2)
        with pytest.raises(ParameterError):
            chain_log_probs([], 2)


class TestEnumeratedMarginal:
    def test_matches_target_distribution(self):
        for m, schedule in [(3, [0.1, 0.5, 1.0]), (2, [1.0, 2.0]), (5, [0.3, 0.3, 0.9])]:
            target = rr_distribution(schedule[-1], m)
            for x in range(m):
                marg = enumerated_output_marginal(schedule, m, x)
                expected = np.full(m, target.p_other)
                expected[x] = target.p_retain
                np.testing.assert_allclose(marg, expected, atol=1e-12)


class TestCompositionAudit:
    def test_single_round_attains_parameter(self):
        for eps, m in [(0.5, 2), (1.0, 5)]:
            report = audit_composition_ldp([eps], m)
            assert report.max_log_ratio == pytest.approx(eps, abs=1e-10)
            assert report.attained

    def test_binary_two_round(self):
        report = audit_composition_ldp([1.0, 2.0], 2)
        assert report.max_log_ratio == pytest.approx(2.0, abs=1e-10)
        assert report.attained

    def test_identity_step_changes_nothing(self):
        base = audit_composition_ldp([1.0, 2.0], 2)
        extended = audit_composition_ldp([1.0, 2.0, 2.0], 2)
        assert extended.max_log_ratio == pytest.approx(base.max_log_ratio, abs=1e-12)
        assert extended.attained

    def test_exhaustive_small_scope(self):
        for m in (2, 3, 4):
            for n in range(1, 5):
                for schedule in combinations_with_replacement((0.1, 0.5, 1.0, 2.0), n):
                    report = audit_composition_ldp(schedule, m)
                    assert report.max_log_ratio <= schedule[-1] + 1e-10
                    assert report.attained


class TestStepEpsilon:
    def test_binary_sum_of_parameters(self):
        assert audit_step_epsilon(1.0, 2.0, 2) == pytest.approx(3.0, abs=1e-10)

    def test_binary_grid(self):
        grid = [round(0.1 * i, 1) for i in range(1, 21)]
        for i, e1 in enumerate(grid):
            for e2 in grid[i:]:
                expected = 0.0 if e1 == e2 else e1 + e2
                assert audit_step_epsilon(e1, e2, 2) == pytest.approx(expected, abs=1e-10)

    def test_identity_step_is_free(self):
        assert audit_step_epsilon(0.7, 0.7, 5) == 0.0

    def test_exceeds_target_parameter(self):
        assert audit_step_epsilon(0.5, 0.6, 3) >= 0.6


class TestNoisySamplingAudit:
    def test_matches_closed_form(self):
        for eps_alpha in (0.5, 1.0, 2.0):
            for eps_beta in [round(0.1 * i, 1) for i in range(1, 11)]:
                params = rappor_params(eps_alpha, eps_beta)
                for K in range(1, 11):
                    enum = audit_noisy_sampling_epsilon(params, K)
                    closed = eps_noisy_sampling(K, params)
                    assert enum == pytest.approx(closed, abs=1e-10)


class TestSequenceRatioIdentity:
    def test_full_sequence_ratio_equals_last_output_ratio(self):
        for m in (2, 3, 4):
            for schedule in [(0.1, 0.5), (0.5, 0.5, 2.0), (0.1, 0.5, 1.0, 2.0)]:
                logp = chain_log_probs(schedule, m)
                valid = np.isfinite(logp).all(axis=0)
                last = np.arange(logp.shape[1]) % m
                dist = rr_distribution(schedule[-1], m)
                log_rr = np.full((m, m), math.log(dist.p_other))
                np.fill_diagonal(log_rr, math.log(dist.p_retain))
                for x, y in product(range(m), repeat=2):
                    got = logp[x, valid] - logp[y, valid]
                    expected = log_rr[x, last[valid]] - log_rr[y, last[valid]]
                    assert np.abs(got - expected).max() <= 1e-10


class TestSamplerAgainstEnumeration:
    def test_joint_sequence_frequencies_match_exact_distribution(self):
        # drive the vectorized sampler through a three-step schedule and
        # compare every sequence's empirical frequency with the enumeration
        from dprelax.mechanism import relax_kernel, relax_step_batch, rr_distribution, sample_rr_batch

        m, schedule, x, n = 3, [0.1, 0.5, 1.0], 1, 200_000
        rng = np.random.default_rng(2718)
        truth = np.full(n, x, dtype=np.int64)
        outputs = np.empty((n, 3), dtype=np.int64)
        outputs[:, 0] = sample_rr_batch(truth, rr_distribution(schedule[0], m), rng)
        for i in range(1, 3):
            kernel = relax_kernel(schedule[i - 1], schedule[i], m)
            outputs[:, i] = relax_step_batch(kernel, truth, outputs[:, i - 1], rng)
        codes = outputs[:, 0] * 9 + outputs[:, 1] * 3 + outputs[:, 2]
        freq = np.bincount(codes, minlength=27) / n
        exact = enumerate_chain_distribution(schedule, m, x)
        for seq, p in exact.items():
            code = seq[0] * 9 + seq[1] * 3 + seq[2]
            sigma = math.sqrt(p * (1 - p) / n)
            assert abs(freq[code] - p) <= 4 * sigma + 1e-12, seq


class TestStandardAudits:
    def test_battery_passes(self):
        checks = run_standard_audits()
        names = {c.name for c in checks}
        assert names == {
            "composition-ldp-bound",
            "composition-ldp-tightness",
            "marginal-invariance",
            "single-step-epsilon-binary",
            "noisy-sampling-epsilon",
        }
        for check in checks:
            assert check.passed, f"{check.name}: worst={check.worst} bound={check.bound}"
