"""Rate metrics: hand-computed values and internal consistency."""

import numpy as np
import pytest

from ialign import rates
from ialign.channel import ChannelSet, NetworkConfig, generate_network
from ialign.solvers import Solution, closed_form_ia_3user, run_min_leakage, SolverOptions


def _identity_channels(k, n):
    eye = np.eye(n, dtype=np.complex128)
    rows = tuple(tuple(eye.copy() for _ in range(k)) for _ in range(k))
    return ChannelSet(matrices=rows, noise_cov=None)


class TestBaselines:
    def test_tdma_identity_channel_hand_value(self):
        # K=3 users, H_kk = I2, P=1: each active slot spends 3x power
        # over 2 antennas, so det(I + 1.5 I) = 2.5^2 per user and the
        # time share divides by 3
        config = NetworkConfig.uniform(3, 2, 2, 1, power=1.0)
        ch = _identity_channels(3, 2)
        per_user = rates.tdma_rates(ch, config)
        expected = 2.0 * np.log2(2.5) / 3.0
        np.testing.assert_allclose(per_user, expected, rtol=1e-12)
        assert rates.tdma_sum_rate(ch, config) == pytest.approx(
            2.0 * np.log2(2.5), rel=1e-12
        )

    def test_isotropic_identity_channel_hand_value(self):
        # all links I2: interference floor 2I, adding the desired user
        # lifts it to 2.5I
        config = NetworkConfig.uniform(3, 2, 2, 1, power=1.0)
        ch = _identity_channels(3, 2)
        per_user = rates.isotropic_rates(ch, config)
        expected = 2.0 * (np.log2(2.5) - np.log2(2.0))
        np.testing.assert_allclose(per_user, expected, rtol=1e-12)

    def test_isotropic_interference_free_equals_tdma_without_sharing(self):
        # single user: no interference, isotropic = plain log det
        config = NetworkConfig.uniform(1, 2, 2, 1, power=9.0)
        ch = _identity_channels(1, 2)
        got = rates.isotropic_sum_rate(ch, config)
        assert got == pytest.approx(2.0 * np.log2(1.0 + 4.5), rel=1e-12)


class TestAlignedRate:
    def test_matches_direct_logdet(self):
        rng = np.random.default_rng(1)
        h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        got = rates.aligned_rate(h, power=6.0, streams=2)
        gram = np.eye(2) + 3.0 * (h @ h.conj().T)
        sign, logdet = np.linalg.slogdet(gram)
        assert got == pytest.approx(logdet / np.log(2.0), rel=1e-10)

    def test_shape_guard(self):
        with pytest.raises(ValueError):
            rates.aligned_rate(np.eye(3), power=1.0, streams=2)


class TestSumRate:
    def test_per_stream_sinr_consistency(self):
        config = NetworkConfig.uniform(3, 2, 2, 1, power=10.0)
        ch = generate_network(config, 50)
        sol, _ = run_min_leakage(ch, config, SolverOptions(max_iterations=500))
        report = rates.sum_rate(ch, sol, config)
        for k in range(3):
            rebuilt = sum(
                np.log2(1.0 + rates.stream_sinr(k, l, ch, sol, config))
                for l in range(config.streams[k])
            )
            assert report.per_user_rate[k] == pytest.approx(rebuilt, rel=1e-9)
        assert report.sum_rate == pytest.approx(sum(report.per_user_rate), rel=1e-12)

    def test_slot_normalization(self):
        config = NetworkConfig.uniform(3, 2, 2, 1, power=10.0)
        ch = generate_network(config, 51)
        sol = closed_form_ia_3user(ch)
        one = rates.sum_rate(ch, sol, config, slots=1.0)
        two = rates.sum_rate(ch, sol, config, slots=2.0)
        assert two.sum_rate == pytest.approx(one.sum_rate / 2.0, rel=1e-12)
        assert two.slots == 2.0

    def test_interference_fraction_bounds_and_single_user(self):
        config = NetworkConfig.uniform(3, 2, 2, 1, power=10.0)
        ch = generate_network(config, 52)
        sol = closed_form_ia_3user(ch)
        for k in range(3):
            p = rates.interference_fraction(k, ch, sol, config)
            assert 0.0 <= p < 1e-10  # aligned: nothing in the signal space
        solo = NetworkConfig.uniform(1, 2, 2, 1, power=10.0)
        ch1 = generate_network(solo, 5)
        sol1, _ = run_min_leakage(ch1, solo, SolverOptions(max_iterations=10))
        assert rates.interference_fraction(0, ch1, sol1, solo) == 0.0


class TestDofSlope:
    def test_exact_line(self):
        points = [(10.0 ** (p / 10.0), 1.5 * np.log2(10.0 ** (p / 10.0)) + 4.0)
                  for p in (40, 45, 50)]
        assert rates.dof_slope(points) == pytest.approx(1.5, rel=1e-9)

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(ValueError):
            rates.dof_slope([(10.0, 1.0)])
        with pytest.raises(ValueError):
            rates.dof_slope([(10.0, 1.0), (10.0, 2.0)])

    def test_db_to_linear(self):
        assert rates.db_to_linear(0.0) == pytest.approx(1.0)
        assert rates.db_to_linear(30.0) == pytest.approx(1000.0)
