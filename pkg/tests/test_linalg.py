"""Contracts of the dense complex kernels.

Every check here uses an independent oracle: explicit residuals,
rebuilt products, or a second computation path (slogdet, eigvalsh),
never the function under test against itself.
"""

import numpy as np
import pytest

from ialign import linalg


def _rng(seed=0):
    return np.random.default_rng(seed)


def _random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (a + a.conj().T) / 2.0


def _random_pd(rng, n, bump=0.1):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T + bump * np.eye(n)


class TestHermitianPart:
    def test_symmetrizes_exactly(self):
        a = _random_hermitian(_rng(1), 5)
        a[0, 1] += 1e-14  # within tolerance
        h = linalg.hermitian_part(a)
        assert np.array_equal(h, h.conj().T)

    def test_rejects_lopsided_input(self):
        a = _random_hermitian(_rng(2), 4)
        a[0, 1] += 0.1
        with pytest.raises(ValueError):
            linalg.hermitian_part(a)

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            linalg.hermitian_part(np.zeros((2, 3), dtype=complex))


class TestEighSmallest:
    def test_residual_and_ordering(self):
        rng = _rng(3)
        for n in (2, 3, 5, 8):
            a = _random_hermitian(rng, n, scale=3.0)
            pair = linalg.eigh_smallest(a, n)
            # residual oracle: A v = lambda v column by column
            res = a @ pair.vectors - pair.vectors * pair.values
            assert np.linalg.norm(res) <= 1e-9 * max(1.0, np.linalg.norm(a))
            assert np.all(np.diff(pair.values) >= -1e-12)
            # the d smallest must match eigvalsh (independent path)
            ref = np.linalg.eigvalsh(a)
            np.testing.assert_allclose(pair.values, ref, atol=1e-9)

    def test_subset_matches_full_decomposition(self):
        a = _random_hermitian(_rng(4), 6)
        sub = linalg.eigh_smallest(a, 2)
        full = np.linalg.eigvalsh(a)
        np.testing.assert_allclose(sub.values, full[:2], atol=1e-10)
        assert sub.vectors.shape == (6, 2)

    def test_phase_convention(self):
        a = _random_hermitian(_rng(5), 4)
        vecs = linalg.eigh_smallest(a, 4).vectors
        for col in vecs.T:
            pivot = col[np.argmax(np.abs(col))]
            assert abs(pivot.imag) <= 1e-12 * max(1.0, abs(pivot))
            assert pivot.real >= 0.0

    def test_rejects_bad_count(self):
        a = _random_hermitian(_rng(6), 3)
        with pytest.raises(ValueError):
            linalg.eigh_smallest(a, 4)
        with pytest.raises(ValueError):
            linalg.eigh_smallest(a, 0)


class TestOrthonormalize:
    def test_produces_orthonormal_basis_with_same_span(self):
        rng = _rng(7)
        g = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
        q = linalg.orthonormalize(g)
        np.testing.assert_allclose(q.conj().T @ q, np.eye(3), atol=1e-12)
        # span oracle: projection onto q reproduces g
        np.testing.assert_allclose(q @ (q.conj().T @ g), g, atol=1e-10)

    def test_idempotent(self):
        rng = _rng(8)
        g = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
        q = linalg.orthonormalize(g)
        q2 = linalg.orthonormalize(q)
        assert np.max(np.abs(q2 - q)) <= 1e-12

    def test_reports_rank_deficiency(self):
        g = np.ones((4, 2), dtype=complex)  # two identical columns
        with pytest.raises(ValueError, match="1"):
            linalg.orthonormalize(g)


class TestSolvePd:
    def test_residual(self):
        rng = _rng(9)
        for n in (2, 4, 7):
            b = _random_pd(rng, n)
            y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            x = linalg.solve_pd(b, y)
            assert np.linalg.norm(b @ x - y) <= 1e-10 * np.linalg.norm(y)

    def test_vector_rhs_only(self):
        rng = _rng(10)
        b = _random_pd(rng, 5)
        y = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        with pytest.raises(ValueError, match="shape"):
            linalg.solve_pd(b, y)
        for col in y.T:
            x = linalg.solve_pd(b, col)
            assert np.linalg.norm(b @ x - col) <= 1e-10 * np.linalg.norm(col)

    def test_rejects_indefinite(self):
        b = np.diag([1.0, -1.0]).astype(complex)
        with pytest.raises(ValueError):
            linalg.solve_pd(b, np.ones(2, dtype=complex))


class TestLogdetPd:
    def test_against_slogdet(self):
        rng = _rng(11)
        for n in (2, 3, 6):
            a = _random_pd(rng, n)
            got = linalg.logdet_pd(a)
            sign, ref = np.linalg.slogdet(a)
            assert sign == pytest.approx(1.0)
            assert got == pytest.approx(ref / np.log(2.0), rel=1e-9)

    def test_against_eigenvalue_sum(self):
        a = _random_pd(_rng(12), 5)
        ref = float(np.sum(np.log2(np.linalg.eigvalsh(a))))
        assert linalg.logdet_pd(a) == pytest.approx(ref, rel=1e-9, abs=1e-9)

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            linalg.logdet_pd(np.diag([2.0, -3.0]).astype(complex))


class TestInvSqrtPd:
    def test_whitening_property(self):
        rng = _rng(13)
        a = _random_pd(rng, 4)
        s = linalg.inv_sqrt_pd(a)
        np.testing.assert_allclose(s @ a @ s, np.eye(4), atol=1e-10)
        # Hermitian principal root is itself Hermitian
        np.testing.assert_allclose(s, s.conj().T, atol=1e-12)


class TestFixColumnPhases:
    def test_largest_entry_made_real_nonnegative(self):
        rng = _rng(14)
        v = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        fixed = linalg.fix_column_phases(v)
        for col_in, col_out in zip(v.T, fixed.T):
            np.testing.assert_allclose(np.abs(col_out), np.abs(col_in), atol=1e-12)
            pivot = col_out[np.argmax(np.abs(col_out))]
            assert pivot.real >= 0.0 and abs(pivot.imag) <= 1e-12

    def test_idempotent(self):
        rng = _rng(15)
        v = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
        once = linalg.fix_column_phases(v)
        np.testing.assert_allclose(linalg.fix_column_phases(once), once, atol=1e-15)

    def test_zero_column_untouched(self):
        v = np.zeros((3, 1), dtype=complex)
        np.testing.assert_array_equal(linalg.fix_column_phases(v), v)
