import numpy as np
import pytest

from twrbf import linalg
from twrbf.errors import DimensionError, NotPSDError, SolverError
from twrbf.util import complex_normal, make_rng


def random_hermitian(seed, n):
    a = complex_normal(make_rng(seed), (n, n))
    return (a + a.conj().T) / 2


def random_psd(seed, n):
    a = complex_normal(make_rng(seed), (n, n))
    return a @ a.conj().T


class TestHermEig:
    def test_identity(self):
        w, v = linalg.herm_eig(np.eye(3))
        np.testing.assert_allclose(w, [1, 1, 1])

    def test_diagonal(self):
        w, v = linalg.herm_eig(np.diag([2.0, 1.0]))
        np.testing.assert_allclose(w, [2, 1])
        assert abs(abs(v[0, 0]) - 1) < 1e-12
        assert abs(abs(v[1, 1]) - 1) < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_reconstruction(self, seed):
        m = random_hermitian(seed, 4)
        w, v = linalg.herm_eig(m)
        assert np.all(np.diff(w) <= 0)
        np.testing.assert_allclose(v.conj().T @ v, np.eye(4), atol=1e-12)
        residual = np.linalg.norm(v @ np.diag(w) @ v.conj().T - m)
        assert residual <= 1e-10 * max(np.linalg.norm(m), 1.0)

    def test_non_finite(self):
        with pytest.raises(SolverError) as exc:
            linalg.herm_eig(np.array([[np.nan, 0], [0, 1]]))
        assert exc.value.status == "eig"

    def test_non_square(self):
        with pytest.raises(DimensionError):
            linalg.herm_eig(np.zeros((2, 3)))


class TestKronVec:
    def test_kron_identity(self):
        np.testing.assert_array_equal(linalg.kron(np.eye(2), np.eye(2)), np.eye(4))

    def test_kron_scalar_block(self):
        got = linalg.kron(np.array([[2]]), np.array([[0, 1], [1, 0]]))
        np.testing.assert_array_equal(got, [[0, 2], [2, 0]])

    def test_vec_column_major(self):
        np.testing.assert_array_equal(
            linalg.vec(np.array([[1, 3], [2, 4]])), [1, 2, 3, 4]
        )

    @pytest.mark.parametrize("seed", range(3))
    def test_vec_product_identity(self, seed):
        rng = make_rng(seed)
        a, b, c = (complex_normal(rng, (3, 3)) for _ in range(3))
        lhs = linalg.vec(a @ b @ c)
        rhs = linalg.kron(c.T, a) @ linalg.vec(b)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_unvec_inverts_vec(self):
        m = complex_normal(make_rng(1), (4, 4))
        np.testing.assert_array_equal(linalg.unvec(linalg.vec(m), 4, 4), m)
        assert np.isclose(np.linalg.norm(linalg.vec(m)), np.linalg.norm(m, "fro"))

    def test_unvec_wrong_length(self):
        with pytest.raises(DimensionError):
            linalg.unvec(np.zeros(5), 2, 2)


class TestPsdSqrt:
    def test_diagonal(self):
        np.testing.assert_allclose(
            linalg.psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-12
        )

    def test_identity(self):
        np.testing.assert_allclose(linalg.psd_sqrt(np.eye(3)), np.eye(3), atol=1e-12)

    def test_round_trip(self):
        m = random_psd(3, 4)
        r = linalg.psd_sqrt(m)
        assert np.linalg.norm(r @ r - m) <= 1e-10 * np.linalg.norm(m)

    def test_tiny_negative_is_clipped(self):
        m = np.diag([1.0, -1e-14])
        np.testing.assert_allclose(linalg.psd_sqrt(m), np.diag([1.0, 0.0]))

    def test_rejects_indefinite(self):
        with pytest.raises(NotPSDError) as exc:
            linalg.psd_sqrt(np.diag([1.0, -0.5]))
        assert exc.value.min_eigenvalue == pytest.approx(-0.5)


def test_generalized_max_eig():
    a = np.diag([2.0, 1.0])
    b = np.diag([4.0, 1.0])
    assert linalg.generalized_max_eig(a, b) == pytest.approx(1.0)


def test_is_psd():
    assert linalg.is_psd(random_psd(0, 3))
    assert not linalg.is_psd(np.diag([1.0, -1.0]))


def test_embed_and_extract_block():
    block = np.array([[1.0, 2.0], [2.0, 5.0]])
    big = linalg.embed_block(block, 1, 4)
    assert big.shape == (4, 4)
    np.testing.assert_array_equal(linalg.extract_block(big, 1, 2), block)
    assert big[0, 0] == 0 and big[3, 3] == 0
    with pytest.raises(DimensionError):
        linalg.embed_block(block, 3, 4)
