import numpy as np
import pytest

from poolkit.errors import ContractError, DegenerateMassError, ShapeError
from poolkit.matcore import (
    col_softmax,
    conv2d_same,
    eta_norm,
    jacobi_eigh,
    l2_normalize,
    layernorm_cols,
    matmul,
    sigmoid,
)


class TestMatmul:
    def test_identity_left(self):
        m = np.arange(12.0).reshape(3, 4)
        np.testing.assert_array_equal(matmul(np.eye(3), m), m)

    def test_hand_product(self):
        out = matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[1.0], [1.0]]))
        np.testing.assert_array_equal(out, [[3.0], [7.0]])

    def test_identity_right_exact(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(5, 4))
        np.testing.assert_array_equal(matmul(a, np.eye(4)), a)

    def test_shape_error_names_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.zeros((2, 3)), np.zeros((2, 2)))

    def test_distributes_over_add(self):
        rng = np.random.default_rng(1)
        a, b, c = (rng.normal(size=(4, 4)) for _ in range(3))
        np.testing.assert_allclose(a @ (b + c), a @ b + a @ c, atol=1e-12)


class TestColSoftmax:
    def test_uniform_on_zeros(self):
        out = col_softmax(np.zeros((4, 1)))
        np.testing.assert_allclose(out, 0.25)

    def test_hand_values(self):
        out = col_softmax(np.array([[np.log(2.0)], [0.0]]), 1.0)
        np.testing.assert_allclose(out[:, 0], [2.0 / 3.0, 1.0 / 3.0], atol=1e-15)

    def test_no_overflow(self):
        out = col_softmax(np.array([[1000.0], [0.0]]), 1.0)
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out[:, 0], [1.0, 0.0], atol=1e-300)

    def test_columns_sum_to_one(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            s = rng.uniform(-1e6, 1e6, size=(7, 3))
            out = col_softmax(s, 3.0)
            np.testing.assert_allclose(out.sum(axis=0), 1.0, atol=1e-12)

    def test_rejects_bad_scale(self):
        with pytest.raises(ContractError):
            col_softmax(np.zeros((2, 1)), 0.0)


class TestEtaNorm:
    def test_cols(self):
        np.testing.assert_allclose(eta_norm(np.array([[1.0], [3.0]]), "cols"),
                                   [[0.25], [0.75]])

    def test_rows(self):
        np.testing.assert_allclose(eta_norm(np.array([[2.0, 2.0]]), "rows"),
                                   [[0.5, 0.5]])

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        a = rng.uniform(0.1, 2.0, size=(5, 6))
        once = eta_norm(a, "rows")
        np.testing.assert_allclose(eta_norm(once, "rows"), once, atol=1e-12)

    def test_zero_slice_names_index(self):
        a = np.array([[1.0, 1.0], [0.0, 0.0]])
        with pytest.raises(DegenerateMassError, match="row 1"):
            eta_norm(a, "rows")


class TestLayernormCols:
    def test_two_point_column(self):
        out = layernorm_cols(np.array([[1.0], [-1.0]]), eps=1e-5)
        np.testing.assert_allclose(out[:, 0], [0.999995, -0.999995], atol=1e-6)

    def test_constant_column_is_zero(self):
        out = layernorm_cols(np.full((3, 1), 4.2))
        np.testing.assert_array_equal(out, 0.0)

    def test_affine_invariance(self):
        rng = np.random.default_rng(4)
        x = rng.normal(scale=5.0, size=(6, 5))
        np.testing.assert_allclose(layernorm_cols(2.5 * x + 3.0),
                                   layernorm_cols(x), atol=1e-6)


class TestJacobiEigh:
    def test_diagonal(self):
        lam, vecs = jacobi_eigh(np.diag([3.0, 7.0]))
        np.testing.assert_allclose(lam, [3.0, 7.0])
        np.testing.assert_allclose(np.abs(vecs), np.eye(2), atol=1e-12)

    def test_hand_eigenvalues(self):
        lam, _ = jacobi_eigh(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(lam, [1.0, 3.0], atol=1e-12)

    def test_reconstruction_and_orthonormality(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            k = rng.integers(2, 17)
            a = rng.normal(size=(k, k))
            a = 0.5 * (a + a.T)
            lam, vecs = jacobi_eigh(a)
            np.testing.assert_allclose(vecs @ np.diag(lam) @ vecs.T, a, atol=1e-10)
            np.testing.assert_allclose(vecs.T @ vecs, np.eye(k), atol=1e-10)
            assert np.all(np.diff(lam) >= -1e-12)

    def test_rejects_asymmetric(self):
        with pytest.raises(ContractError):
            jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestSmallHelpers:
    def test_sigmoid_at_zero(self):
        assert sigmoid(np.zeros(3)).tolist() == [0.5, 0.5, 0.5]

    def test_l2_normalize(self):
        np.testing.assert_allclose(np.linalg.norm(l2_normalize(np.array([3.0, 4.0]))), 1.0)
        with pytest.raises(DegenerateMassError):
            l2_normalize(np.zeros(2))

    def test_conv2d_same_identity_kernel(self):
        rng = np.random.default_rng(6)
        img = rng.normal(size=(4, 5))
        kernel = np.zeros((3, 3))
        kernel[1, 1] = 1.0
        np.testing.assert_allclose(conv2d_same(img, kernel), img)
