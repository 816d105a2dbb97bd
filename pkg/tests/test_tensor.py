import numpy as np
import pytest

from xva.errors import NumericError, ParameterError, ShapeError
from xva.tensor import bilinear_resize, gap, matmul, minmax_normalize, softmax_t


def scripted_matmul(a, b):
    """Independent triple-loop product used as the oracle for matmul."""
    m, k = len(a), len(a[0])
    n = len(b[0])
    out = [[0.0] * n for _ in range(m)]
    for i in range(m):
        for j in range(n):
            for t in range(k):
                out[i][j] += a[i][t] * b[t][j]
    return np.asarray(out)


class TestMatmul:
    def test_identity(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(matmul(np.eye(2), a), a)

    def test_zero_product(self):
        a = np.array([[1.0, 0.0], [0.0, 0.0]])
        b = np.array([[0.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(matmul(a, b), np.zeros((2, 2)))

    def test_against_scripted_multiply(self):
        a = [[1.0, 2.0], [3.0, 4.0]]
        b = [[5.0], [6.0]]
        expected = scripted_matmul(a, b)
        np.testing.assert_array_equal(expected, [[17.0], [39.0]])
        np.testing.assert_allclose(matmul(np.array(a), np.array(b)), expected)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))

    def test_associativity(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            a, b, c = (rng.normal(size=(4, 4)) for _ in range(3))
            left = matmul(matmul(a, b), c)
            right = matmul(a, matmul(b, c))
            np.testing.assert_allclose(left, right, atol=1e-8)

    def test_nan_rejected(self):
        bad = np.array([[np.nan, 0.0], [0.0, 1.0]])
        with pytest.raises(NumericError):
            matmul(bad, np.eye(2))


class TestSoftmaxT:
    def test_symmetry(self):
        np.testing.assert_allclose(softmax_t(np.zeros(2), 1.0), [0.5, 0.5])

    def test_closed_form(self):
        # e^{ln 2} / (e^{ln 2} + 1) = 2/3
        p = softmax_t(np.array([np.log(2.0), 0.0]), 1.0)
        np.testing.assert_allclose(p, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)

    def test_high_temperature_limit(self):
        rng = np.random.default_rng(5)
        logits = rng.normal(size=9)
        p = softmax_t(logits, 1e6)
        np.testing.assert_allclose(p, np.full(9, 1.0 / 9.0), atol=1e-4)

    def test_sums_to_one_and_preserves_argmax(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            logits = rng.normal(size=7) * 10
            t = rng.uniform(0.1, 10)
            p = softmax_t(logits, t)
            assert abs(p.sum() - 1.0) <= 1e-9
            assert np.argmax(p) == np.argmax(logits)

    def test_shift_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            logits = rng.normal(size=6)
            c = rng.normal() * 50
            np.testing.assert_allclose(softmax_t(logits, 2.0),
                                       softmax_t(logits + c, 2.0), atol=1e-9)

    def test_nonpositive_temperature(self):
        with pytest.raises(ParameterError):
            softmax_t(np.zeros(3), 0.0)
        with pytest.raises(ParameterError):
            softmax_t(np.zeros(3), -1.0)


class TestGap:
    def test_constant_map(self):
        x = np.full((4, 3, 3), 2.5)
        np.testing.assert_array_equal(gap(x), np.full(4, 2.5))

    def test_mean_of_four(self):
        x = np.array([1.0, 2.0, 3.0, 4.0]).reshape(1, 2, 2)
        np.testing.assert_allclose(gap(x), [2.5])

    def test_linearity_over_stack(self):
        rng = np.random.default_rng(8)
        maps = [rng.normal(size=(3, 4, 4)) for _ in range(5)]
        lhs = gap(np.mean(maps, axis=0))
        rhs = np.mean([gap(m) for m in maps], axis=0)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)


class TestMinmaxNormalize:
    def test_basic(self):
        np.testing.assert_allclose(minmax_normalize(np.array([0.0, 5.0, 10.0])),
                                   [0.0, 0.5, 1.0])

    def test_constant_degenerate(self):
        np.testing.assert_array_equal(minmax_normalize(np.full((3, 3), 4.2)),
                                      np.zeros((3, 3)))

    def test_symmetric_range(self):
        np.testing.assert_allclose(minmax_normalize(np.array([-1.0, 1.0])), [0.0, 1.0])


class TestBilinearResize:
    def test_identity(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_allclose(bilinear_resize(x, 2, 2), x, atol=1e-9)

    def test_constant(self):
        x = np.full((3, 5), 7.0)
        np.testing.assert_allclose(bilinear_resize(x, 9, 11), np.full((9, 11), 7.0))

    def test_align_corners_midpoint(self):
        x = np.array([[0.0, 1.0]])
        np.testing.assert_allclose(bilinear_resize(x, 1, 3), [[0.0, 0.5, 1.0]])

    def test_zero_target(self):
        with pytest.raises(ParameterError):
            bilinear_resize(np.ones((2, 2)), 0, 4)
