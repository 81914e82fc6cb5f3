import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbnrcs.exceptions import InvalidParameterError, MaxIterationsError
from fbnrcs.fbn import solve_lasso_fbn
from fbnrcs.model import (
    LassoInstance,
    SensingMatrix,
    StreamSource,
    default_gamma,
    generate_sensing_matrix,
    generate_stream,
)
from fbnrcs.rcs import (
    StreamEstimate,
    combine_estimates,
    compress_stream,
    debias,
    decompress_stream,
    load_measurements,
    residual_update,
    sample_window,
    sample_window_recursive,
    save_measurements,
    support_f1,
    warm_start,
)
from fbnrcs.solvers import make_solver


def left_rotation(n):
    """Explicit permutation ``P`` with ``(A P)[:, j] = A[:, (j + 1) % n]``."""
    P = np.zeros((n, n))
    P[(np.arange(n) + 1) % n, np.arange(n)] = 1.0
    return P


def stream_of(values, sigma=0.0):
    values = np.asarray(values, dtype=float)
    return StreamSource(values.size, 0.0, sigma, 0, values)


class TestRotation:
    @pytest.mark.parametrize("n", [1, 2, 5, 9])
    def test_views_match_explicit_permutations(self, n):
        A = generate_sensing_matrix(min(3, n), n, 0)
        dense = A.toarray()
        P = left_rotation(n)
        rng = np.random.default_rng(n)
        x, r = rng.standard_normal(n), rng.standard_normal(A.m)
        for i in range(n + 1):
            Ai = dense @ np.linalg.matrix_power(P, i)
            view = A.at(i)
            np.testing.assert_allclose(view.toarray(), Ai, atol=0)
            np.testing.assert_allclose(view.matvec(x), Ai @ x, rtol=1e-14, atol=1e-14)
            np.testing.assert_allclose(view.rmatvec(r), Ai.T @ r, rtol=1e-14, atol=1e-14)

    def test_period_is_n(self):
        P = left_rotation(7)
        np.testing.assert_array_equal(np.linalg.matrix_power(P, 7), np.eye(7))
        A = generate_sensing_matrix(3, 7, 1)
        assert A.at(7).offset == 0
        np.testing.assert_array_equal(A.at(7).toarray(), A.toarray())

    def test_columns_follow_offset(self):
        A = generate_sensing_matrix(3, 6, 2)
        view = A.at(4)
        np.testing.assert_array_equal(view.columns([0, 3]), view.toarray()[:, [0, 3]])


class TestSampling:
    def test_hand_example(self):
        A = SensingMatrix.from_array([[1.0, 2.0]])
        stream = stream_of([3.0, 4.0, 5.0])
        assert sample_window(A, stream, 0)[0] == 11.0
        assert sample_window(A, stream, 1)[0] == 13.0
        assert sample_window_recursive(np.array([11.0]), A, stream, 1)[0] == 13.0

    def test_recursion_matches_direct(self):
        n = 40
        A = generate_sensing_matrix(8, n, 3)
        stream = generate_stream(400, 0.1, 0.0, 3)
        y = sample_window(A, stream, 0)
        for i in range(1, stream.N - n + 1):
            y = sample_window_recursive(y, A, stream, i)
            direct = sample_window(A, stream, i)
            assert np.max(np.abs(y - direct)) <= 1e-10 * max(1.0, np.max(np.abs(direct)))

    def test_compress_recursive_and_direct_agree(self):
        A = generate_sensing_matrix(10, 50, 4)
        stream = generate_stream(300, 0.1, 0.1, 4)
        Yr = compress_stream(A, stream, noise_seed=9, windows=100)
        Yd = compress_stream(A, stream, noise_seed=9, windows=100, recursive=False)
        np.testing.assert_allclose(Yr, Yd, atol=1e-10)
        assert Yr.shape == (100, 10)

    def test_noise_is_reproducible_per_window(self):
        A = generate_sensing_matrix(10, 50, 4)
        stream = generate_stream(300, 0.1, 0.1, 4)
        Y = compress_stream(A, stream, noise_seed=9, windows=20)
        np.testing.assert_allclose(sample_window(A, stream, 13, noise_seed=9), Y[13], atol=1e-10)

    @pytest.mark.parametrize("windows", [0, 252])
    def test_window_count_bounds(self, windows):
        A = generate_sensing_matrix(10, 50, 4)
        with pytest.raises(InvalidParameterError):
            compress_stream(A, generate_stream(300, 0.1, 0.1, 4), windows=windows)

    def test_stream_shorter_than_window(self):
        with pytest.raises(InvalidParameterError):
            compress_stream(generate_sensing_matrix(2, 10, 0), stream_of(np.ones(5)))


class TestWarmStart:
    def test_shift_and_append_zero(self):
        np.testing.assert_array_equal(warm_start([1.0, 2.0, 3.0]), [2.0, 3.0, 0.0])

    def test_residual_update_example(self):
        np.testing.assert_array_equal(residual_update(np.array([1.0]), np.array([2.0]), np.array([5.0])), [-2.0])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 30))
    def test_residual_recursion_identity(self, seed, n):
        rng = np.random.default_rng(seed)
        m = min(3, n)
        A = generate_sensing_matrix(m, n, seed)
        i = int(rng.integers(0, 3 * n))
        x = rng.standard_normal(n)
        y0, y1 = rng.standard_normal(m), rng.standard_normal(m)
        r0 = A.at(i).matvec(x) - y0
        P = left_rotation(n)
        expected = A.at(i + 1).matvec(P.T @ x) - y1
        np.testing.assert_allclose(residual_update(r0, y0, y1), expected, atol=1e-12)
        # the warm start drops the wrapped entry
        shifted = A.at(i + 1).matvec(warm_start(x)) - y1
        np.testing.assert_allclose(expected - x[0] * A.data[:, i % n], shifted, atol=1e-12)


class TestCombine:
    def test_majority(self):
        assert combine_estimates([0.0, 1.0, 1.2], theta=0.5) == (pytest.approx(1.1), True)

    def test_minority(self):
        assert combine_estimates([0.0, 0.0, 1.0], theta=0.5) == (0.0, False)

    def test_tie_is_rejected(self):
        assert combine_estimates([0.0, 1.0], theta=0.5) == (0.0, False)

    def test_debiased_values_are_averaged(self):
        value, flag = combine_estimates([0.9, 0.8, 0.0, 0.7], [1.0, 1.2, 5.0, 1.4], theta=0.5)
        assert flag and value == pytest.approx(1.2)

    def test_empty(self):
        with pytest.raises(InvalidParameterError):
            combine_estimates([])

    def test_debias_refits_support(self):
        A = SensingMatrix.from_array(np.eye(3))
        out, mask = debias(A, np.array([2.0, 0.1, -3.0]), np.array([1.5, 0.05, -2.5]), 0.5)
        np.testing.assert_allclose(out, [2.0, 0.0, -3.0])
        np.testing.assert_array_equal(mask, [True, False, True])


def _pipeline(seed=0, N=300, n=60, m=24, S=0.05, sigma=0.05, lam=None):
    stream = generate_stream(N, S, sigma, seed)
    A = generate_sensing_matrix(m, n, seed)
    Y = compress_stream(A, stream, noise_seed=seed)
    lam = 4 * sigma * np.sqrt(2 * np.log(n)) if lam is None else lam
    return stream, A, Y, lam


class TestDecompress:
    def test_single_window_equals_plain_solve(self):
        stream, A, Y, lam = _pipeline()
        dec = decompress_stream(Y[:1], A, lam, keep_solutions=True)
        inst = LassoInstance(A, Y[0], lam, default_gamma(A))
        np.testing.assert_allclose(dec.solutions[0], solve_lasso_fbn(inst).x_hat, atol=1e-10)

    def test_noiseless_recovery(self):
        stream = generate_stream(200, 0.05, 0.0, 5)
        A = generate_sensing_matrix(40, 50, 5)
        Y = compress_stream(A, stream)
        dec = decompress_stream(Y, A, 1e-3)
        np.testing.assert_allclose(dec.estimate.value, stream.values, atol=1e-6)

    def test_warm_and_cold_agree(self):
        stream, A, Y, lam = _pipeline(1)
        warm = decompress_stream(Y, A, lam, keep_solutions=True)
        cold = decompress_stream(Y, A, lam, warm=False, keep_solutions=True)
        np.testing.assert_allclose(warm.solutions, cold.solutions, atol=1e-6)
        assert np.median(warm.iterations[1:]) < np.median(cold.iterations[1:])

    def test_recursive_residual_matches_exact(self):
        stream, A, Y, lam = _pipeline(2)
        a = decompress_stream(Y, A, lam, keep_solutions=True)
        b = decompress_stream(Y, A, lam, recursive_residual=False, keep_solutions=True)
        np.testing.assert_allclose(a.solutions, b.solutions, atol=1e-9)

    @pytest.mark.parametrize("method", ["fista", "admm"])
    def test_methods_agree(self, method):
        stream, A, Y, lam = _pipeline(3)
        a = decompress_stream(Y[:30], A, lam, keep_solutions=True)
        b = decompress_stream(Y[:30], A, lam, method=method, keep_solutions=True)
        np.testing.assert_allclose(a.solutions, b.solutions, atol=1e-6)

    def test_accumulators_match_combine(self):
        stream, A, Y, lam = _pipeline(4, N=150)
        dec = decompress_stream(Y, A, lam, keep_estimates=True)
        est = dec.estimate
        for j, pairs in enumerate(est.estimates):
            raw, deb = zip(*pairs)
            value, flag = combine_estimates(raw, deb, theta=lam / 2)
            assert flag == est.support[j]
            assert value == pytest.approx(est.value[j], abs=1e-12)
        assert est.finalized == est.count.size

    def test_failed_window_cold_starts_next(self):
        stream, A, Y, lam = _pipeline(5, N=80)
        inner = make_solver("fbn", warm_lambda="target")
        starts = []

        def flaky(inst, x0=None, residual=None):
            starts.append(None if x0 is None else np.array(x0))
            if len(starts) == 3:
                raise MaxIterationsError("forced", None)
            return inner(inst, x0, residual)

        dec = decompress_stream(Y[:6], A, lam, solver=flaky)
        assert dec.results[2] is None
        assert [f.window for f in dec.failures] == [2]
        np.testing.assert_array_equal(starts[3], 0)
        assert all(r is not None for i, r in enumerate(dec.results) if i != 2)
        assert dec.iterations[2] == -1

    def test_on_window_callback(self):
        stream, A, Y, lam = _pipeline(6, N=70)
        seen = []
        decompress_stream(Y, A, lam, on_window=lambda i, res: seen.append(i))
        assert seen == list(range(Y.shape[0]))

    def test_measurement_shape_mismatch(self):
        stream, A, Y, lam = _pipeline(6, N=70)
        with pytest.raises(InvalidParameterError):
            decompress_stream(Y[:, :-1], A, lam)


class TestSupportF1:
    def test_perfect(self):
        assert support_f1([0, 1, 0], [0, 2, 0]) == 1.0

    def test_half(self):
        assert support_f1([1, 1, 0, 0], [1, 0, 0, 1]) == 0.5

    def test_both_empty(self):
        assert support_f1([0, 0], [0, 0]) == 1.0


class TestMeasurementIO:
    def test_round_trip(self, tmp_path):
        Y = np.random.default_rng(0).standard_normal((7, 4))
        header = save_measurements(tmp_path / "y.bin", Y, n=10, lam=0.5, gamma=0.1, seed=3)
        Z, h = load_measurements(tmp_path / "y.bin")
        np.testing.assert_array_equal(Y, Z)
        assert h == header
        assert h["windows"] == 7 and h["m"] == 4

    def test_version_check(self, tmp_path):
        save_measurements(tmp_path / "y.bin", np.ones((2, 2)), n=3, lam=1, gamma=0.1, seed=0)
        side = tmp_path / "y.bin.json"
        side.write_text(side.read_text().replace('"format_version": 1', '"format_version": 99'))
        with pytest.raises(InvalidParameterError):
            load_measurements(tmp_path / "y.bin")
