import json
import math

import numpy as np
import pytest

from fbnrcs.exceptions import InvalidParameterError
from fbnrcs.model import (
    LassoInstance,
    SensingMatrix,
    generate_sensing_matrix,
    generate_stream,
    load_stream,
    save_stream,
    spectral_norm,
    window_params,
)


class TestGenerateStream:
    def test_zero_sparsity_gives_zero_stream(self):
        st = generate_stream(1000, 0.0, 0.1, 7)
        assert not np.any(st.values)

    def test_seeded_determinism(self):
        a = generate_stream(1000, 0.1, 0.1, 7)
        b = generate_stream(1000, 0.1, 0.1, 7)
        assert a.values.tobytes() == b.values.tobytes()

    def test_different_seeds_differ(self):
        assert not np.array_equal(generate_stream(1000, 0.1, 0.1, 7).values, generate_stream(1000, 0.1, 0.1, 8).values)

    def test_million_entries_sparsity_and_band(self):
        N, sigma = 10**6, 0.1
        st = generate_stream(N, 0.1, sigma, 7)
        nz = st.values[st.values != 0]
        assert abs(nz.size / N - 0.1) <= 0.01
        # band evaluated independently (mpmath, 40 digits)
        lo, hi = 4.205217415805545582904, 8.410434831611091165808
        mags = np.abs(nz)
        assert mags.min() >= lo * (1 - 1e-12)
        assert mags.max() <= hi * (1 + 1e-12)
        assert np.any(nz < 0) and np.any(nz > 0)

    @pytest.mark.parametrize("N,S,sigma", [(0, 0.1, 0.1), (10, -0.1, 0.1), (10, 1.5, 0.1), (10, 0.1, -1.0)])
    def test_invalid(self, N, S, sigma):
        with pytest.raises(InvalidParameterError):
            generate_stream(N, S, sigma, 0)

    def test_sigma_zero_uses_unit_band(self):
        st = generate_stream(2000, 0.2, 0.0, 1)
        nz = np.abs(st.values[st.values != 0])
        assert nz.size > 0 and nz.min() >= 1.0 and nz.max() <= 2.0

    def test_file_roundtrip(self, tmp_path):
        st = generate_stream(333, 0.2, 0.05, 11)
        path = tmp_path / "s.bin"
        save_stream(st, path)
        assert path.stat().st_size == 333 * 8
        header = json.loads((tmp_path / "s.bin.json").read_text())
        assert header["format_version"] == 1 and header["N"] == 333
        back = load_stream(path)
        assert back.values.tobytes() == st.values.tobytes()
        assert (back.S, back.sigma, back.seed) == (0.2, 0.05, 11)
        # raw little-endian float64
        assert np.array_equal(np.frombuffer(path.read_bytes(), "<f8"), st.values)


class TestSensingMatrix:
    def test_smallest(self):
        A = generate_sensing_matrix(1, 1, 3)
        assert A.shape == (1, 1) and A.offset == 0

    def test_determinism(self):
        assert generate_sensing_matrix(20, 50, 3).data.tobytes() == generate_sensing_matrix(20, 50, 3).data.tobytes()

    def test_moments(self):
        m, n = 400, 1000
        d = generate_sensing_matrix(m, n, 3).data
        assert abs(d.mean()) <= 3 / math.sqrt(m * n * m)
        assert abs(d.var() / (1 / m) - 1) <= 0.05

    @pytest.mark.parametrize("m,n", [(0, 5), (5, 0), (6, 5)])
    def test_invalid(self, m, n):
        with pytest.raises(InvalidParameterError):
            generate_sensing_matrix(m, n, 0)

    def test_rotated_columns(self):
        A = generate_sensing_matrix(3, 7, 1)
        for off in range(9):
            v = A.at(off)
            for j in range(7):
                assert np.array_equal(v.toarray()[:, j], A.data[:, (j + off) % 7])

    def test_offset_zero_is_base(self):
        A = generate_sensing_matrix(3, 7, 1)
        assert np.array_equal(A.toarray(), A.data)

    def test_matvec_matches_dense(self):
        A = generate_sensing_matrix(4, 9, 2)
        rng = np.random.default_rng(0)
        x, r = rng.standard_normal(9), rng.standard_normal(4)
        for off in range(9):
            v = A.at(off)
            np.testing.assert_allclose(v.matvec(x), v.toarray() @ x, rtol=1e-13, atol=1e-13)
            np.testing.assert_allclose(v.rmatvec(r), v.toarray().T @ r, rtol=1e-13, atol=1e-13)
            idx = np.array([0, 3, 8])
            np.testing.assert_array_equal(v.columns(idx), v.toarray()[:, idx])

    def test_spectral_norm(self):
        A = generate_sensing_matrix(40, 100, 5)
        assert abs(A.spectral_norm - np.linalg.norm(A.data, 2)) <= 1e-5 * np.linalg.norm(A.data, 2)
        tall = np.random.default_rng(1).standard_normal((30, 8))
        assert spectral_norm(tall) == pytest.approx(np.linalg.norm(tall, 2), rel=1e-5)


class TestWindowParams:
    def test_noiseless(self):
        assert window_params(100, 0.1, 0.0) == (10, 40, 0.0)

    def test_large_window(self):
        s, m, lam = window_params(5000, 0.1, 0.1)
        assert (s, m) == (500, 2000)
        assert lam == pytest.approx(1.650909392199703967911533, rel=1e-14)

    def test_clamped(self):
        s, m, lam = window_params(10, 1.0, 1.0)
        assert (s, m) == (10, 10)
        assert lam == pytest.approx(8.583864105157388958544734, rel=1e-14)

    def test_empty_support_without_noise_is_reported(self):
        with pytest.raises(InvalidParameterError):
            window_params(10, 0.0, 0.0)

    def test_empty_support_with_noise_clamps_to_one(self):
        assert window_params(10, 0.0, 0.1)[1] == 1

    def test_invalid_n(self):
        with pytest.raises(InvalidParameterError):
            window_params(0, 0.1, 0.1)


class TestLassoInstance:
    def test_gamma_bound_enforced(self):
        A = SensingMatrix.from_array([[2.0, 0.0], [0.0, 1.0]])
        with pytest.raises(InvalidParameterError):
            LassoInstance(A, np.ones(2), 1.0, 0.26)
        inst = LassoInstance(A, np.ones(2), 1.0, 0.24)
        assert inst.gamma == 0.24

    def test_default_gamma(self):
        A = generate_sensing_matrix(20, 60, 0)
        inst = LassoInstance.create(A, np.zeros(20), 0.1)
        assert inst.gamma == pytest.approx(0.95 / np.linalg.norm(A.data, 2) ** 2, rel=1e-5)

    @pytest.mark.parametrize("lam", [0.0, -1.0])
    def test_lambda_positive(self, lam):
        with pytest.raises(InvalidParameterError):
            LassoInstance.create(np.eye(2), np.ones(2), lam)

    def test_shape_mismatch(self):
        with pytest.raises(InvalidParameterError):
            LassoInstance.create(np.eye(2), np.ones(3), 1.0)
