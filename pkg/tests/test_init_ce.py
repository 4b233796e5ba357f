"""Tests for pilot-only channel estimation and its baselines.

For orthonormal pilots the sparse initializer decouples into per-entry
Wiener filtering with a closed form; the minimum-norm baseline is checked
against the explicit pseudoinverse and the clairvoyant MMSE against its
single-symbol scalar form.  A seeded multi-trial run pins the expected
quality ordering of the three estimators under compressed pilots.
"""

import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from gfmimo import NumericError, mmse_genie, mmv_amp, mns_estimate, nmse, qpsk_gray


def _orthonormal_pilots(k_p, m):
    idx = np.arange(k_p)
    dft = np.exp(-2j * np.pi * np.outer(idx, idx) / k_p) / np.sqrt(k_p)
    return dft[:, :m]


class TestMmvAmp:
    def test_orthonormal_pilots_reach_wiener_fixed_point(self):
        # with A^H A = I and certain activity the matched-filter statistic
        # is exact and the estimate must converge to the per-entry Wiener
        # posterior: mean gamma/(gamma+n0) * s, variance gamma*n0/(gamma+n0)
        rng = np.random.default_rng(51)
        n, m, k_p = 12, 6, 8
        a = _orthonormal_pilots(k_p, m)
        gamma = rng.uniform(0.5, 2.0, size=(n, m))
        h = np.sqrt(gamma / 2.0) * (
            rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))
        )
        n0 = 0.1
        w = np.sqrt(n0 / 2.0) * (
            rng.normal(size=(n, k_p)) + 1j * rng.normal(size=(n, k_p))
        )
        y = h @ a.T + w
        est = mmv_amp(y, a, gamma, lam=1.0, n0=n0)
        s = (a.conj().T @ y.T).T  # (N, M) decoupled observation
        assert_allclose(est.h_hat, gamma / (gamma + n0) * s, rtol=1e-6, atol=1e-9)
        assert_allclose(est.psi_h, gamma * n0 / (gamma + n0), rtol=1e-6)
        assert_allclose(est.active_posterior, 1.0, atol=1e-12)

    def test_sparse_support_recovery(self):
        rng = np.random.default_rng(52)
        n, m, k_p = 16, 6, 8
        active = np.array([True, False, True, False, False, True])
        a = np.exp(2j * np.pi * rng.random(size=(k_p, m))) / np.sqrt(k_p)
        gamma = rng.uniform(0.5, 2.0, size=(n, m))
        h = np.where(
            active[None, :],
            np.sqrt(gamma / 2.0)
            * (rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))),
            0.0,
        )
        n0 = 1e-3
        w = np.sqrt(n0 / 2.0) * (
            rng.normal(size=(n, k_p)) + 1j * rng.normal(size=(n, k_p))
        )
        y = h @ a.T + w
        est = mmv_amp(y, a, gamma, lam=0.5, n0=n0)
        assert np.all(est.active_posterior[active] > 0.9)
        assert np.all(est.active_posterior[~active] < 0.1)
        assert nmse(est.h_hat, h) < 1e-2
        assert np.all(est.psi_h >= 0.0)
        assert 1 <= est.iterations_run <= 50

    def test_zero_observation_returns_zero_estimate(self):
        rng = np.random.default_rng(53)
        n, m, k_p = 8, 5, 6
        a = np.exp(2j * np.pi * rng.random(size=(k_p, m))) / np.sqrt(k_p)
        gamma = rng.uniform(0.5, 2.0, size=(n, m))
        est = mmv_amp(np.zeros((n, k_p), dtype=complex), a, gamma, lam=0.4, n0=0.1)
        assert np.all(est.h_hat == 0.0)
        # silence is evidence against activity
        assert np.all(est.active_posterior < 0.4)

    def test_non_finite_observation_raises(self):
        rng = np.random.default_rng(54)
        n, m, k_p = 8, 5, 6
        a = np.exp(2j * np.pi * rng.random(size=(k_p, m))) / np.sqrt(k_p)
        gamma = rng.uniform(0.5, 2.0, size=(n, m))
        y = np.zeros((n, k_p), dtype=complex)
        y[0, 0] = np.inf
        with np.errstate(invalid="ignore"), pytest.raises(NumericError):
            mmv_amp(y, a, gamma, lam=0.4, n0=0.1)

    def test_input_validation(self):
        rng = np.random.default_rng(55)
        a = np.exp(2j * np.pi * rng.random(size=(6, 5))) / np.sqrt(6.0)
        gamma = np.ones((8, 5))
        y = np.zeros((8, 7), dtype=complex)  # wrong pilot length
        with pytest.raises(ValueError):
            mmv_amp(y, a, gamma, lam=0.4, n0=0.1)
        with pytest.raises(ValueError):
            mmv_amp(np.zeros((8, 6), dtype=complex), a, gamma, 0.4, 0.1, iters=0)


class TestMnsEstimate:
    def test_matches_pseudoinverse(self):
        rng = np.random.default_rng(61)
        n, m, k_p = 10, 12, 6
        a = rng.normal(size=(k_p, m)) + 1j * rng.normal(size=(k_p, m))
        y = rng.normal(size=(n, k_p)) + 1j * rng.normal(size=(n, k_p))
        h_hat = mns_estimate(y, a)
        oracle = (scipy.linalg.pinv(a) @ y.T).T
        assert_allclose(h_hat, oracle, rtol=1e-10)

    def test_fits_observations_exactly(self):
        # wide full-row-rank system: minimum-norm solution interpolates
        rng = np.random.default_rng(62)
        a = rng.normal(size=(5, 9)) + 1j * rng.normal(size=(5, 9))
        y = rng.normal(size=(7, 5)) + 1j * rng.normal(size=(7, 5))
        h_hat = mns_estimate(y, a)
        assert_allclose(h_hat @ a.T, y, rtol=1e-10, atol=1e-12)

    def test_singular_gram_raises(self):
        a = np.ones((3, 4), dtype=complex)  # identical rows
        y = np.zeros((2, 3), dtype=complex)
        with pytest.raises(NumericError):
            mns_estimate(y, a)


class TestMmseGenie:
    def test_single_symbol_scalar_formula(self):
        rng = np.random.default_rng(71)
        n, n0 = 6, 0.3
        gamma = rng.uniform(0.5, 2.0, size=(n, 1))
        x0 = (rng.normal() + 1j * rng.normal()) / np.sqrt(2.0)
        y = rng.normal(size=(n, 1)) + 1j * rng.normal(size=(n, 1))
        h_hat = mmse_genie(y, np.array([[x0]]), gamma, n0)
        oracle = gamma * np.conj(x0) * y / (gamma * abs(x0) ** 2 + n0)
        assert_allclose(h_hat, oracle, rtol=1e-12)

    def test_noiseless_limit_recovers_channel(self):
        rng = np.random.default_rng(72)
        n, m, k = 8, 6, 30
        const = qpsk_gray()
        active = np.array([True, True, False, True, False, True])
        gamma = rng.uniform(0.5, 2.0, size=(n, m))
        h = np.where(
            active[None, :],
            np.sqrt(gamma / 2.0)
            * (rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))),
            0.0,
        )
        bits = rng.integers(0, 2, size=(m * k, 2), dtype=np.uint8)
        x = np.where(active[:, None], const.map_bits(bits).reshape(m, k), 0.0)
        y = h @ x
        h_hat = mmse_genie(y, x, gamma, n0=1e-12)
        assert nmse(h_hat, h) < 1e-9

    def test_no_active_users_gives_zeros(self):
        y = np.ones((4, 10), dtype=complex)
        x = np.zeros((3, 10), dtype=complex)
        h_hat = mmse_genie(y, x, np.ones((4, 3)), n0=0.5)
        assert np.all(h_hat == 0.0)

    def test_zero_prior_variance_pins_estimate_to_zero(self):
        rng = np.random.default_rng(73)
        n, m, k = 5, 3, 12
        const = qpsk_gray()
        bits = rng.integers(0, 2, size=(m * k, 2), dtype=np.uint8)
        x = const.map_bits(bits).reshape(m, k)
        gamma = np.ones((n, m))
        gamma[:, 1] = 0.0
        h = np.sqrt(gamma / 2.0) * (
            rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))
        )
        y = h @ x + 0.01 * (rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k)))
        h_hat = mmse_genie(y, x, gamma, n0=2e-4)
        assert np.all(h_hat[:, 1] == 0.0)
        assert np.all(h_hat[:, [0, 2]] != 0.0)


class TestEstimatorOrdering:
    def test_median_quality_genie_then_sparse_then_least_squares(self):
        # compressed pilots (fewer pilot symbols than users): the sparse
        # initializer must sit between the clairvoyant bound and the
        # minimum-norm baseline in median accuracy
        n, m, k_p, k, lam, n0 = 32, 100, 14, 60, 0.2, 0.05
        const = qpsk_gray()
        scores = {"genie": [], "sparse": [], "mns": []}
        for seed in range(50):
            rng = np.random.default_rng(9000 + seed)
            a = np.exp(2j * np.pi * rng.random(size=(k_p, m))) / np.sqrt(k_p)
            gamma = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=(n, m)))
            active = rng.random(m) < lam
            h = np.where(
                active[None, :],
                np.sqrt(gamma / 2.0)
                * (rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))),
                0.0,
            )
            bits = rng.integers(0, 2, size=(m * k, 2), dtype=np.uint8)
            x_data = np.where(
                active[:, None], const.map_bits(bits).reshape(m, k), 0.0
            )
            x_full = np.concatenate([np.where(active[:, None], a.T, 0.0), x_data], 1)
            w = np.sqrt(n0 / 2.0) * (
                rng.normal(size=(n, k_p + k)) + 1j * rng.normal(size=(n, k_p + k))
            )
            y = h @ x_full + w
            y_p = y[:, :k_p]
            scores["genie"].append(nmse(mmse_genie(y, x_full, gamma, n0), h))
            scores["sparse"].append(nmse(mmv_amp(y_p, a, gamma, lam, n0).h_hat, h))
            scores["mns"].append(nmse(mns_estimate(y_p, a), h))
        med = {k_: float(np.median(v)) for k_, v in scores.items()}
        assert med["genie"] < med["sparse"] < med["mns"]
