"""Pilot-only channel estimation: the sparse initializer and baselines.

The initializer solves the multiple-measurement-vector problem
Y_p^T = A H^T + W^T (A the K_p x M effective pilot matrix, H^T row-sparse
because inactive users have all-zero channels) by iterating a matched-
filter residual update with per-entry interference tracking through the
pilot Gram matrix, and the same Bernoulli-Gaussian vector denoiser used
inside the message-passing receiver.  For orthogonal pilots the scheme
decouples and is exact in one step.

Baselines: minimum-norm least squares (the closed-form non-orthogonal
pilot solution) and the clairvoyant linear MMSE given the true transmitted
symbols and activity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bigabp import bg_vector_posterior
from .exceptions import NumericError

_DAMPING = 0.8
_MAX_ITERS = 50
_RTOL_STOP = 1e-6
_DIVERGENCE_FACTOR = 1e6
_STALL_FACTOR = 1.5


@dataclass
class InitialEstimate:
    """Channel estimate handed to the message-passing receiver.

    h_hat : (N, M) posterior mean channel.
    psi_h : (N, M) per-entry posterior error variance (>= 0).
    lambda_hat : mean posterior activity probability.
    active_posterior : (M,) per-user posterior activity probability.
    iterations_run : update sweeps actually executed.
    """

    h_hat: np.ndarray
    psi_h: np.ndarray
    lambda_hat: float
    active_posterior: np.ndarray = field(default=None)
    iterations_run: int = 0

    def __post_init__(self):
        if np.any(np.asarray(self.psi_h) < 0.0):
            raise ValueError("psi_h must be non-negative")
        if self.h_hat.shape != self.psi_h.shape:
            raise ValueError("h_hat and psi_h must have equal shapes")


def mmv_amp(y_pilot, pilots, gamma, lam, n0, iters=_MAX_ITERS) -> InitialEstimate:
    """Row-sparse recovery of H from the pilot block.

    y_pilot : (N, K_p) received pilot columns.
    pilots : (K_p, M) effective measurement matrix (the transposed,
        amplitude-scaled pilot block actually transmitted).
    gamma : (N, M) prior channel variances; lam : activity factor;
    n0 : per-sample noise power.

    Iterates matched-filter estimates S = X + A^H R / ||a||^2 with the
    residual R = Y - A X, tracks each entry's interference-plus-noise
    power through the squared Gram off-diagonals, and applies the
    Bernoulli-Gaussian row denoiser with damping 0.8.  Stops early when
    the residual change falls below 1e-6 relative; raises NumericError if
    the tracked variance blows up by more than 1e6 over its start.
    """
    y_pilot = np.asarray(y_pilot)
    a = np.asarray(pilots)
    gamma_t = np.asarray(gamma, dtype=float).T  # (M, N): rows share activity
    k_p, m = a.shape
    if y_pilot.shape[1] != k_p:
        raise ValueError("y_pilot and pilots disagree on pilot length")
    if iters < 1:
        raise ValueError("iters must be >= 1")

    y_t = y_pilot.T  # (K_p, N)
    energy = np.maximum(np.sum(np.abs(a) ** 2, axis=0), 1e-300)  # (M,)
    gram = a.conj().T @ a
    cross = np.abs(gram) ** 2
    np.fill_diagonal(cross, 0.0)

    x_hat = np.zeros((m, y_t.shape[1]), dtype=complex)
    psi = lam * gamma_t.copy()
    psi0 = float(np.mean(psi)) + 1e-300
    tau = np.full(m, 1.0 / lam)
    best = (np.inf, x_hat, psi, tau)
    prev_res = np.inf
    it = 0
    for it in range(1, iters + 1):
        resid = y_t - a @ x_hat
        res_norm = float(np.linalg.norm(resid))
        if res_norm < best[0]:
            best = (res_norm, x_hat, psi, tau)
        if res_norm > _STALL_FACTOR * best[0]:
            # interference-limited oscillation: keep the best iterate seen
            break
        s = x_hat + (a.conj().T @ resid) / energy[:, None]
        v = (n0 * energy[:, None] + cross @ psi) / energy[:, None] ** 2
        mean, var, tau = bg_vector_posterior(s, v, gamma_t, lam, axis=1)
        x_hat = _DAMPING * mean + (1.0 - _DAMPING) * x_hat
        psi = _DAMPING * var + (1.0 - _DAMPING) * psi

        if float(np.mean(psi)) > _DIVERGENCE_FACTOR * psi0 or not np.all(
            np.isfinite(x_hat)
        ):
            raise NumericError(
                f"pilot-stage recovery diverged at iteration {it}", iteration=it
            )
        if abs(res_norm - prev_res) <= _RTOL_STOP * max(res_norm, 1e-300):
            best = (res_norm, x_hat, psi, tau)
            break
        prev_res = res_norm
    else:
        resid = y_t - a @ x_hat
        res_norm = float(np.linalg.norm(resid))
        if res_norm < best[0]:
            best = (res_norm, x_hat, psi, tau)

    _, x_hat, psi, tau = best
    active_posterior = 1.0 / tau
    return InitialEstimate(
        h_hat=x_hat.T.copy(),
        psi_h=psi.T.copy(),
        lambda_hat=float(np.mean(active_posterior)),
        active_posterior=active_posterior,
        iterations_run=it,
    )


def mns_estimate(y_pilot, pilots) -> np.ndarray:
    """Minimum-norm least-squares channel estimate from the pilot block.

    With the wide effective matrix A (K_p x M), returns the minimum-norm
    solution H^T = A^H (A A^H)^{-1} Y_p^T.  Raises NumericError when the
    K_p x K_p pilot Gram is singular.
    """
    y_pilot = np.asarray(y_pilot)
    a = np.asarray(pilots)
    gram = a @ a.conj().T
    try:
        z = np.linalg.solve(gram, y_pilot.T)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular pilot Gram matrix: {exc}") from exc
    return (a.conj().T @ z).T


def mmse_genie(y, x_true_active, gamma, n0) -> np.ndarray:
    """Clairvoyant per-antenna linear MMSE channel estimate.

    y : (N, K) received block; x_true_active : (M, K) true transmitted
    matrix (zero rows for inactive users); gamma : (N, M) priors.
    Estimates only the truly active columns (zero elsewhere):
    h_n = D_n B^H (B D_n B^H + n0 I)^{-1} y_n with B = X_A^T and
    D_n = diag(gamma_{n,A}), evaluated through the equivalent
    |A| x |A| system for speed.  A zero-gamma column yields a zero
    estimate.
    """
    y = np.asarray(y)
    x = np.asarray(x_true_active)
    gamma = np.asarray(gamma, dtype=float)
    n, m = gamma.shape
    active = np.any(x != 0.0, axis=1)
    h_hat = np.zeros((n, m), dtype=complex)
    sel = np.flatnonzero(active)
    if sel.size == 0:
        return h_hat
    b = x[sel].T  # (K, |A|)
    g = b.conj().T @ b  # (|A|, |A|)
    d = gamma[:, sel]  # (N, |A|)
    # (G D_n + n0 I) z_n = B^H y_n, then h_n = d_n * z_n
    lhs = g[None, :, :] * d[:, None, :] + n0 * np.eye(sel.size)[None, :, :]
    rhs = y @ np.conj(b)  # (N, |A|)
    z = np.linalg.solve(lhs, rhs[:, :, None])[:, :, 0]
    h_hat[:, sel] = d * z
    return h_hat
