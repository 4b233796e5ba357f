"""Activity-aware bilinear Gaussian belief propagation (BiGaBP).

Joint channel estimation, data detection, and user-activity detection for
grant-free uplink frames Y = H X + W.  Messages live on the factor graph
edges; each sweep performs soft interference cancellation, leave-one-out
extrinsic combining, a Bernoulli-Gaussian channel denoiser (whose sparsity
factor tau shrinks inactive users toward zero), and a Gray-QPSK symbol
denoiser with confidence annealing, with damped message updates.

Axis convention: all per-edge tensors are indexed ``[n, m, k]`` (receive
antenna, user, symbol slot) regardless of which index a message "belongs"
to; ``tau`` and other per-(user, slot) quantities are ``[m, k]``.  Pilot
slots occupy the first ``k_pilot`` columns of the frame.

The fixed-channel variant (:func:`gabp_detect`) runs the same machinery
with channel beliefs pinned (zero channel variance) and activity known,
serving both the genie bound and estimated-channel baselines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericError
from .signal import Constellation, qpsk_gray

_VAR_FLOOR = 1e-12
_EXP_CLIP = 700.0
_LLR_PSI_FLOOR = 1e-15


# ---------------------------------------------------------------------------
# state containers
# ---------------------------------------------------------------------------


@dataclass
class BeliefState:
    """Per-edge messages after some number of sweeps.

    x_hat, psi_x : (N, M, K) soft symbol replicas and variances; pilot
        columns stay pinned to the known pilots with zero variance.
    h_hat, psi_h : (N, M, K) soft channel replicas and variances (the
        replica of channel (n, m) held by symbol slot k).
    tau : (M, K) sparsity factors (>= 1; 1 means certainly active).
    k_pilot : number of pilot columns.
    iteration : sweeps completed.
    mse_trace_x, mse_trace_h : per-sweep mean message variance (the
        algorithm's own error prediction).
    emp_trace_x, emp_trace_h : per-sweep consensus squared error against
        the ground truth, when truth was supplied for instrumentation.
    diagnostics : counters (variance clamps, tau saturations).
    """

    x_hat: np.ndarray
    psi_x: np.ndarray
    h_hat: np.ndarray
    psi_h: np.ndarray
    tau: np.ndarray
    k_pilot: int
    iteration: int = 0
    mse_trace_x: list = field(default_factory=list)
    mse_trace_h: list = field(default_factory=list)
    emp_trace_x: list = field(default_factory=list)
    emp_trace_h: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


@dataclass
class SoftIc:
    """Interference-cancelled residuals and their variance budgets.

    y_tilde : (N, M, K) residual seen by edge (n, m, k) after subtracting
        every other user's soft contribution.
    v_y : (N, M, K) residual interference-plus-noise variance.
    v_x : (N, M, K) variance used when treating the residual as a symbol
        observation (adds the edge's own channel uncertainty).
    v_h : (N, M, K) variance used when treating the residual as a channel
        observation (adds the edge's own symbol uncertainty times gamma).
    """

    y_tilde: np.ndarray
    v_y: np.ndarray
    v_x: np.ndarray
    v_h: np.ndarray


@dataclass
class ExtrinsicX:
    """Leave-one-out symbol observations r_hat with variances psi_r,
    shaped (N, M, K_d) over the data columns."""

    r_hat: np.ndarray
    psi_r: np.ndarray


@dataclass
class ExtrinsicH:
    """Leave-one-out channel observations q_hat with variances psi_q,
    shaped (N, M, K); slot k's view of channel (n, m) excludes slot k."""

    q_hat: np.ndarray
    psi_q: np.ndarray


@dataclass
class DetectionResult:
    """Hard outputs of the consensus stage.

    x_hard : (M, K_d) sliced symbols (rows of users deemed inactive are
        still sliced; the caller decides what to count).
    h_final : (N, M) posterior channel estimate.
    active_hat : (M,) activity decisions (log-likelihood ratio > 0).
    llr : (M,) activity log-likelihood ratios.
    mse_trace_x, mse_trace_h : copied from the final BeliefState.
    """

    x_hard: np.ndarray
    h_final: np.ndarray
    active_hat: np.ndarray
    llr: np.ndarray
    mse_trace_x: np.ndarray
    mse_trace_h: np.ndarray


# ---------------------------------------------------------------------------
# Bernoulli-Gaussian vector denoiser (shared with the pilot-only initializer)
# ---------------------------------------------------------------------------


def bg_vector_posterior(mu, sigma, gamma, lam, axis):
    """Posterior mean/variance of h under h ~ (1-lam) delta0 + lam CN(0, Gamma)
    observed through mu = h + noise, noise ~ CN(0, Sigma), all diagonal.

    ``axis`` indexes the vector dimension sharing one activity hypothesis;
    the sparsity factor tau (posterior odds against activity, >= 1) is
    reduced over it and broadcast back.  Returns (mean, var, tau) where
    mean/var keep mu's shape and tau drops ``axis``.
    """
    sigma = np.maximum(sigma, _VAR_FLOOR)
    gamma = np.asarray(gamma, dtype=float)
    snr_gain = gamma / (sigma + gamma)
    # log-likelihood gap between the active and inactive hypotheses
    pi = np.sum(np.abs(mu) ** 2 * snr_gain / sigma, axis=axis)
    psi = np.sum(np.log1p(gamma / sigma), axis=axis)
    expo = np.clip(-(pi - psi), -_EXP_CLIP, _EXP_CLIP)
    tau = 1.0 + ((1.0 - lam) / lam) * np.exp(expo)
    tau_b = np.expand_dims(tau, axis)
    mean = snr_gain * mu / tau_b
    var = (tau_b - 1.0) * np.abs(mean) ** 2 + snr_gain * sigma / tau_b
    return mean, var, tau


def normalization_constant(mu, sigma, gamma, lam) -> float:
    """Evidence of the Bernoulli-Gaussian vector observation model.

    For mu = h + noise as in :func:`bg_vector_posterior` (length-N vectors,
    diagonal covariances), returns the marginal density value
    lam * exp(-mu^H (Sigma+Gamma)^{-1} mu) * tau / (pi^N |Sigma+Gamma|).
    """
    mu = np.asarray(mu, dtype=complex).reshape(-1)
    sigma = np.maximum(np.asarray(sigma, dtype=float).reshape(-1), _VAR_FLOOR)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    n = mu.size
    _, _, tau = bg_vector_posterior(mu, sigma, gamma, lam, axis=0)
    quad = float(np.sum(np.abs(mu) ** 2 / (sigma + gamma)))
    det = float(np.prod(sigma + gamma))
    return lam * np.exp(-quad) * float(tau) / (np.pi**n * det)


# ---------------------------------------------------------------------------
# message-passing suboperations
# ---------------------------------------------------------------------------


def soft_ic(y, state: BeliefState, gamma, n0) -> SoftIc:
    """Soft interference cancellation and per-edge variance budgets.

    Residual for edge (n, m, k) removes every user i != m via its soft
    replicas; the variance budget v_y accumulates the replicas' own
    uncertainty, and v_x / v_h add back the edge's held-out uncertainty
    for symbol / channel observation use respectively.
    """
    hx = state.h_hat * state.x_hat
    y_tilde = y[:, None, :] - (hx.sum(axis=1, keepdims=True) - hx)

    abs_h2 = np.abs(state.h_hat) ** 2
    abs_x2 = np.abs(state.x_hat) ** 2
    contrib = abs_h2 * state.psi_x + (abs_x2 + state.psi_x) * state.psi_h
    v_y = contrib.sum(axis=1, keepdims=True) - contrib + n0
    v_y = np.maximum(v_y, _VAR_FLOOR)

    v_x = v_y + state.psi_h
    v_h = v_y + np.asarray(gamma)[:, :, None] * state.psi_x
    return SoftIc(y_tilde=y_tilde, v_y=v_y, v_x=v_x, v_h=v_h)


def _loo_combine(weight, value, axis):
    """Leave-one-out precision combining along ``axis``.

    weight = |coef|^2 / v and value = conj(coef) * obs / v per edge;
    returns (mean, var) of the Gaussian combination excluding each edge's
    own term (full sum minus own term).
    """
    w_full = weight.sum(axis=axis, keepdims=True)
    v_full = value.sum(axis=axis, keepdims=True)
    prec = w_full - weight
    num = v_full - value
    prec = np.maximum(prec, _VAR_FLOOR)
    var = 1.0 / prec
    return var * num, var


def extrinsic_x(sic: SoftIc, state: BeliefState) -> ExtrinsicX:
    """Leave-one-out (over antennas) symbol observations for data columns."""
    kp = state.k_pilot
    h = state.h_hat[:, :, kp:]
    vx = sic.v_x[:, :, kp:]
    weight = np.abs(h) ** 2 / vx
    value = np.conj(h) * sic.y_tilde[:, :, kp:] / vx
    r_hat, psi_r = _loo_combine(weight, value, axis=0)
    return ExtrinsicX(r_hat=r_hat, psi_r=psi_r)


def extrinsic_h(sic: SoftIc, state: BeliefState) -> ExtrinsicH:
    """Leave-one-out (over symbol slots) channel observations, all columns."""
    x = state.x_hat
    vh = sic.v_h
    weight = np.abs(x) ** 2 / vh
    value = np.conj(x) * sic.y_tilde / vh
    q_hat, psi_q = _loo_combine(weight, value, axis=2)
    return ExtrinsicH(q_hat=q_hat, psi_q=psi_q)


def consensus_x(sic: SoftIc, state: BeliefState):
    """Full combining over all antennas (no leave-one-out): the hard-
    decision statistics.  Returns (r_hat, psi_r) shaped (M, K_d)."""
    kp = state.k_pilot
    h = state.h_hat[:, :, kp:]
    vx = sic.v_x[:, :, kp:]
    prec = (np.abs(h) ** 2 / vx).sum(axis=0)
    num = (np.conj(h) * sic.y_tilde[:, :, kp:] / vx).sum(axis=0)
    prec = np.maximum(prec, _VAR_FLOOR)
    return num / prec, 1.0 / prec


def consensus_h(sic: SoftIc, state: BeliefState):
    """Full combining over all symbol slots: (q_hat, psi_q) shaped (N, M)."""
    x = state.x_hat
    vh = sic.v_h
    prec = (np.abs(x) ** 2 / vh).sum(axis=2)
    num = (np.conj(x) * sic.y_tilde / vh).sum(axis=2)
    prec = np.maximum(prec, _VAR_FLOOR)
    return num / prec, 1.0 / prec


def denoise_x(r_hat, psi_r, tau, gamma_t):
    """Gray-QPSK posterior with confidence annealing and sparsity scaling.

    x_bar = (1/(tau*sqrt2)) * (tanh(sqrt2 gamma_t Re r / psi) +
    j tanh(sqrt2 gamma_t Im r / psi)); the variance is (1 - |x_bar|^2)/tau
    with x_bar the tau-scaled mean above.  gamma_t in (0, 1] anneals the
    likelihood confidence across sweeps; tau = 1, gamma_t = 1 recovers the
    exact QPSK posterior mean.
    """
    psi_r = np.maximum(psi_r, _VAR_FLOOR)
    arg = np.sqrt(2.0) * gamma_t / psi_r
    x_bar = (np.tanh(arg * r_hat.real) + 1j * np.tanh(arg * r_hat.imag)) / (
        np.sqrt(2.0) * tau
    )
    psi_bar = (1.0 - np.abs(x_bar) ** 2) / tau
    return x_bar, psi_bar


def denoise_h(ext: ExtrinsicH, gamma, lam):
    """Bernoulli-Gaussian channel denoiser over the antenna dimension.

    Treats each (user m, slot k) vector of extrinsic observations across
    antennas as one activity hypothesis; returns per-edge posterior means
    and variances plus the (M, K) sparsity factors tau.
    """
    mean, var, tau = bg_vector_posterior(
        ext.q_hat, ext.psi_q, np.asarray(gamma)[:, :, None], lam, axis=0
    )
    return mean, var, tau


# ---------------------------------------------------------------------------
# Algorithm driver
# ---------------------------------------------------------------------------


def _initial_state(y, x_pilot, h0, psi0, k_total) -> BeliefState:
    n = y.shape[0]
    m, k_pilot = x_pilot.shape
    x_hat = np.zeros((n, m, k_total), dtype=complex)
    psi_x = np.ones((n, m, k_total))
    x_hat[:, :, :k_pilot] = x_pilot[None, :, :]
    psi_x[:, :, :k_pilot] = 0.0
    h_hat = np.repeat(h0[:, :, None].astype(complex), k_total, axis=2)
    psi_h = np.repeat(
        np.maximum(psi0, _VAR_FLOOR)[:, :, None].astype(float), k_total, axis=2
    )
    tau = np.ones((m, k_total))
    return BeliefState(
        x_hat=x_hat, psi_x=psi_x, h_hat=h_hat, psi_h=psi_h, tau=tau,
        k_pilot=k_pilot,
    )


def run_belief_consensus(
    y,
    x_pilot,
    init,
    gamma,
    lam,
    *,
    n0,
    t_max=32,
    eta=0.5,
    x_true=None,
    h_true=None,
) -> BeliefState:
    """Run ``t_max`` damped message-passing sweeps and return the state.

    y : (N, K) received block (pilot columns first).
    x_pilot : (M, K_p) known pilot block (same symbol-power convention
        as the data symbols).
    init : initial channel estimate with ``h_hat``/``psi_h`` arrays
        (shape (N, M)), or a plain (h0, psi0) tuple.
    gamma : (N, M) prior channel variances; lam : activity factor.
    n0 : per-sample noise power of y.
    eta : damping weight of the fresh message (new = eta*fresh +
        (1-eta)*old).
    x_true, h_true : optional ground truth; when given, per-sweep
        consensus squared errors are recorded in emp_trace_x/h.

    Each sweep computes both extrinsics from the previous state, then
    updates the channel beliefs (refreshing tau), then the symbol beliefs
    using the already-computed symbol observations with the fresh tau.
    Raises NumericError if any message goes non-finite.
    """
    if hasattr(init, "h_hat"):
        h0, psi0 = init.h_hat, init.psi_h
    else:
        h0, psi0 = init
    y = np.asarray(y)
    gamma = np.asarray(gamma, dtype=float)
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    state = _initial_state(y, np.asarray(x_pilot), h0, psi0, y.shape[1])
    kp = state.k_pilot
    clamps = 0

    for t in range(1, t_max + 1):
        gamma_t = t / t_max
        sic = soft_ic(y, state, gamma, n0)
        ext_h = extrinsic_h(sic, state)
        ext_x = extrinsic_x(sic, state)

        h_bar, psi_h_bar, tau = denoise_h(ext_h, gamma, lam)
        state.h_hat = eta * h_bar + (1.0 - eta) * state.h_hat
        state.psi_h = np.maximum(
            eta * psi_h_bar + (1.0 - eta) * state.psi_h, _VAR_FLOOR
        )
        state.tau = tau

        x_bar, psi_x_bar = denoise_x(
            ext_x.r_hat, ext_x.psi_r, tau[None, :, kp:], gamma_t
        )
        state.x_hat[:, :, kp:] = (
            eta * x_bar + (1.0 - eta) * state.x_hat[:, :, kp:]
        )
        state.psi_x[:, :, kp:] = eta * psi_x_bar + (1.0 - eta) * state.psi_x[:, :, kp:]
        state.iteration = t

        state.mse_trace_x.append(float(np.mean(state.psi_x[:, :, kp:])))
        state.mse_trace_h.append(float(np.mean(state.psi_h)))
        if x_true is not None or h_true is not None:
            sic_now = soft_ic(y, state, gamma, n0)
            if x_true is not None:
                r_c, psi_c = consensus_x(sic_now, state)
                x_c, _ = denoise_x(r_c, psi_c, state.tau[:, kp:], gamma_t)
                state.emp_trace_x.append(
                    float(np.mean(np.abs(x_c - x_true) ** 2))
                )
            if h_true is not None:
                q_c, psi_qc = consensus_h(sic_now, state)
                h_c, _, _ = bg_vector_posterior(q_c, psi_qc, gamma, lam, axis=0)
                state.emp_trace_h.append(
                    float(np.mean(np.abs(h_c - h_true) ** 2))
                )

        if not (
            np.all(np.isfinite(state.x_hat))
            and np.all(np.isfinite(state.h_hat))
            and np.all(np.isfinite(state.psi_x))
            and np.all(np.isfinite(state.psi_h))
        ):
            raise NumericError(
                f"non-finite message at sweep {t}", iteration=t
            )

    state.diagnostics["variance_clamps"] = clamps
    return state


def hard_decision(
    y, state: BeliefState, gamma, lam, *, n0, constellation: Constellation | None = None
) -> DetectionResult:
    """Consensus combining, symbol slicing, posterior channel, and
    activity decision from a finished BeliefState.

    Symbols: full-sum (all antennas) observations, QPSK posterior at full
    confidence, nearest-point slicing (ties to the lowest index).
    Channel: full-sum (all slots) observations through the
    Bernoulli-Gaussian denoiser.  Activity: per-user log-likelihood ratio
    comparing |h_hat| against the estimation-error floor; positive means
    active.
    """
    if constellation is None:
        constellation = qpsk_gray()
    gamma = np.asarray(gamma, dtype=float)
    kp = state.k_pilot
    sic = soft_ic(y, state, gamma, n0)

    r_c, psi_c = consensus_x(sic, state)
    x_soft, _ = denoise_x(r_c, psi_c, state.tau[:, kp:], 1.0)
    x_hard = constellation.slice_symbols(x_soft)

    q_c, psi_qc = consensus_h(sic, state)
    h_final, psi_final, _ = bg_vector_posterior(q_c, psi_qc, gamma, lam, axis=0)

    psi = np.maximum(psi_final, _LLR_PSI_FLOOR)
    abs_h2 = np.abs(h_final) ** 2
    active_ll = -abs_h2 / (gamma + psi) - np.log(np.pi * (gamma + psi))
    inactive_ll = -abs_h2 / psi - np.log(np.pi * psi)
    llr = np.sum(active_ll - inactive_ll, axis=0)

    return DetectionResult(
        x_hard=x_hard,
        h_final=h_final,
        active_hat=llr > 0.0,
        llr=llr,
        mse_trace_x=np.asarray(state.mse_trace_x),
        mse_trace_h=np.asarray(state.mse_trace_h),
    )


# ---------------------------------------------------------------------------
# fixed-channel variant (genie bound and estimated-channel baselines)
# ---------------------------------------------------------------------------


def gabp_detect(
    y_data,
    h,
    active,
    *,
    n0,
    psi_h=None,
    t_max=32,
    eta=0.5,
    constellation: Constellation | None = None,
) -> np.ndarray:
    """Data detection with an externally fixed channel.

    Runs the same residual/extrinsic/denoise sweeps restricted to the
    ``active`` users' columns with no sparsity factor (activity is given)
    and the channel belief pinned: the estimate ``h`` never updates, and
    its per-entry error variance is ``psi_h`` (N, M), zero when omitted.
    Nonzero ``psi_h`` enters the variance budgets exactly as the channel
    uncertainty does in the joint receiver, so an imperfect estimate is
    weighed honestly instead of being trusted as exact.  Returns (M, K_d)
    hard symbols; rows of users outside ``active`` are zero.

    Supplying the true channel and activity (``psi_h`` omitted) yields the
    genie reference; supplying an estimate with its error variances yields
    the estimated-channel baseline.
    """
    if constellation is None:
        constellation = qpsk_gray()
    y_data = np.asarray(y_data)
    active = np.asarray(active, dtype=bool)
    m_total = active.size
    n, k_d = y_data.shape
    out = np.zeros((m_total, k_d), dtype=complex)
    sel = np.flatnonzero(active)
    if sel.size == 0:
        return out
    ha = np.asarray(h)[:, sel]
    m = sel.size
    if psi_h is None:
        pa = np.zeros((n, m, 1))
    else:
        pa = np.asarray(psi_h, dtype=float)[:, sel, None]

    x_hat = np.zeros((n, m, k_d), dtype=complex)
    psi_x = np.ones((n, m, k_d))
    abs_h2 = np.abs(ha) ** 2

    def _edge_variances(x_hat, psi_x):
        contrib = abs_h2[:, :, None] * psi_x + (np.abs(x_hat) ** 2 + psi_x) * pa
        v_y = np.maximum(
            contrib.sum(axis=1, keepdims=True) - contrib + n0, _VAR_FLOOR
        )
        return v_y + pa

    for t in range(1, t_max + 1):
        gamma_t = t / t_max
        hx = ha[:, :, None] * x_hat
        y_tilde = y_data[:, None, :] - (hx.sum(axis=1, keepdims=True) - hx)
        v_x = _edge_variances(x_hat, psi_x)
        weight = abs_h2[:, :, None] / v_x
        value = np.conj(ha)[:, :, None] * y_tilde / v_x
        r_hat, psi_r = _loo_combine(weight, value, axis=0)
        x_bar, psi_bar = denoise_x(r_hat, psi_r, 1.0, gamma_t)
        x_hat = eta * x_bar + (1.0 - eta) * x_hat
        psi_x = eta * psi_bar + (1.0 - eta) * psi_x

    # final consensus over all antennas, then slice
    hx = ha[:, :, None] * x_hat
    y_tilde = y_data[:, None, :] - (hx.sum(axis=1, keepdims=True) - hx)
    v_x = _edge_variances(x_hat, psi_x)
    prec = (abs_h2[:, :, None] / v_x).sum(axis=0)
    num = (np.conj(ha)[:, :, None] * y_tilde / v_x).sum(axis=0)
    r_c = num / np.maximum(prec, _VAR_FLOOR)
    psi_rc = 1.0 / np.maximum(prec, _VAR_FLOOR)
    x_soft, _ = denoise_x(r_c, psi_rc, 1.0, 1.0)
    out[sel] = constellation.slice_symbols(x_soft)
    return out
