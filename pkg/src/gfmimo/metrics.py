"""Figures of merit: BER with lost bits, NMSE, activity errors, throughput,
and predicted-versus-empirical error-trace comparison."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BerResult:
    """Bit error accounting over one frame.

    ber : (bit errors + lost bits) / total bits of truly active users.
    bit_errors : wrong bits among correctly detected active users.
    lost_bits : all bits of active users the detector missed.
    total_bits : bits transmitted by truly active users.
    undefined : True when no user was active (ber reported as 0).
    """

    ber: float
    bit_errors: int
    lost_bits: int
    total_bits: int
    undefined: bool = False


def ber_with_lost_bits(x_true_bits, x_hat_bits, active_true, active_hat) -> BerResult:
    """Bit error rate charging every bit of a missed active user as lost.

    Bit tensors are (M, n_bits); only truly active users enter the
    denominator.  Users flagged active but truly inactive contribute
    nothing here (they are false alarms, counted separately).
    """
    x_true_bits = np.asarray(x_true_bits)
    x_hat_bits = np.asarray(x_hat_bits)
    active_true = np.asarray(active_true, dtype=bool)
    active_hat = np.asarray(active_hat, dtype=bool)
    if x_true_bits.shape != x_hat_bits.shape:
        raise ValueError("bit tensors must have equal shapes")
    n_bits = x_true_bits.shape[1]
    detected = active_true & active_hat
    missed = active_true & ~active_hat
    bit_errors = int(np.sum(x_true_bits[detected] != x_hat_bits[detected]))
    lost_bits = int(np.sum(missed)) * n_bits
    total_bits = int(np.sum(active_true)) * n_bits
    if total_bits == 0:
        return BerResult(0.0, 0, 0, 0, undefined=True)
    return BerResult(
        ber=(bit_errors + lost_bits) / total_bits,
        bit_errors=bit_errors,
        lost_bits=lost_bits,
        total_bits=total_bits,
    )


def nmse(h_true, h_hat) -> float:
    """Frobenius error of the estimate relative to the true channel energy.

    Returns NaN when the true channel is all-zero (no active users), the
    undefined-case flag.
    """
    h_true = np.asarray(h_true)
    h_hat = np.asarray(h_hat)
    denom = float(np.sum(np.abs(h_true) ** 2))
    if denom == 0.0:
        return float("nan")
    return float(np.sum(np.abs(h_hat - h_true) ** 2)) / denom


def block_error_rate(x_true_bits, x_hat_bits, active_true, active_hat) -> float:
    """Fraction of truly active users whose frame failed (any bit error,
    or the user was missed entirely).  NaN when no user was active."""
    x_true_bits = np.asarray(x_true_bits)
    x_hat_bits = np.asarray(x_hat_bits)
    active_true = np.asarray(active_true, dtype=bool)
    active_hat = np.asarray(active_hat, dtype=bool)
    total = int(np.sum(active_true))
    if total == 0:
        return float("nan")
    any_bit_error = np.any(x_true_bits != x_hat_bits, axis=1)
    failed = active_true & (~active_hat | any_bit_error)
    return float(np.sum(failed)) / total


def effective_throughput(p_e: float, k_d: int, b: int) -> float:
    """Per-user effective throughput (1 - P_e) * K_d * b bits per frame."""
    if not 0.0 <= p_e <= 1.0:
        raise ValueError("block error rate must lie in [0, 1]")
    return (1.0 - p_e) * k_d * b


def detection_errors(active_true, active_hat) -> tuple:
    """(missed detections, false alarms) between truth and decision."""
    active_true = np.asarray(active_true, dtype=bool)
    active_hat = np.asarray(active_hat, dtype=bool)
    if active_true.shape != active_hat.shape:
        raise ValueError("activity vectors must have equal length")
    md = int(np.sum(active_true & ~active_hat))
    fa = int(np.sum(~active_true & active_hat))
    return md, fa


@dataclass
class SeTrackingReport:
    """Per-iteration empirical/predicted error ratios and their maximum
    over the final half of the iterations."""

    ratios: np.ndarray
    final_half_max: float


def se_tracking_report(predicted, empirical) -> SeTrackingReport:
    """Compare an algorithm's predicted error trace with the measured one.

    Traces must have equal length; zero predictions are floored at 1e-300
    before dividing.
    """
    predicted = np.asarray(predicted, dtype=float)
    empirical = np.asarray(empirical, dtype=float)
    if predicted.shape != empirical.shape or predicted.ndim != 1:
        raise ValueError("traces must be equal-length vectors")
    ratios = empirical / np.maximum(predicted, 1e-300)
    half = predicted.size // 2
    return SeTrackingReport(
        ratios=ratios, final_half_max=float(np.max(ratios[half:]))
    )
