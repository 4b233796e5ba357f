"""Non-iterative baseline data detection on an externally given channel."""

from __future__ import annotations

import warnings

import numpy as np

from .exceptions import NumericError
from .signal import Constellation, qpsk_gray


def zf_detect(
    y_data, h_hat, active_hat, constellation: Constellation | None = None
) -> np.ndarray:
    """Zero-forcing data detection restricted to the flagged-active users.

    X_hat = pinv(H_A) Y_d followed by nearest-point slicing; rows of users
    outside ``active_hat`` are zero.  When fewer antennas than flagged
    users make the system underdetermined, the minimum-norm pseudo-inverse
    is used and a warning is emitted; a rank-deficient H_A in the
    otherwise well-posed case raises NumericError.
    """
    if constellation is None:
        constellation = qpsk_gray()
    y_data = np.asarray(y_data)
    h_hat = np.asarray(h_hat)
    active_hat = np.asarray(active_hat, dtype=bool)
    n, k_d = y_data.shape
    m = active_hat.size
    out = np.zeros((m, k_d), dtype=complex)
    sel = np.flatnonzero(active_hat)
    if sel.size == 0:
        return out
    ha = h_hat[:, sel]
    rank = np.linalg.matrix_rank(ha)
    if n < sel.size:
        warnings.warn(
            f"zero-forcing with {sel.size} flagged users on {n} antennas: "
            "underdetermined, using the minimum-norm pseudo-inverse",
            RuntimeWarning,
            stacklevel=2,
        )
    elif rank < sel.size:
        raise NumericError(
            f"rank-deficient channel estimate (rank {rank} < {sel.size} users)"
        )
    x_soft = np.linalg.pinv(ha) @ y_data
    out[sel] = constellation.slice_symbols(x_soft)
    return out
