"""Transmit-frame assembly and the Y = HX + W link.

A frame is K symbols per user: a pilot block of K_p samples (the user's
column of the pilot frame, scaled to unit per-symbol power) followed by
K_d = K - K_p Gray-QPSK data symbols.  Transmit power enters as one scalar
amplitude on the whole frame; constellation symbols themselves have unit
average energy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, dbm_to_watt
from .frames import FrameMatrix


@dataclass
class Constellation:
    """Finite symbol set with its bit labels (row q of ``bits`` labels
    ``points[q]``)."""

    points: np.ndarray  # (Q,) complex
    bits: np.ndarray  # (Q, b) uint8

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.complex128)
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        q = self.points.shape[0]
        if self.bits.shape[0] != q or q != 2 ** self.bits.shape[1]:
            raise ValueError("need 2^b points with b-bit labels")
        energy = float(np.mean(np.abs(self.points) ** 2))
        if abs(energy - 1.0) > 1e-9:
            raise ValueError(f"constellation must have unit average energy, got {energy}")

    @property
    def bits_per_symbol(self) -> int:
        return self.bits.shape[1]

    def map_bits(self, bits: np.ndarray) -> np.ndarray:
        """Bits (..., n_sym * b) -> symbols (..., n_sym)."""
        b = self.bits_per_symbol
        bits = np.asarray(bits)
        if bits.shape[-1] % b:
            raise ValueError("bit count must be a multiple of bits_per_symbol")
        groups = bits.reshape(*bits.shape[:-1], -1, b).astype(np.uint8)
        weights = 1 << np.arange(b - 1, -1, -1)
        idx = groups @ weights
        return self.points[idx]

    def slice_symbols(self, soft: np.ndarray) -> np.ndarray:
        """Nearest constellation point; exact ties go to the lowest index."""
        d = np.abs(soft[..., None] - self.points) ** 2
        return self.points[np.argmin(d, axis=-1)]

    def demap_bits(self, symbols: np.ndarray) -> np.ndarray:
        """Symbols (..., n_sym) -> hard bits (..., n_sym * b)."""
        d = np.abs(symbols[..., None] - self.points) ** 2
        idx = np.argmin(d, axis=-1)
        out = self.bits[idx]
        return out.reshape(*symbols.shape[:-1], -1)


def qpsk_gray() -> Constellation:
    """Gray-coded QPSK: bits (b0, b1) -> ((1-2*b0) + 1j*(1-2*b1)) / sqrt(2).

    Convention: (0,0) -> (+1+j)/sqrt2, (0,1) -> (+1-j)/sqrt2,
    (1,0) -> (-1+j)/sqrt2, (1,1) -> (-1-j)/sqrt2; nearest neighbours differ
    in exactly one bit.
    """
    bits = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.uint8)
    signs = 1.0 - 2.0 * bits.astype(np.float64)
    points = (signs[:, 0] + 1j * signs[:, 1]) / np.sqrt(2.0)
    return Constellation(points=points, bits=bits)


@dataclass
class TxFrame:
    """Per-user transmitted frame: pilot block, data block, and the payload."""

    x_pilot: np.ndarray  # (M, K_p) complex
    x_data: np.ndarray  # (M, K_d) complex
    data_bits: np.ndarray  # (M, K_d * b) uint8
    tx_power_dbm: float

    def __post_init__(self):
        if self.x_pilot.shape[0] != self.x_data.shape[0]:
            raise ValueError("pilot and data blocks disagree on user count")
        self.x_pilot.setflags(write=False)
        self.x_data.setflags(write=False)
        self.data_bits.setflags(write=False)

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.x_pilot, self.x_data], axis=1)


@dataclass
class RxFrame:
    """Received samples and the per-sample noise power they were drawn with."""

    y: np.ndarray  # (N, K) complex
    n0: float

    def __post_init__(self):
        if self.n0 < 0.0:
            raise ValueError("noise power must be non-negative")
        self.y.setflags(write=False)


def pilot_block(pilots: FrameMatrix) -> np.ndarray:
    """Unit per-symbol-power pilot block: user m's row is sqrt(K_p) times
    frame column m (columns are unit-norm over K_p samples)."""
    return np.sqrt(pilots.j) * pilots.entries.T.copy()


def assemble_tx(
    pilots: FrameMatrix,
    bits: np.ndarray,
    active: np.ndarray,
    power_dbm: float,
    constellation: Constellation | None = None,
) -> TxFrame:
    """Build the M x K transmit matrix for one frame.

    ``bits`` is (M, K_d * b); rows of inactive users are zeroed in the
    output (their bit payload is irrelevant and never transmitted).
    """
    if constellation is None:
        constellation = qpsk_gray()
    active = np.asarray(active, dtype=bool)
    m = pilots.l
    if bits.ndim != 2 or bits.shape[0] != m:
        raise ValueError(f"bits must be (M={m}, K_d*b), got {bits.shape}")
    if bits.shape[1] % constellation.bits_per_symbol:
        raise ValueError("bit payload length must be a multiple of bits_per_symbol")
    if active.shape != (m,):
        raise ValueError("active flag vector must have length M")

    amp = np.sqrt(dbm_to_watt(power_dbm))
    x_p = amp * pilot_block(pilots)
    x_d = amp * constellation.map_bits(bits)
    x_p[~active] = 0.0
    x_d[~active] = 0.0
    return TxFrame(
        x_pilot=x_p,
        x_data=x_d,
        data_bits=np.asarray(bits, dtype=np.uint8).copy(),
        tx_power_dbm=float(power_dbm),
    )


def transmit(tx: TxFrame, ch: ChannelRealization, seed: int) -> RxFrame:
    """Y = H X + W with W i.i.d. CN(0, n0)."""
    x = tx.x
    if ch.h.shape[1] != x.shape[0]:
        raise ValueError("channel and frame disagree on user count")
    n, k = ch.h.shape[0], x.shape[1]
    rng = np.random.default_rng(seed)
    w = np.sqrt(ch.noise_power_n0 / 2.0) * (
        rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    )
    return RxFrame(y=ch.h @ x + w, n0=ch.noise_power_n0)
