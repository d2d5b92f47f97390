"""Signal constellations, bit maps and the pairwise difference set.

Constellations are kept on the integer grid (4QAM on {-1,+1}^2, 16QAM on
{-1,+3}^2, ...) and are *not* normalized to unit energy; all transmit
power scaling is concentrated in the single sqrt(rho/mu) factor of the
channel model.  Keeping the points integral makes the difference set
exact, which the diversity certification relies on.

Bit labeling is reflected Gray per axis.  For one axis with ``b`` bits the
amplitude table is the standard Gray ruler, e.g. for 2 bits:

    00 -> -3,  01 -> -1,  11 -> +1,  10 -> +3

A label is the concatenation (I-bits, Q-bits), most significant bit
first; the label read as a binary number is the point's index in
``points``.  BPSK uses the single bit 0 -> -1, 1 -> +1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Constellation", "make_qam", "by_name", "modulate", "demap", "difference_set"]


def _gray_axis(bits: int) -> np.ndarray:
    """Amplitude per bit-pattern index for one Gray-labelled PAM axis."""
    n = 1 << bits
    # pattern index b maps to level rank gray^{-1}(b); amplitudes are -(n-1), ..., n-1
    levels = np.arange(n)
    gray = levels ^ (levels >> 1)  # rank -> gray pattern
    amp_of_pattern = np.empty(n)
    amp_of_pattern[gray] = 2 * levels - (n - 1)
    return amp_of_pattern


@dataclass(frozen=True)
class Constellation:
    """An indexed constellation with its Gray bit labels.

    ``points[k]`` is the symbol whose label is ``k`` written in
    ``bits_per_symbol`` bits (MSB first).
    """

    name: str
    points: np.ndarray
    bits_per_symbol: int
    avg_energy: float = field(init=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128)
        if len(pts) != 1 << self.bits_per_symbol:
            raise ValueError("need exactly 2**bits_per_symbol points")
        object.__setattr__(self, "points", pts)
        # re^2 + im^2 keeps integer-grid energies exact (|.| would round)
        object.__setattr__(self, "avg_energy", float(np.mean(pts.real**2 + pts.imag**2)))

    @property
    def order(self) -> int:
        return len(self.points)

    def labels(self) -> np.ndarray:
        """(order, bits_per_symbol) array of bit labels, row k = label of points[k]."""
        k = np.arange(self.order)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return (k[:, None] >> shifts[None, :]) & 1

    def nearest(self, values: np.ndarray) -> np.ndarray:
        """Label indices of the nearest constellation points (ties -> lowest index)."""
        v = np.asarray(values, dtype=np.complex128)
        d2 = np.abs(v[..., None] - self.points) ** 2
        return np.argmin(d2, axis=-1)


def make_qam(order: int) -> Constellation:
    """Square QAM (or BPSK for order 2) with per-axis Gray labels."""
    if order == 2:
        return Constellation("bpsk", np.array([-1.0 + 0j, 1.0 + 0j]), 1)
    if order not in (4, 16, 64):
        raise ValueError(f"unsupported constellation order {order}")
    bits_axis = {4: 1, 16: 2, 64: 3}[order]
    axis = _gray_axis(bits_axis)
    n = 1 << bits_axis
    # label = (I bits, Q bits); index = I_pattern * n + Q_pattern
    i_amp = np.repeat(axis, n)
    q_amp = np.tile(axis, n)
    return Constellation(f"qam{order}", i_amp + 1j * q_amp, 2 * bits_axis)


_BY_NAME = {"bpsk": 2, "qam4": 4, "qam16": 16, "qam64": 64}


def by_name(name: str) -> Constellation:
    """Constellation from its config name: bpsk, qam4, qam16, qam64."""
    try:
        return make_qam(_BY_NAME[name.lower()])
    except KeyError:
        raise ValueError(f"unknown constellation {name!r}; choose from {sorted(_BY_NAME)}")


def modulate(c: Constellation, bits) -> np.ndarray:
    """Map a flat bit sequence to symbols, ``bits_per_symbol`` bits each (MSB first)."""
    b = np.asarray(bits, dtype=np.int64).ravel()
    if b.size % c.bits_per_symbol:
        raise ValueError(
            f"bit count {b.size} not divisible by bits_per_symbol={c.bits_per_symbol}"
        )
    if b.size == 0:
        return np.zeros(0, dtype=np.complex128)
    groups = b.reshape(-1, c.bits_per_symbol)
    weights = 1 << np.arange(c.bits_per_symbol - 1, -1, -1)
    return c.points[groups @ weights]


def demap(c: Constellation, symbols) -> np.ndarray:
    """Hard demap to bits via nearest point; exact inverse of ``modulate``."""
    idx = c.nearest(np.asarray(symbols).ravel())
    shifts = np.arange(c.bits_per_symbol - 1, -1, -1)
    return ((idx[:, None] >> shifts[None, :]) & 1).ravel()


def difference_set(c: Constellation) -> np.ndarray:
    """All pairwise differences S - S' (deduplicated, zero included).

    Exact on the integer grid; symmetric (d in the set implies -d).
    """
    d = (c.points[:, None] - c.points[None, :]).ravel()
    return np.unique(d)
