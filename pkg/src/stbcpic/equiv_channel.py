"""Equivalent vector channel for the layered-Alamouti codes.

With receive-side preprocessing that keeps the first half of each
antenna's block and negate-conjugates the second half, the matrix model
Y = c * B(s) H + W becomes the linear model y = c * Hc s + w.  This
module owns that preprocessing and two independent constructions of Hc:

* ``build_structured``: the closed-form banded construction.  Per
  receive antenna, column group (i, p) is the block
  [0; diag(h_i) Theta; 0] stacked on top of its +/- conjugate partner,
  where h_1/h_2 are the first/last M/2 channel coefficients.  Antenna
  blocks are stacked antenna-major (all T rows of antenna 0 first).
* ``build_probe``: a structure-free oracle that derives column l as the
  preprocessed noiseless response to the l-th unit symbol vector.  The
  composite map s -> preprocess(B(s) H) is complex-linear (the encoder's
  conjugate-linear lower half is conjugated again by the preprocessing),
  so the two builders must agree to machine precision.

Odd M is handled by a zero channel row for the silent virtual antenna.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stbc import CodeSpec, GroupingScheme, default_grouping, encode

__all__ = [
    "EquivalentChannel",
    "build_structured",
    "build_probe",
    "preprocess_rx",
    "group_columns",
]

PREPROCESS_DESC = "per antenna: keep y1, replace y2 by -conj(y2); stack antennas"


@dataclass(frozen=True)
class EquivalentChannel:
    """TN x L equivalent channel with its column grouping."""

    Hc: np.ndarray
    grouping: GroupingScheme
    preprocess: str = PREPROCESS_DESC

    @property
    def rows(self) -> int:
        return self.Hc.shape[0]

    @property
    def L(self) -> int:
        return self.Hc.shape[1]


def _padded_channel(spec: CodeSpec, H) -> np.ndarray:
    """Channel as an (M_even, N) array with a zero row for odd M."""
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim == 1:
        H = H[:, None]
    if H.shape[0] != spec.M:
        raise ValueError(f"channel has {H.shape[0]} rows, expected M={spec.M}")
    if spec.m_even != spec.M:
        H = np.vstack([H, np.zeros((1, H.shape[1]), dtype=np.complex128)])
    return H


def build_structured(spec: CodeSpec, H) -> EquivalentChannel:
    """Closed-form equivalent channel for an M x N realization."""
    Hp = _padded_channel(spec, H)
    n_rx = Hp.shape[1]
    t2, hm, P = spec.T // 2, spec.half_m, spec.P
    theta = spec.rotation.mat
    def banded(dense, sign):
        cols = []
        for p in range(P):
            g = np.zeros((t2, hm), dtype=np.complex128)
            g[p : p + hm, :] = dense if sign > 0 else -dense
            cols.append(g)
        return np.hstack(cols)

    blocks = []
    for n in range(n_rx):
        h1 = Hp[:hm, n]
        h2 = Hp[hm:, n]
        # the preprocessed second half is linear in s with the rotated
        # symbols entering through diag(conj h) Theta: conjugate the
        # channel coefficients only, never the rotation
        top = np.hstack([banded(h1[:, None] * theta, 1), banded(h2[:, None] * theta, 1)])
        bot = np.hstack(
            [banded(np.conj(h2)[:, None] * theta, -1), banded(np.conj(h1)[:, None] * theta, 1)]
        )
        blocks.append(np.vstack([top, bot]))
    return EquivalentChannel(np.vstack(blocks), default_grouping(spec))


def preprocess_rx(spec: CodeSpec, Y) -> np.ndarray:
    """Stack per-antenna [y1; -conj(y2)] halves into one length-TN vector.

    The transform has unit-modulus entries, so CN(0,1) noise statistics
    are preserved.
    """
    Y = np.asarray(Y, dtype=np.complex128)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != spec.T:
        raise ValueError(f"received block has {Y.shape[0]} rows, expected T={spec.T}")
    t2 = spec.T // 2
    per_antenna = np.vstack([Y[:t2, :], -np.conj(Y[t2:, :])])
    return per_antenna.T.reshape(-1)  # antenna-major


def build_probe(spec: CodeSpec, H) -> EquivalentChannel:
    """Oracle construction: column l = preprocess(encode(e_l) @ H)."""
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim == 1:
        H = H[:, None]
    cols = []
    for l in range(spec.L):
        e = np.zeros(spec.L, dtype=np.complex128)
        e[l] = 1.0
        cols.append(preprocess_rx(spec, encode(spec, e) @ H))
    return EquivalentChannel(np.stack(cols, axis=1), default_grouping(spec))


def group_columns(ec: EquivalentChannel, g: GroupingScheme) -> list:
    """Column submatrices of Hc in group order."""
    if g.total != ec.L:
        raise ValueError(f"grouping covers {g.total} symbols, Hc has L={ec.L}")
    return [ec.Hc[:, list(idx)] for idx in g.groups]
