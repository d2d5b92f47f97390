"""Layered-Alamouti space-time block codes.

A code instance sends L = M_even * P information symbols over T symbol
periods and M transmit antennas, T = 2P + M_even - 2.  The codeword is

    B = [[ C1,        C2       ],
         [-conj(C2),  conj(C1) ]]

where each elementary matrix C^i (T/2 x M/2) carries P diagonal layers:
layer p of C^i is the rotated vector x = Theta s^i_p placed at entries
C^i[p-1+j, j] for j = 1..M/2 (1-based).  Layer (i, p) takes the symbol
slice s[q : q + M/2] with q = (i-1)*P*M/2 + (p-1)*M/2.

For odd M the codeword is built for M+1 antennas and the last column is
dropped (equivalent to keeping the virtual antenna silent).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .constellation import Constellation
from .rotation import RotationMatrix

__all__ = [
    "CodeSpec",
    "GroupingScheme",
    "encode",
    "rate",
    "normalization_mu",
    "default_grouping",
]


@dataclass(frozen=True)
class GroupingScheme:
    """Ordered partition of the symbol indices 0..L-1 into decode groups."""

    groups: tuple

    def __post_init__(self):
        groups = tuple(tuple(int(i) for i in g) for g in self.groups)
        object.__setattr__(self, "groups", groups)
        flat = [i for g in groups for i in g]
        if sorted(flat) != list(range(len(flat))):
            raise ValueError("groups must partition 0..L-1 without repeats")
        if any(len(g) == 0 for g in groups):
            raise ValueError("empty group")

    @property
    def sizes(self) -> tuple:
        return tuple(len(g) for g in self.groups)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @staticmethod
    def parse(text: str) -> "GroupingScheme":
        """Parse '1,2|3,4|...' (1-based indices) into a grouping."""
        groups = []
        for part in text.split("|"):
            idx = [int(tok) - 1 for tok in part.split(",") if tok.strip()]
            groups.append(tuple(idx))
        return GroupingScheme(tuple(groups))

    def __str__(self) -> str:
        return "|".join(",".join(str(i + 1) for i in g) for g in self.groups)


@dataclass(frozen=True)
class CodeSpec:
    """Parameters of one code instance.

    ``M`` transmit antennas (odd allowed), block length ``T``, rotation of
    size M_even/2 and the symbol constellation.  The layer count P is
    derived from T and validated: T = 2P + M_even - 2 with P >= 1.
    """

    M: int
    T: int
    rotation: RotationMatrix
    constellation: Constellation
    P: int = field(default=0)  # derived unless explicitly given

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("need at least 2 transmit antennas")
        m_even = self.M + (self.M % 2)
        rem = self.T - m_even + 2
        if rem < 2 or rem % 2:
            raise ValueError(
                f"T={self.T} inconsistent with M={self.M}: need T = 2P + M - 2 "
                f"(even M; M rounded up when odd) with P >= 1"
            )
        p = rem // 2
        if self.P and self.P != p:
            raise ValueError(f"P={self.P} inconsistent with T = 2P + M - 2 (expect P={p})")
        object.__setattr__(self, "P", p)
        if self.rotation.dim != m_even // 2:
            raise ValueError(
                f"rotation dim {self.rotation.dim} != M_even/2 = {m_even // 2}"
            )

    @property
    def m_even(self) -> int:
        return self.M + (self.M % 2)

    @property
    def half_m(self) -> int:
        return self.m_even // 2

    @property
    def L(self) -> int:
        """Information symbols per codeword."""
        return self.m_even * self.P

    def layer_slice(self, i: int, p: int) -> slice:
        """Symbol slice of layer (i, p), both 0-based."""
        q = i * self.P * self.half_m + p * self.half_m
        return slice(q, q + self.half_m)


def _elementary(spec: CodeSpec, x: np.ndarray) -> np.ndarray:
    """Place rotated layers x[p] along the diagonals of one C^i matrix."""
    t2 = spec.T // 2
    c = np.zeros((t2, spec.half_m), dtype=np.complex128)
    for p in range(spec.P):
        for j in range(spec.half_m):
            c[p + j, j] = x[p, j]
    return c


def encode(spec: CodeSpec, s) -> np.ndarray:
    """Encode a length-L symbol vector into the T x M codeword matrix."""
    s = np.asarray(s, dtype=np.complex128).ravel()
    if s.size != spec.L:
        raise ValueError(f"symbol vector length {s.size} != L = {spec.L}")
    layers = s.reshape(2, spec.P, spec.half_m)
    x = np.einsum("kj,ipj->ipk", spec.rotation.mat, layers)
    c1 = _elementary(spec, x[0])
    c2 = _elementary(spec, x[1])
    top = np.hstack([c1, c2])
    bot = np.hstack([-np.conj(c2), np.conj(c1)])
    b = np.vstack([top, bot])
    return b[:, : spec.M]  # odd M: silent virtual antenna column removed


def rate(spec: CodeSpec) -> Fraction:
    """Code rate in symbols per channel use, M_even*P / (2P + M_even - 2).

    This is the true symbol rate L/T for odd M as well, since all L
    symbols survive the dropped column.
    """
    return Fraction(spec.m_even * spec.P, spec.T)


def nominal_rate(spec: CodeSpec) -> Fraction:
    """Rate formula evaluated with the true antenna count M (differs for odd M)."""
    return Fraction(spec.M * spec.P, spec.T)


def normalization_mu(spec: CodeSpec) -> float:
    """Average transmitted energy per symbol period, E||B||_F^2 / T.

    For a unitary rotation this is 2*P*M*E_s/T (the odd-M column drop
    removes exactly 2*P*E_s of expected energy).
    """
    return 2.0 * spec.P * spec.M * spec.constellation.avg_energy / spec.T


def default_grouping(spec: CodeSpec) -> GroupingScheme:
    """The full-diversity grouping: 2P consecutive groups of size M_even/2."""
    h = spec.half_m
    return GroupingScheme(
        tuple(tuple(range(g * h, (g + 1) * h)) for g in range(2 * spec.P))
    )


def interleaved_grouping(spec: CodeSpec) -> GroupingScheme:
    """Default groups reordered so conjugate-partner pairs are adjacent.

    Decode order (1, P+1, 2, P+2, ...): each layer's partner group is
    decoded immediately after it.  For successive-cancellation decoding
    with P >= 3 this order keeps every stage's remaining-group span
    proper, which the plain sequential order does not (see the
    certification checks).
    """
    h = spec.half_m
    order = [g for p in range(spec.P) for g in (p, spec.P + p)]
    return GroupingScheme(
        tuple(tuple(range(g * h, (g + 1) * h)) for g in order)
    )
