"""Constellation rotations providing signal-space diversity.

A rotation here is a unitary dim x dim matrix applied to each symbol
layer before it is spread along a diagonal of the codeword.  Its design
goal is the non-vanishing property: for every nonzero vector ``a`` drawn
from the constellation difference set, every component of ``Theta a`` is
nonzero.  ``min_product_component`` certifies that property numerically
for a finite constellation.

Two families are provided:

* ``givens(theta)``: the 2x2 real rotation [[c, s], [-s, c]].  The
  shipped default angle is 1.02 rad.
* ``cyclotomic(dim, m, n_list)``: rows are powers of the K-th root of
  unity, K = m*dim, row i using exponent multiplier 1 + n_i*m (row 0
  uses multiplier 1).  Rows are scaled by 1/sqrt(dim); with the n_i
  distinct and nonzero modulo dim the result is unitary.  The shipped
  dim-4 default is (m=4, n_list=(1,2,3)), i.e. K=16 with multipliers
  {1, 5, 9, 13}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RotationMatrix",
    "givens",
    "cyclotomic",
    "default_rotation",
    "min_product_component",
]

_UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class RotationMatrix:
    dim: int
    mat: np.ndarray
    kind: str

    def __post_init__(self):
        m = np.asarray(self.mat, dtype=np.complex128)
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"rotation matrix must be {self.dim}x{self.dim}")
        gram = m.conj().T @ m
        if not np.allclose(gram, np.eye(self.dim), atol=_UNITARY_TOL):
            raise ValueError("rotation matrix is not unitary within 1e-10")
        object.__setattr__(self, "mat", m)

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.mat.imag == 0.0))


def givens(theta: float) -> RotationMatrix:
    """2x2 real rotation [[cos t, sin t], [-sin t, cos t]]."""
    c, s = math.cos(theta), math.sin(theta)
    return RotationMatrix(2, np.array([[c, s], [-s, c]], dtype=np.complex128), "givens")


def cyclotomic(dim: int, m: int, n_list) -> RotationMatrix:
    """Cyclotomic lattice generator, rows normalized to unit length.

    Entry (i, k) is zeta_K^{(k+1)(1 + n_i m)} / sqrt(dim) with K = m*dim,
    zeta_K = exp(2*pi*j/K) and n_0 = 0.  Requires len(n_list) == dim-1,
    gcd(1 + n_i*m, K) == 1 for every i, and the n_i distinct and nonzero
    mod dim (otherwise rows coincide or fail to be orthogonal).
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    n_list = tuple(int(n) for n in n_list)
    if len(n_list) != dim - 1:
        raise ValueError(f"n_list must have dim-1={dim - 1} entries, got {len(n_list)}")
    k_total = m * dim
    if k_total < 1:
        raise ValueError("m*dim must be positive")
    mults = [1] + [1 + n * m for n in n_list]
    for u in mults:
        if math.gcd(u % k_total if u % k_total else k_total, k_total) != 1:
            raise ValueError(f"exponent multiplier {u} is not coprime with K={k_total}")
    residues = [0] + [n % dim for n in n_list]
    if len(set(residues)) != dim:
        raise ValueError(
            f"n_list residues mod dim must be distinct and nonzero, got {residues[1:]}"
        )
    zeta = np.exp(2j * np.pi / k_total)
    kk = np.arange(1, dim + 1)
    mat = np.array([zeta ** (kk * u) for u in mults]) / math.sqrt(dim)
    return RotationMatrix(dim, mat, "cyclotomic")


def default_rotation(dim: int) -> RotationMatrix:
    """Shipped default rotation for a layer of the given size.

    dim 2: givens(1.02).  dim 4: cyclotomic(4, 4, (1, 2, 3)), whose
    non-vanishing property on QAM follows from the K=16 lattice.  dim 3:
    cyclotomic(3, 3, (1, 2)), certified numerically on the shipped
    constellations (no algebraic guarantee exists at K=9).  dim 1 is the
    trivial identity.  Other sizes have no certified default and must be
    configured explicitly.
    """
    if dim == 1:
        return RotationMatrix(1, np.eye(1, dtype=np.complex128), "givens")
    if dim == 2:
        return givens(1.02)
    if dim == 3:
        return cyclotomic(3, 3, (1, 2))
    if dim == 4:
        return cyclotomic(4, 4, (1, 2, 3))
    raise ValueError(
        f"no default rotation for dim {dim}; configure rotation.m / rotation.n_list"
    )


def min_product_component(
    rot: RotationMatrix, delta, cap: int = 10**7
) -> float:
    """Smallest |(Theta a)_j| over nonzero a in delta^dim and rows j.

    ``delta`` is the (finite) difference set of a constellation, zero
    included.  A strictly positive result certifies the non-vanishing
    rotation property on that constellation.  The enumeration size
    |delta|**dim is capped (default 1e7) to guard combinatorial blow-up.
    """
    d = np.unique(np.asarray(delta, dtype=np.complex128).ravel())
    total = len(d) ** rot.dim
    if total > cap:
        raise ValueError(f"|delta|^dim = {total} exceeds cap {cap}")
    grids = np.meshgrid(*([d] * rot.dim), indexing="ij")
    vecs = np.stack([g.ravel() for g in grids], axis=1)
    vecs = vecs[np.any(vecs != 0, axis=1)]
    comps = vecs @ rot.mat.T  # row j of result i: (Theta vec_i)_j
    return float(np.min(np.abs(comps)))
