"""Numeric certification of the full-diversity design criteria.

Three finite certificates back the code family's diversity claims:

* ``rank_criterion_check``: every nonzero codeword difference matrix has
  full column rank.  By linearity of the upper/lower codeword halves the
  differences are themselves codewords of the difference set, so the
  check enumerates encode(delta_s) over the constellation difference set
  (exhaustively when feasible, sampled otherwise).
* ``pic_criterion_check``: for random and adversarially structured
  channels, no nonzero difference-set combination of a group's columns
  falls into the span of the other groups' columns (PIC condition);
  quantified as the projected residual ||Q_p G_p a|| normalized by
  ||h|| ||a||.
* ``pic_sic_criterion_check``: the same residual per decoding stage,
  projecting only onto still-undecoded groups (sequential order).

These are numeric certificates over finite samples, not proofs; seeds
and tolerances are recorded in the report.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .constellation import Constellation, difference_set
from .equiv_channel import build_structured, group_columns
from .errors import GuardError
from .linalg import DEFAULT_TOL, null_projector, rank
from .stbc import CodeSpec, default_grouping, encode

__all__ = [
    "CertReport",
    "rank_criterion_check",
    "det_product_oracle",
    "pic_criterion_check",
    "pic_sic_criterion_check",
    "diversity_slope",
]


@dataclass(frozen=True)
class CertReport:
    """Outcome of one certification run."""

    kind: str
    passed: bool
    trials: int
    tol: float
    min_rank: Optional[int] = None
    required_rank: Optional[int] = None
    min_residual: Optional[float] = None
    witnesses: tuple = field(default_factory=tuple)

    def lines(self) -> list:
        out = [
            f"kind={self.kind}",
            f"pass={str(self.passed).lower()}",
            f"trials={self.trials}",
            f"tol={self.tol:g}",
        ]
        if self.min_rank is not None:
            out.append(f"min_rank={self.min_rank}")
            out.append(f"required_rank={self.required_rank}")
        if self.min_residual is not None:
            out.append(f"min_residual={self.min_residual:.6e}")
        out.append(f"witnesses={len(self.witnesses)}")
        return out


def _difference_vectors(c: Constellation, length: int, mode, cap: int, rng) -> np.ndarray:
    """Nonzero vectors over the difference set, exhaustive or sampled."""
    dset = difference_set(c)
    if mode == "exhaustive":
        total = len(dset) ** length
        if total > cap:
            raise GuardError(
                f"|delta|^L = {total} exceeds cap {cap}; use sampled mode"
            )
        grids = np.meshgrid(*([dset] * length), indexing="ij")
        vecs = np.stack([g.ravel() for g in grids], axis=1)
    else:
        n = int(mode)
        vecs = rng.choice(dset, size=(n, length))
    return vecs[np.any(vecs != 0, axis=1)]


def rank_criterion_check(
    spec: CodeSpec,
    c: Optional[Constellation] = None,
    mode="exhaustive",
    cap: int = 10**7,
    tol: float = DEFAULT_TOL,
    rng_seed: int = 0,
    max_witnesses: int = 16,
) -> CertReport:
    """Minimum rank of encode(delta_s) over nonzero difference vectors.

    Passes when every difference codeword reaches full column rank
    (M rounded up to even).  ``mode`` is "exhaustive" (guarded by
    ``cap``) or an integer sample count.
    """
    c = c or spec.constellation
    rng = np.random.default_rng(rng_seed)
    vecs = _difference_vectors(c, spec.L, mode, cap, rng)
    need = spec.m_even
    min_rank = need
    witnesses = []
    chunk = 4096
    for lo in range(0, len(vecs), chunk):
        batch = vecs[lo : lo + chunk]
        mats = np.stack([encode(spec, v) for v in batch])
        sv = np.linalg.svd(mats, compute_uv=False)
        ranks = (sv > tol * sv[:, :1]).sum(axis=1)
        worst = int(ranks.min())
        if worst < min_rank:
            min_rank = worst
        for j in np.nonzero(ranks < need)[0]:
            if len(witnesses) < max_witnesses:
                witnesses.append(tuple(batch[j]))
    return CertReport(
        kind="rank",
        passed=min_rank == need,
        trials=len(vecs),
        tol=tol,
        min_rank=min_rank,
        required_rank=need,
        witnesses=tuple(witnesses),
    )


def _permuted_difference(spec: CodeSpec, delta_s) -> np.ndarray:
    """Row/column permutation pairing each half with its conjugate partner."""
    b = encode(spec, delta_s)
    if spec.M != spec.m_even:
        raise ValueError("difference-product oracle needs even M")
    t2, hm = spec.T // 2, spec.half_m
    row_perm = [i for t in range(t2) for i in (t, t2 + t)]
    col_perm = [i for j in range(hm) for i in (j, hm + j)]
    return b[np.ix_(row_perm, col_perm)]


def det_product_oracle(spec: CodeSpec, delta_s) -> tuple:
    """Cross-check of the difference determinant against its layer product.

    For the leading nonzero layer p (all of whose rotated entries must be
    nonzero), the permuted difference codeword contains an M x M block
    lower-triangular submatrix whose Gram determinant equals
    prod_j (|X_{p,j}|^2 + |X_{P+p,j}|^2)^2.  Returns (det, product).
    """
    delta_s = np.asarray(delta_s, dtype=np.complex128).ravel()
    if delta_s.size != spec.L:
        raise ValueError("delta_s has the wrong length")
    layers = delta_s.reshape(2, spec.P, spec.half_m)
    x = np.einsum("kj,ipj->ipk", spec.rotation.mat, layers)
    nz = [p for p in range(spec.P) if np.any(x[:, p, :] != 0)]
    if not nz:
        raise ValueError("delta_s is zero")
    p = nz[0]
    if np.any(x[:, p, :] == 0):
        raise ValueError(
            "leading nonzero layer has a zero rotated entry; product formula undefined"
        )
    bp = _permuted_difference(spec, delta_s)
    m = spec.m_even
    d1 = bp[2 * p : 2 * p + m, :m]
    det = float(np.linalg.det(d1.conj().T @ d1).real)
    prod = float(np.prod((np.abs(x[0, p, :]) ** 2 + np.abs(x[1, p, :]) ** 2) ** 2))
    return det, prod


def _structured_channels(m: int, rng, per_pattern: int = 3) -> list:
    """Adversarial channels: leading zeros (minimum-index case) and unit spikes."""
    out = []
    for q in range(1, m):
        for _ in range(per_pattern):
            h = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2)
            h[:q] = 0.0
            out.append(h)
    for q in range(m):
        h = np.zeros(m, dtype=np.complex128)
        h[q] = 1.0
        out.append(h)
    return out


def _residual_check(
    spec: CodeSpec,
    c: Optional[Constellation],
    n_channels: int,
    rng_seed: int,
    tol: float,
    cap: int,
    sic: bool,
    grouping=None,
    max_witnesses: int = 16,
) -> CertReport:
    c = c or spec.constellation
    rng = np.random.default_rng(rng_seed)
    dset = difference_set(c)
    hm = spec.half_m
    if len(dset) ** hm > cap:
        raise GuardError(f"|delta|^{hm} exceeds cap {cap}")
    grids = np.meshgrid(*([dset] * hm), indexing="ij")
    combos = np.stack([g.ravel() for g in grids], axis=1)
    combos = combos[np.any(combos != 0, axis=1)]
    norms_a = np.linalg.norm(combos, axis=1)

    channels = [
        (rng.standard_normal(spec.M) + 1j * rng.standard_normal(spec.M)) / np.sqrt(2)
        for _ in range(n_channels)
    ]
    channels += _structured_channels(spec.M, rng)

    grouping = grouping if grouping is not None else default_grouping(spec)
    min_res = np.inf
    witnesses = []
    for h_idx, h in enumerate(channels):
        ec = build_structured(spec, h)
        gs = group_columns(ec, grouping)
        norm_h = np.linalg.norm(h)
        for p in range(len(gs)):
            if sic:
                comp_cols = [g for g in gs[p + 1 :]]
            else:
                comp_cols = [g for q, g in enumerate(gs) if q != p]
            if comp_cols:
                q_proj = null_projector(np.hstack(comp_cols), tol)
                proj = q_proj @ gs[p]
            else:
                proj = gs[p]
            res = np.linalg.norm(proj @ combos.T, axis=0) / (norms_a * norm_h)
            worst = float(res.min())
            if worst < min_res:
                min_res = worst
            for j in np.nonzero(res <= tol)[0][: max_witnesses - len(witnesses)]:
                witnesses.append((h_idx, p, tuple(combos[j])))
    return CertReport(
        kind="pic_sic" if sic else "pic",
        passed=min_res > tol,
        trials=len(channels),
        tol=tol,
        min_residual=min_res,
        witnesses=tuple(witnesses),
    )


def pic_criterion_check(
    spec: CodeSpec,
    c: Optional[Constellation] = None,
    n_channels: int = 1000,
    rng_seed: int = 0,
    tol: float = 1e-8,
    cap: int = 10**7,
    grouping=None,
) -> CertReport:
    """PIC full-diversity condition: projected group residuals stay nonzero.

    For each channel (random plus leading-zero and single-spike patterns),
    each group p and each nonzero difference combination a, the residual
    ||Q_p G_p a|| / (||h|| ||a||) must exceed ``tol``.
    """
    return _residual_check(spec, c, n_channels, rng_seed, tol, cap, sic=False, grouping=grouping)


def pic_sic_criterion_check(
    spec: CodeSpec,
    c: Optional[Constellation] = None,
    n_channels: int = 1000,
    rng_seed: int = 0,
    tol: float = 1e-8,
    cap: int = 10**7,
    grouping=None,
) -> CertReport:
    """PIC-SIC per-stage condition, groups processed in the grouping's order.

    Defaults to the sequential order of the consecutive grouping.  Pass an
    ``interleaved_grouping`` to evaluate the conjugate-partner order
    instead (which is the one that holds for three or more layers).
    """
    return _residual_check(spec, c, n_channels, rng_seed, tol, cap, sic=True, grouping=grouping)


def diversity_slope(points, snr_lo: float, snr_hi: float) -> float:
    """Estimated diversity order from a BER curve.

    Least-squares slope of log10(BER) against SNR_dB / 10 over the points
    inside [snr_lo, snr_hi] with nonzero BER, negated.  Needs at least
    three usable points.
    """
    xs, ys = [], []
    for p in points:
        if snr_lo <= p.snr_db <= snr_hi and p.ber > 0:
            xs.append(p.snr_db / 10.0)
            ys.append(np.log10(p.ber))
    if len(xs) < 3:
        raise ValueError("need at least 3 points with nonzero BER in the window")
    slope = np.polyfit(xs, ys, 1)[0]
    return float(-slope)
