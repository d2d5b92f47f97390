"""Receivers for the equivalent linear model y = scale * Hc s + w.

All detectors are pure functions of (equivalent channel, received vector,
constellation, scale) and return the decided symbol vector.  ``scale`` is
sqrt(rho/mu) from the transmit model.

* ``ml_decode``: exact maximum likelihood.  Small search spaces are
  enumerated directly (lexicographic candidate order, first minimum
  wins).  For the 4-antenna two-layer code with a real 2x2 rotation the
  same exact minimum is found by a conditional search that exploits the
  code's Alamouti-pair Gram structure, which keeps 16QAM and 64QAM
  tractable; see ``_ml_structured``.
* ``zf_decode`` / ``mmse_decode``: linear estimate then per-symbol
  quantization.
* ``blast_decode``: ZF-SIC with max post-detection SNR ordering
  (smallest pseudo-inverse row norm first).
* ``pic_group_decode``: per group, project the received vector onto the
  orthogonal complement of all other groups' columns, then ML-decode the
  group.  Rank-deficient complements are handled by the projector's
  singular-value cutoff.
* ``pic_sic_decode``: same, but groups are decoded in order, each decoded
  group's contribution subtracted, and only still-undecoded groups are
  projected out.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .constellation import Constellation
from .errors import GuardError, RankDeficiencyError
from .linalg import DEFAULT_TOL, null_projector, pinv
from .rotation import RotationMatrix
from .stbc import GroupingScheme
from .equiv_channel import EquivalentChannel

__all__ = [
    "DetectorConfig",
    "ml_decode",
    "zf_decode",
    "mmse_decode",
    "blast_decode",
    "pic_group_decode",
    "pic_sic_decode",
    "complexity_estimate",
]

DETECTOR_KINDS = ("ml", "zf", "mmse", "blast", "pic", "pic_sic")


@dataclass(frozen=True)
class DetectorConfig:
    """Which receiver to run and its knobs."""

    kind: str
    grouping: Optional[GroupingScheme] = None  # pic / pic_sic only
    tol: float = DEFAULT_TOL
    guard_bits: int = 24
    allow_rank_deficient: bool = False

    def __post_init__(self):
        if self.kind not in DETECTOR_KINDS:
            raise ValueError(f"unknown detector {self.kind!r}; choose from {DETECTOR_KINDS}")


def _quantize(c: Constellation, values: np.ndarray) -> np.ndarray:
    return c.points[c.nearest(values)]


@lru_cache(maxsize=64)
def _label_grid(order: int, n: int) -> np.ndarray:
    """(order**n, n) label matrix in lexicographic order, first symbol major."""
    idx = np.arange(order**n)
    cols = [(idx // order ** (n - 1 - pos)) % order for pos in range(n)]
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# maximum likelihood


def _ml_exhaustive(Hc, y, c: Constellation, scale, chunk=1 << 15):
    """Plain enumeration over A^L; returns label indices of the global minimum."""
    L = Hc.shape[1]
    order = c.order
    total = order**L
    best_metric = np.inf
    best_labels = None
    scaled_ht = scale * Hc.T  # (L, TN)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total))
        labels = np.stack(
            [(idx // order ** (L - 1 - pos)) % order for pos in range(L)], axis=1
        )
        cand = c.points[labels]  # (n, L)
        resid = y[None, :] - cand @ scaled_ht
        metrics = np.einsum("ij,ij->i", resid, resid.conj()).real
        j = int(np.argmin(metrics))
        if metrics[j] < best_metric:
            best_metric = float(metrics[j])
            best_labels = labels[j]
    return best_labels


@lru_cache(maxsize=16)
def _pair_table_cached(points_key, theta_key, order, dim):
    points = np.frombuffer(points_key, dtype=np.complex128)
    theta = np.frombuffer(theta_key, dtype=np.complex128).reshape(dim, dim)
    labels = _label_grid(order, 2)
    pairs = points[labels]  # (K, 2)
    x = pairs @ theta.T  # rotated layer values
    return labels, pairs, x


def _pair_table(c: Constellation, rot: RotationMatrix):
    return _pair_table_cached(c.points.tobytes(), rot.mat.tobytes(), c.order, rot.dim)


def _structured_applicable(L: int, rot: Optional[RotationMatrix]) -> bool:
    return rot is not None and rot.dim == 2 and rot.is_real and L == 8


class _LineEnvelope:
    """Lower envelope of lines b_k - s_k * r (s_k >= 0) on r >= 0.

    Built with the convex-hull trick; evaluation is a searchsorted plus
    one fused multiply-add, so large query batches are cheap.
    """

    def __init__(self, intercepts, downslopes):
        s = np.asarray(downslopes, dtype=np.float64)
        b = np.asarray(intercepts, dtype=np.float64)
        # Pareto prefilter: a line is irrelevant on r >= 0 if another is both
        # steeper and lower; running minimum over steepness-descending order
        order = np.lexsort((b, -s))
        s, b = s[order], b[order]
        cm = np.minimum.accumulate(b)
        first = np.ones(len(b), dtype=bool)
        first[1:] = b[1:] < cm[:-1]
        s, b = s[first], b[first]  # steepness strictly decreasing, b increasing
        # scan from least steep to steepest, keeping the lower hull
        hull_a, hull_b, hull_x = [], [], []
        for ai, bi in zip(-s[::-1], b[::-1]):
            while hull_a:
                x = (bi - hull_b[-1]) / (hull_a[-1] - ai)  # intersection with top
                if x <= hull_x[-1]:
                    hull_a.pop(), hull_b.pop(), hull_x.pop()
                else:
                    hull_x.append(x)
                    break
            if not hull_a:
                hull_x.append(-np.inf)
            hull_a.append(ai)
            hull_b.append(bi)
        self.a = np.array(hull_a)
        self.b = np.array(hull_b)
        self.starts = np.array(hull_x)

    def __call__(self, r):
        j = np.searchsorted(self.starts, r, side="right") - 1
        return self.b[j] + self.a[j] * r


class _SectorEnvelopes:
    """Sector-wise lower bound of min_k (t_k + Re(conj(v_k) q)) over q.

    The plane is split into ``n_sectors`` angular sectors; within sector j
    the bound is the line envelope of t_k + |v_k| * cmin_{j,k} * r with
    cmin the worst-case cosine between v_k and any direction in the
    sector.  Far tighter than the isotropic bound t_k - |v_k| |q|.
    """

    def __init__(self, t_tab, v, n_sectors=8):
        self.n = n_sectors
        width = 2.0 * np.pi / n_sectors
        phi = np.angle(v)
        mag = np.abs(v)
        lows = -np.pi + width * np.arange(n_sectors)
        d_lo = np.abs(_wrap_angle(phi[None, :] - lows[:, None]))
        d_hi = np.abs(_wrap_angle(phi[None, :] - (lows[:, None] + width)))
        worst = np.maximum(d_lo, d_hi)
        # if the antipode of v_k falls inside the sector the cosine hits -1
        anti = np.abs(_wrap_angle(phi[None, :] + np.pi - (lows[:, None] + width / 2))) <= width / 2
        cmin = np.where(anti, -1.0, np.cos(worst))
        self.envs = [_LineEnvelope(t_tab, -mag * cmin[j]) for j in range(n_sectors)]
        self.width = width

    def __call__(self, q):
        r = np.abs(q)
        sec = ((np.angle(q) + np.pi) / self.width).astype(np.int64) % self.n
        out = np.empty(r.shape)
        for j in range(self.n):
            sel = sec == j
            if np.any(sel):
                out[sel] = self.envs[j](r[sel])
        return out


def _wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


class _StructuredML:
    """Exact ML for the (M=4, P=2, real 2x2 rotation) code family.

    In rotated layer coordinates x = (I_4 kron Theta) s the Gram matrix of
    the equivalent channel collapses to diagonal blocks plus a single
    2x2 coupling X between the odd-position coordinates of layer pairs
    (1,3) and the even-position coordinates of pairs (2,4).  The ML
    metric then splits as

        const + sum_p T_p(s_p) + 2 c^2 Re( x1b* q1 + x3b* q2 ),
        (q1, q2) = X (x2a, x4a)^t,

    with per-group candidate tables T_p, so exact ML is a search over the
    (s2, s4) grid with separable inner minimizations over s1 and s3.
    Grid combos are pruned with the exact bound
    min_k(T_k + 2c^2 Re(xb_k* q)) >= env(|q|) evaluated per combo against
    an upper bound from a cheap linear decision, so full evaluation is
    rarely needed.  The Gram pattern is verified numerically on every call.
    """

    def __init__(self, Hc, scale, c: Constellation, rot: RotationMatrix):
        kmat = Hc @ np.kron(np.eye(4), rot.mat).conj().T
        gram = kmat.conj().T @ kmat
        self._setup(kmat, gram, scale, c, rot)

    @classmethod
    def from_parts(cls, kmat, gram, scale, c: Constellation, rot: RotationMatrix):
        """Build from precomputed K = Hc (I kron Theta)^H and its Gram."""
        obj = object.__new__(cls)
        obj._setup(kmat, gram, scale, c, rot)
        return obj

    def _setup(self, kmat, gram, scale, c, rot):
        labels, pairs, x = _pair_table(c, rot)
        self.labels, self.pairs = labels, pairs
        self.xa, self.xb = np.ascontiguousarray(x[:, 0]), np.ascontiguousarray(x[:, 1])
        self.order = c.order
        self.scale = float(scale)
        self.c2 = self.scale**2
        self._check_gram(gram)
        self.alpha = float(np.mean(gram.real[[0, 2, 4, 6], [0, 2, 4, 6]]))
        self.beta = float(np.mean(gram.real[[1, 3, 5, 7], [1, 3, 5, 7]]))
        self.X = np.array([[gram[1, 2], gram[1, 6]], [gram[5, 2], gram[5, 6]]])
        self.kmat = kmat

    @staticmethod
    def _check_gram(gram):
        ref = float(np.max(np.abs(gram))) or 1.0
        mask = np.zeros((8, 8), dtype=bool)
        mask[np.arange(8), np.arange(8)] = True
        for i, j in ((1, 2), (1, 6), (5, 2), (5, 6)):
            mask[i, j] = mask[j, i] = True
        off = np.abs(gram[~mask])
        if off.size and off.max() > 1e-8 * ref:
            raise GuardError("equivalent channel lacks the Alamouti-pair Gram structure")

    def _tables(self, mf):
        quad = self.c2 * (self.alpha * np.abs(self.xa) ** 2 + self.beta * np.abs(self.xb) ** 2)
        xac, xbc = self.xa.conj(), self.xb.conj()
        t = [
            quad - 2 * self.scale * (xac * mf[2 * g] + xbc * mf[2 * g + 1]).real
            for g in range(4)
        ]
        return t  # order: groups (s1, s2, s3, s4) -> mf pairs (w,b),(g,v),(w2,b2),(g2,v2)

    def _pair_cost(self, t_tab, q):
        """min and argmin over candidates k of t_tab[k] + 2 c^2 Re(conj(xb_k) q)."""
        vals = t_tab + 2 * self.c2 * (self.xb.conj() * q).real
        k = int(np.argmin(vals))
        return float(vals[k]), k

    def decode_labels(self, y, ub_labels=None, mf=None):
        if mf is None:
            mf = self.kmat.conj().T @ y
        t1, t2, t3, t4 = self._tables(mf)
        xa, xb = self.xa, self.xb
        c2 = self.c2
        x11, x12 = self.X[0]
        x21, x22 = self.X[1]

        # upper bound from a hint candidate (any valid labels); fall back to
        # the separable minimum ignoring the coupling, which is still a valid
        # candidate once its true metric is evaluated.
        if ub_labels is None:
            k_hint = [int(np.argmin(t)) for t in (t1, t2, t3, t4)]
        else:
            w = np.asarray(ub_labels).reshape(4, 2)
            k_hint = [int(w[g, 0]) * self.order + int(w[g, 1]) for g in range(4)]
        q1h = x11 * xa[k_hint[1]] + x12 * xa[k_hint[3]]
        q2h = x21 * xa[k_hint[1]] + x22 * xa[k_hint[3]]
        ub = (
            t1[k_hint[0]]
            + t2[k_hint[1]]
            + t3[k_hint[2]]
            + t4[k_hint[3]]
            + 2 * c2 * (xb[k_hint[0]].conj() * q1h + xb[k_hint[2]].conj() * q2h).real
        )

        # grid lower bound: the coupled term satisfies
        #   min_k (T_k + 2c^2 Re(xb_k* q)) >= env(|q|)  (env = line envelope),
        # and |q1| <= min over either axis of |X11 xa_k2| + |X12| max|xa|
        # (resp. the k4-sided bound), giving a separable-per-axis grid bound.
        xb_abs = 2.0 * c2 * np.abs(xb)
        xa_abs = np.abs(xa)
        xa_max = float(xa_abs.max())
        env1 = _LineEnvelope(t1, xb_abs)
        env3 = _LineEnvelope(t3, xb_abs)
        k_sq = self.order**2
        lb_m1 = np.maximum(
            env1(abs(x11) * xa_abs + abs(x12) * xa_max)[:, None],
            env1(abs(x11) * xa_max + abs(x12) * xa_abs)[None, :],
        )
        lb_m3 = np.maximum(
            env3(abs(x21) * xa_abs + abs(x22) * xa_max)[:, None],
            env3(abs(x21) * xa_max + abs(x22) * xa_abs)[None, :],
        )
        sep = t2[:, None] + t4[None, :]
        keep = np.nonzero((sep + lb_m1 + lb_m3).ravel() <= ub + 1e-9)[0]

        # refine with direction-aware envelopes at the actual per-combo q
        k2s, k4s = keep // k_sq, keep % k_sq
        q1 = x11 * xa[k2s] + x12 * xa[k4s]
        q2 = x21 * xa[k2s] + x22 * xa[k4s]
        sep_k = t2[k2s] + t4[k4s]
        v_planes = 2 * c2 * xb
        lb2 = sep_k + _SectorEnvelopes(t1, v_planes)(q1) + _SectorEnvelopes(t3, v_planes)(q2)
        inner = np.nonzero(lb2 <= ub + 1e-9)[0]

        # exact evaluation, cheapest refined bounds first with early cutoff
        inner = inner[np.argsort(lb2[inner], kind="stable")]
        planes = 2 * c2 * np.column_stack([xb.real, xb.imag])
        best = (ub, k_hint[1] * k_sq + k_hint[3])
        for lo in range(0, inner.size, 2048):
            part = inner[lo : lo + 2048]
            if lb2[part[0]] > best[0] + 1e-9:
                break
            m1 = np.min(
                np.column_stack([q1[part].real, q1[part].imag]) @ planes.T + t1[None, :], axis=1
            )
            m3 = np.min(
                np.column_stack([q2[part].real, q2[part].imag]) @ planes.T + t3[None, :], axis=1
            )
            totals = sep_k[part] + m1 + m3
            j = int(np.argmin(totals))
            if totals[j] < best[0]:
                best = (float(totals[j]), int(keep[part[j]]))
        combo = best[1]
        k2, k4 = combo // k_sq, combo % k_sq
        q1w = x11 * xa[k2] + x12 * xa[k4]
        q2w = x21 * xa[k2] + x22 * xa[k4]
        _, k1 = self._pair_cost(t1, q1w)
        _, k3 = self._pair_cost(t3, q2w)
        return np.concatenate([self.labels[k] for k in (k1, k2, k3, k4)])


def ml_decode(
    ec: EquivalentChannel,
    y,
    c: Constellation,
    scale: float,
    rotation: Optional[RotationMatrix] = None,
    guard_bits: int = 24,
) -> np.ndarray:
    """Exact ML decision over A^L; ties go to the lowest candidate index.

    Enumerable inputs (L*log2|A| <= guard_bits) use plain enumeration.
    Beyond that, the structured exact search is used when ``rotation``
    is supplied and the code shape supports it (L=8, real 2x2 rotation);
    its conditioning grid needs 4*log2|A| <= guard_bits.
    """
    y = np.asarray(y, dtype=np.complex128).ravel()
    L = ec.L
    bits = L * _log2int(c.order)
    structured_ok = _structured_applicable(L, rotation) and 4 * _log2int(c.order) <= guard_bits
    if structured_ok and bits > 16:
        dec = _StructuredML(ec.Hc, scale, c, rotation)
        labels = dec.decode_labels(y, ub_labels=_zf_labels(ec, y, c, scale))
        return c.points[labels]
    if bits <= guard_bits:
        return c.points[_ml_exhaustive(ec.Hc, y, c, scale)]
    if structured_ok:
        dec = _StructuredML(ec.Hc, scale, c, rotation)
        return c.points[dec.decode_labels(y, ub_labels=_zf_labels(ec, y, c, scale))]
    raise GuardError(
        f"ML search space 2^{bits} exceeds guard 2^{guard_bits} and no structured path applies"
    )


def _log2int(n: int) -> int:
    return int(n).bit_length() - 1


# ---------------------------------------------------------------------------
# linear receivers


def _rank_ok(A, tol):
    """Full column rank test (a wide matrix never qualifies)."""
    if A.shape[0] < A.shape[1]:
        return False
    s = np.linalg.svd(A, compute_uv=False)
    return bool(s.size and s[-1] > tol * s[0])


def _zf_estimate(ec: EquivalentChannel, y, scale, tol=DEFAULT_TOL):
    return pinv(scale * ec.Hc, tol) @ y


def _zf_labels(ec, y, c, scale):
    return c.nearest(_zf_estimate(ec, y, scale))


def zf_decode(
    ec: EquivalentChannel,
    y,
    c: Constellation,
    scale: float,
    allow_rank_deficient: bool = False,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """Zero-forcing: least-squares estimate, then per-symbol quantization.

    A rank-deficient Hc is an error unless ``allow_rank_deficient`` is
    set, in which case the minimum-norm solution is quantized (useful for
    deliberately underdetermined reference curves).
    """
    y = np.asarray(y, dtype=np.complex128).ravel()
    if not allow_rank_deficient and not _rank_ok(ec.Hc, tol):
        raise RankDeficiencyError("equivalent channel is rank deficient for ZF")
    return _quantize(c, _zf_estimate(ec, y, scale, tol))


def _mmse_estimate(ec, y, scale, noise_var, es):
    H = ec.Hc
    A = (scale * scale) * (H.conj().T @ H) + (noise_var / es) * np.eye(H.shape[1])
    return np.linalg.solve(A, scale * (H.conj().T @ y))


def mmse_decode(
    ec: EquivalentChannel, y, c: Constellation, scale: float, noise_var: float
) -> np.ndarray:
    """Linear MMSE with E[ss^H] = E_s I, then per-symbol quantization."""
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    y = np.asarray(y, dtype=np.complex128).ravel()
    return _quantize(c, _mmse_estimate(ec, y, scale, noise_var, c.avg_energy))


def blast_decode(
    ec: EquivalentChannel,
    y,
    c: Constellation,
    scale: float,
    allow_rank_deficient: bool = False,
    tol: float = DEFAULT_TOL,
    return_order: bool = False,
):
    """ZF-SIC with best-first ordering (max post-detection SNR).

    At each step the symbol whose nulling vector has the smallest norm is
    detected, quantized, and its contribution cancelled.
    """
    y = np.asarray(y, dtype=np.complex128).ravel().copy()
    Hc = ec.Hc
    L = Hc.shape[1]
    active = list(range(L))
    decided = np.zeros(L, dtype=np.complex128)
    detect_order = []
    for _ in range(L):
        A = scale * Hc[:, active]
        if not allow_rank_deficient and not _rank_ok(A, tol):
            raise RankDeficiencyError("rank-deficient channel during BLAST nulling")
        W = pinv(A, tol)
        norms = np.einsum("ij,ij->i", W, W.conj()).real
        # conjugate-partner columns tie exactly; take the first index
        # within relative tolerance so the order is implementation-stable
        j = int(np.argmax(norms <= norms.min() * (1.0 + 1e-9)))
        sym = _quantize(c, W[j] @ y)
        col = active[j]
        decided[col] = sym
        y -= scale * Hc[:, col] * sym
        detect_order.append(col)
        active.pop(j)
    if return_order:
        return decided, detect_order
    return decided


# ---------------------------------------------------------------------------
# PIC group decoding


def _group_ml(z, QG, c: Constellation, scale, guard_bits):
    """Exhaustive ML for one group on the projected system."""
    lp = QG.shape[1]
    if lp * _log2int(c.order) > guard_bits:
        raise GuardError(f"group search space |A|^{lp} exceeds 2^{guard_bits}")
    cand = c.points[_label_grid(c.order, lp)]  # (K, lp)
    resid = z[None, :] - cand @ (scale * QG.T)
    metrics = np.einsum("ij,ij->i", resid, resid.conj()).real
    return cand[int(np.argmin(metrics))]


def pic_group_decode(
    ec: EquivalentChannel,
    y,
    c: Constellation,
    scale: float,
    g: Optional[GroupingScheme] = None,
    tol: float = DEFAULT_TOL,
    guard_bits: int = 24,
) -> np.ndarray:
    """Partial interference cancellation group decoding.

    For each group: project out every other group's columns, then
    ML-decode the group on the projected system.  Groups are decoded
    independently; concatenated in symbol-index order.
    """
    y = np.asarray(y, dtype=np.complex128).ravel()
    g = g if g is not None else ec.grouping
    if g.total != ec.L:
        raise ValueError("grouping does not cover the symbol indices")
    out = np.zeros(ec.L, dtype=np.complex128)
    for p, grp in enumerate(g.groups):
        comp = [i for q, other in enumerate(g.groups) if q != p for i in other]
        Q = null_projector(ec.Hc[:, comp], tol) if comp else None
        z = Q @ y if Q is not None else y
        QG = Q @ ec.Hc[:, list(grp)] if Q is not None else ec.Hc[:, list(grp)]
        out[list(grp)] = _group_ml(z, QG, c, scale, guard_bits)
    return out


def pic_sic_decode(
    ec: EquivalentChannel,
    y,
    c: Constellation,
    scale: float,
    g: Optional[GroupingScheme] = None,
    tol: float = DEFAULT_TOL,
    guard_bits: int = 24,
) -> np.ndarray:
    """PIC with successive cancellation, groups decoded in the given order.

    Stage k projects out only the still-undecoded groups, detects group k,
    then subtracts its reconstructed contribution from the received vector.
    """
    y = np.asarray(y, dtype=np.complex128).ravel().copy()
    g = g if g is not None else ec.grouping
    if g.total != ec.L:
        raise ValueError("grouping does not cover the symbol indices")
    out = np.zeros(ec.L, dtype=np.complex128)
    for k, grp in enumerate(g.groups):
        comp = [i for other in g.groups[k + 1 :] for i in other]
        G = ec.Hc[:, list(grp)]
        if comp:
            Q = null_projector(ec.Hc[:, comp], tol)
            z, QG = Q @ y, Q @ G
        else:
            z, QG = y, G
        dec = _group_ml(z, QG, c, scale, guard_bits)
        out[list(grp)] = dec
        y -= scale * (G @ dec)
    return out


def complexity_estimate(g: GroupingScheme, alphabet_size: int) -> int:
    """Joint-ML enumeration cost of the grouping: sum of |A|^l_p (exact int)."""
    return sum(int(alphabet_size) ** l for l in g.sizes)
