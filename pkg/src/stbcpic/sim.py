"""Seeded Monte Carlo BER engine over Rayleigh block fading.

Model per trial: draw information bits, modulate, encode, transmit
through a fresh M x N channel (block fading: one realization per
codeword), Y = sqrt(rho/mu) * B(s) H + W with unit-variance complex
Gaussian noise, then preprocess, detect, demap and count errors.

Determinism contract
--------------------
Trials are processed in fixed-size blocks.  Block ``b`` of point ``k``
draws all of its randomness from a generator seeded with
``SeedSequence((seed, k, b))`` in a fixed layout (bits, then H, then W),
so the values consumed by trial ``t`` depend only on (seed, point index,
t) and never on execution order, worker count or stopping decisions.
Stopping (first of target_frame_errors / max_trials) is evaluated in
block order, which keeps counts identical across parallelism settings.

The per-trial work inside a block is vectorized; detector decisions of
these batched paths are tested for exact agreement with the reference
detectors in ``detectors``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .constellation import Constellation
from .detectors import DetectorConfig, _StructuredML, _label_grid, _log2int, _structured_applicable
from .errors import GuardError, RankDeficiencyError
from .stbc import CodeSpec, GroupingScheme, default_grouping, normalization_mu

__all__ = ["SimConfig", "BerPoint", "draw_channel", "run_point", "sweep", "csv_lines"]


@dataclass(frozen=True)
class SimConfig:
    spec: CodeSpec
    n_rx: int
    detector: DetectorConfig
    snr_db_list: tuple
    seed: int = 1
    max_trials: int = 100_000
    target_frame_errors: int = 200
    min_trials: int = 1_000
    block_trials: int = 1_024
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snr_db_list", tuple(float(v) for v in self.snr_db_list))
        if not self.snr_db_list:
            raise ValueError("snr_db_list must be nonempty")
        if self.min_trials > self.max_trials:
            raise ValueError("min_trials > max_trials")
        if self.n_rx < 1:
            raise ValueError("need at least one receive antenna")


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    trials: int
    bits: int
    bit_errors: int
    frame_errors: int
    ber: float
    fer: float
    ci95_halfwidth: float


def draw_channel(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    """One M x N realization with i.i.d. CN(0,1) entries."""
    return (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# precomputed vectorized machinery for one (spec, N) pair


class _BatchCoder:
    """Index tables that turn encode / Hc assembly into flat scatters."""

    def __init__(self, spec: CodeSpec, n_rx: int):
        self.spec = spec
        self.n_rx = n_rx
        P, hm, T = spec.P, spec.half_m, spec.T
        t2 = T // 2
        me = spec.m_even

        # codeword scatter: entry (i, p, k) of the rotated layers lands at
        # (row, col, sign, conj) in the full even-M codeword
        rows, cols, signs, conjs, src = [], [], [], [], []
        for i in range(2):
            for p in range(P):
                for k in range(hm):
                    flat = (i * P + p) * hm + k
                    rows.append(p + k)
                    cols.append(i * hm + k)
                    signs.append(1.0)
                    conjs.append(False)
                    src.append(flat)
                    rows.append(t2 + p + k)
                    cols.append((1 - i) * hm + k)
                    signs.append(-1.0 if i == 1 else 1.0)
                    conjs.append(True)
                    src.append(flat)
        self.cw_rows = np.array(rows)
        self.cw_cols = np.array(cols)
        self.cw_signs = np.array(signs)
        self.cw_conj = np.array(conjs)
        self.cw_src = np.array(src)

        # Hc scatter: nonzero (row, col) entries as theta * (h or conj h)
        theta = spec.rotation.mat
        rows, cols, hidx, tval, conjs = [], [], [], [], []
        for n in range(n_rx):
            for i in range(2):
                for p in range(P):
                    gcol = (i * P + p) * hm
                    for j in range(hm):
                        for k in range(hm):
                            # top half: diag(h_i) Theta at block row offset p
                            rows.append(n * T + p + j)
                            cols.append(gcol + k)
                            hidx.append(n * me + i * hm + j)
                            tval.append(theta[j, k])
                            conjs.append(False)
                            # bottom half: +/- diag(conj h_i) Theta of the
                            # partner block (rotation stays unconjugated)
                            rows.append(n * T + t2 + p + j)
                            cols.append(((1 - i) * P + p) * hm + k)
                            hidx.append(n * me + i * hm + j)
                            tval.append(theta[j, k] * (1.0 if i == 0 else -1.0))
                            conjs.append(True)
        self.hc_rows = np.array(rows)
        self.hc_cols = np.array(cols)
        self.hc_hidx = np.array(hidx)
        self.hc_tval = np.array(tval, dtype=np.complex128)
        self.hc_conj = np.array(conjs)

    def encode(self, s: np.ndarray) -> np.ndarray:
        """(B, L) symbols -> (B, T, M) codewords."""
        spec = self.spec
        nb = s.shape[0]
        layers = s.reshape(nb, 2, spec.P, spec.half_m)
        x = np.einsum("kj,bipj->bipk", spec.rotation.mat, layers).reshape(nb, -1)
        vals = x[:, self.cw_src]
        vals = np.where(self.cw_conj, np.conj(vals), vals) * self.cw_signs
        out = np.zeros((nb, spec.T, spec.m_even), dtype=np.complex128)
        out[:, self.cw_rows, self.cw_cols] = vals
        return out[:, :, : spec.M]

    def pad(self, H: np.ndarray) -> np.ndarray:
        if self.spec.m_even == self.spec.M:
            return H
        pad = np.zeros((H.shape[0], 1, H.shape[2]), dtype=np.complex128)
        return np.concatenate([H, pad], axis=1)

    def equivalent(self, H: np.ndarray) -> np.ndarray:
        """(B, M, N) channels -> (B, T*N, L) equivalent matrices."""
        spec = self.spec
        hf = np.swapaxes(self.pad(H), 1, 2).reshape(H.shape[0], -1)  # (B, N*M_even)
        vals = hf[:, self.hc_hidx]
        vals = np.where(self.hc_conj, np.conj(vals), vals) * self.hc_tval
        out = np.zeros((H.shape[0], spec.T * self.n_rx, spec.L), dtype=np.complex128)
        out[:, self.hc_rows, self.hc_cols] = vals
        return out

    def preprocess(self, Y: np.ndarray) -> np.ndarray:
        """(B, T, N) received blocks -> (B, T*N) vectors (antenna-major)."""
        t2 = self.spec.T // 2
        half = np.concatenate([Y[:, :t2, :], -np.conj(Y[:, t2:, :])], axis=1)
        return np.swapaxes(half, 1, 2).reshape(Y.shape[0], -1)


def _masked_basis(sv_u, sv_s, tol):
    """Zero out singular directions below the relative cutoff."""
    lead = sv_s[:, :1]
    keep = sv_s > tol * np.where(lead > 0, lead, 1.0)
    return sv_u * keep[:, None, :]


class _BatchDetector:
    """Vectorized per-block decisions; must match the reference detectors."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.spec = cfg.spec
        self.c = cfg.spec.constellation
        self.det = cfg.detector
        self.grouping = cfg.detector.grouping or default_grouping(cfg.spec)
        kind = cfg.detector.kind
        if kind in ("pic", "pic_sic"):
            for lp in self.grouping.sizes:
                if lp * _log2int(self.c.order) > cfg.detector.guard_bits:
                    raise GuardError(f"group search space |A|^{lp} exceeds guard")
        if kind == "ml":
            bits = cfg.spec.L * _log2int(self.c.order)
            self.ml_structured = _structured_applicable(cfg.spec.L, cfg.spec.rotation) and bits > 16
            if not self.ml_structured and bits > cfg.detector.guard_bits:
                raise GuardError(f"ML search space 2^{bits} exceeds guard")

    # -- helpers ----------------------------------------------------------

    def _labels_linear(self, est: np.ndarray) -> np.ndarray:
        return self.c.nearest(est)

    def _zf_est(self, Hc, y, scale):
        if not self.det.allow_rank_deficient:
            s = np.linalg.svd(Hc, compute_uv=False)
            wide = Hc.shape[1] < Hc.shape[2]
            if wide or np.any(s[:, -1] <= self.det.tol * s[:, 0]):
                raise RankDeficiencyError(
                    "rank-deficient equivalent channel in ZF path "
                    "(set detector.allow_rank_deficient to accept min-norm decisions)"
                )
        return np.einsum("blr,br->bl", np.linalg.pinv(scale * Hc, rcond=self.det.tol), y)

    def _group_metrics(self, z, QG, scale, lp):
        cand = self.c.points[_label_grid(self.c.order, lp)]  # (K, lp)
        pred = np.einsum("btl,kl->bkt", QG, cand)
        resid = z[:, None, :] - scale * pred
        return np.einsum("bkt,bkt->bk", resid, resid.conj()).real, cand

    def _pic_like(self, Hc, y, scale, sic: bool):
        nb, L = y.shape[0], self.spec.L
        out = np.zeros((nb, L), dtype=np.int64)
        y_work = y.copy()
        groups = self.grouping.groups
        for k, grp in enumerate(groups):
            if sic:
                comp = [i for other in groups[k + 1 :] for i in other]
            else:
                comp = [i for q, other in enumerate(groups) if q != k for i in other]
            G = Hc[:, :, list(grp)]
            if comp:
                u, s, _ = np.linalg.svd(Hc[:, :, comp], full_matrices=False)
                ur = _masked_basis(u, s, self.det.tol)
                z = y_work - np.einsum("btr,br->bt", ur, np.einsum("btr,bt->br", ur.conj(), y_work))
                QG = G - np.einsum("btr,brl->btl", ur, np.einsum("btr,btl->brl", ur.conj(), G))
            else:
                z, QG = y_work, G
            metrics, cand = self._group_metrics(z, QG, scale, len(grp))
            pick = np.argmin(metrics, axis=1)
            out[:, list(grp)] = _label_grid(self.c.order, len(grp))[pick]
            if sic:
                y_work = y_work - scale * np.einsum("btl,bl->bt", G, cand[pick])
        return out

    def _blast(self, Hc, y, scale):
        nb, L = y.shape[0], self.spec.L
        out = np.zeros((nb, L), dtype=np.int64)
        y_work = y.copy()
        alive = np.ones((nb, L), dtype=bool)
        arange = np.arange(nb)
        for _ in range(L):
            # per-trial pseudo-inverse of the alive columns via masked svd
            Hmask = np.where(alive[:, None, :], Hc, 0.0) * scale
            u, s, vh = np.linalg.svd(Hmask, full_matrices=False)
            lead = s[:, :1]
            good = s > self.det.tol * np.where(lead > 0, lead, 1.0)
            if not self.det.allow_rank_deficient:
                n_alive = alive.sum(axis=1)
                if np.any(good.sum(axis=1) < n_alive):
                    raise RankDeficiencyError("rank-deficient channel during BLAST nulling")
            sinv = np.where(good, 1.0 / np.where(s > 0, s, 1.0), 0.0)
            W = np.einsum("bkl,bk,btk->blt", vh.conj(), sinv, u.conj())  # pinv rows
            row_norm = np.einsum("blt,blt->bl", W, W.conj()).real
            row_norm[~alive] = np.inf
            # first index within relative tolerance of the minimum (exact
            # ties between conjugate-partner columns are structural here)
            lead = row_norm.min(axis=1, keepdims=True)
            j = np.argmax(row_norm <= lead * (1.0 + 1e-9), axis=1)
            est = np.einsum("bt,bt->b", W[arange, j, :], y_work)
            lab = self._labels_linear(est)
            out[arange, j] = lab
            y_work = y_work - scale * Hc[arange, :, j] * self.c.points[lab][:, None]
            alive[arange, j] = False
        return out

    def _ml_exhaustive_batch(self, Hc, y, scale):
        nb = y.shape[0]
        labels = _label_grid(self.c.order, self.spec.L)
        cand = self.c.points[labels]  # (K, L)
        total = cand.shape[0]
        chunk = max(1, (1 << 23) // max(1, nb * Hc.shape[1]))
        best_metric = np.full(nb, np.inf)
        best_idx = np.zeros(nb, dtype=np.int64)
        for lo in range(0, total, chunk):
            pred = np.einsum("btl,kl->bkt", Hc, cand[lo : lo + chunk])
            resid = y[:, None, :] - scale * pred
            metrics = np.einsum("bkt,bkt->bk", resid, resid.conj()).real
            pick = np.argmin(metrics, axis=1)
            vals = metrics[np.arange(nb), pick]
            better = vals < best_metric
            best_metric = np.where(better, vals, best_metric)
            best_idx = np.where(better, pick + lo, best_idx)
        return labels[best_idx]

    def _ml(self, Hc, y, scale):
        if not self.ml_structured:
            return self._ml_exhaustive_batch(Hc, y, scale)
        # structured path: precompute the rotated-coordinate channels and
        # matched filters in batch, seed each search with the PIC-SIC decision
        nb = y.shape[0]
        out = np.zeros((nb, self.spec.L), dtype=np.int64)
        theta_blk = np.kron(np.eye(4), self.spec.rotation.mat).conj().T
        kmat = Hc @ theta_blk
        gram = np.einsum("btk,btl->bkl", kmat.conj(), kmat)
        mf = np.einsum("btk,bt->bk", kmat.conj(), y)
        hints = self._pic_like(Hc, y, scale, sic=True)
        for b in range(nb):
            dec = _StructuredML.from_parts(
                kmat[b], gram[b], scale, self.c, self.spec.rotation
            )
            out[b] = dec.decode_labels(y[b], ub_labels=hints[b], mf=mf[b])
        return out

    def decide(self, Hc, y, scale, noise_var=1.0):
        kind = self.det.kind
        if kind == "zf":
            return self._labels_linear(self._zf_est(Hc, y, scale))
        if kind == "mmse":
            H_h = np.conj(np.swapaxes(Hc, 1, 2))
            A = (scale * scale) * (H_h @ Hc) + (noise_var / self.c.avg_energy) * np.eye(self.spec.L)
            rhs = scale * np.einsum("blt,bt->bl", H_h, y)
            est = np.linalg.solve(A, rhs[:, :, None])[:, :, 0]
            return self._labels_linear(est)
        if kind == "pic":
            return self._pic_like(Hc, y, scale, sic=False)
        if kind == "pic_sic":
            return self._pic_like(Hc, y, scale, sic=True)
        if kind == "blast":
            return self._blast(Hc, y, scale)
        if kind == "ml":
            return self._ml(Hc, y, scale)
        raise ValueError(f"unknown detector kind {self.det.kind!r}")


# ---------------------------------------------------------------------------
# Monte Carlo driver


@dataclass
class _Accum:
    trials: int = 0
    bits: int = 0
    bit_errors: int = 0
    frame_errors: int = 0
    err_sum: float = 0.0
    err_sq_sum: float = 0.0

    def add_frames(self, per_frame_errors: np.ndarray, bits_per_frame: int):
        self.trials += per_frame_errors.size
        self.bits += per_frame_errors.size * bits_per_frame
        self.bit_errors += int(per_frame_errors.sum())
        self.frame_errors += int(np.count_nonzero(per_frame_errors))
        self.err_sum += float(per_frame_errors.sum())
        self.err_sq_sum += float((per_frame_errors.astype(np.float64) ** 2).sum())


def _point_from_accum(snr_db: float, acc: _Accum, bits_per_frame: int) -> BerPoint:
    ber = acc.bit_errors / acc.bits if acc.bits else 0.0
    fer = acc.frame_errors / acc.trials if acc.trials else 0.0
    # frame-clustered 95% CI on the BER (bit errors within a frame are correlated)
    if acc.trials > 1:
        mean = acc.err_sum / acc.trials
        var = max(acc.err_sq_sum / acc.trials - mean * mean, 0.0)
        ci = 1.96 * math.sqrt(var / acc.trials) / bits_per_frame
    else:
        ci = float("nan")
    return BerPoint(snr_db, acc.trials, acc.bits, acc.bit_errors, acc.frame_errors, ber, fer, ci)


def _run_block(cfg: SimConfig, coder: _BatchCoder, det: _BatchDetector,
               point_idx: int, block_idx: int, n_trials: int, scale: float) -> np.ndarray:
    """Per-frame bit error counts for one block (deterministic in its key)."""
    spec, c = cfg.spec, cfg.spec.constellation
    bits_per_frame = spec.L * c.bits_per_symbol
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, point_idx, block_idx)))
    bits = rng.integers(0, 2, size=(n_trials, bits_per_frame), dtype=np.int64)
    H = (rng.standard_normal((n_trials, spec.M, cfg.n_rx))
         + 1j * rng.standard_normal((n_trials, spec.M, cfg.n_rx))) / math.sqrt(2.0)
    W = (rng.standard_normal((n_trials, spec.T, cfg.n_rx))
         + 1j * rng.standard_normal((n_trials, spec.T, cfg.n_rx))) / math.sqrt(2.0)

    weights = 1 << np.arange(c.bits_per_symbol - 1, -1, -1)
    tx_labels = (bits.reshape(n_trials, spec.L, c.bits_per_symbol) @ weights)
    s = c.points[tx_labels]
    B = coder.encode(s)
    Y = scale * np.einsum("btm,bmn->btn", B, H) + W
    y = coder.preprocess(Y)
    Hc = coder.equivalent(H)
    rx_labels = det.decide(Hc, y, scale)
    diff = tx_labels ^ rx_labels
    # popcount over label xor = bit errors per symbol
    err = np.zeros(n_trials, dtype=np.int64)
    while diff.any():
        err += (diff & 1).sum(axis=1)
        diff >>= 1
    return err


def run_point(cfg: SimConfig, snr_db: float, point_idx: int = 0) -> BerPoint:
    """Monte Carlo at one SNR; stops at target_frame_errors or max_trials."""
    spec, c = cfg.spec, cfg.spec.constellation
    coder = _BatchCoder(spec, cfg.n_rx)
    det = _BatchDetector(cfg)
    mu = normalization_mu(spec)
    scale = math.sqrt((10.0 ** (snr_db / 10.0)) / mu)
    bits_per_frame = spec.L * c.bits_per_symbol

    acc = _Accum()

    def plan(start_trial):
        return min(cfg.block_trials, cfg.max_trials - start_trial)

    if cfg.workers <= 1:
        block = 0
        while acc.trials < cfg.max_trials:
            n = plan(acc.trials)
            acc.add_frames(_run_block(cfg, coder, det, point_idx, block, n, scale), bits_per_frame)
            block += 1
            if acc.trials >= cfg.min_trials and acc.frame_errors >= cfg.target_frame_errors:
                break
    else:
        # speculative parallel blocks, folded in block order so stopping is
        # identical to the sequential scan
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            block = 0
            done = False
            while not done and acc.trials < cfg.max_trials:
                batch = []
                start = acc.trials
                for _ in range(cfg.workers):
                    if start >= cfg.max_trials:
                        break
                    n = min(cfg.block_trials, cfg.max_trials - start)
                    batch.append((block, n))
                    block += 1
                    start += n
                futures = [
                    pool.submit(_run_block, cfg, coder, det, point_idx, b, n, scale)
                    for b, n in batch
                ]
                for fut, (_, n) in zip(futures, batch):
                    acc.add_frames(fut.result(), bits_per_frame)
                    if acc.trials >= cfg.min_trials and acc.frame_errors >= cfg.target_frame_errors:
                        done = True
                        break
    return _point_from_accum(snr_db, acc, bits_per_frame)


def sweep(cfg: SimConfig) -> list:
    """run_point for every SNR in the config; deterministic given the seed."""
    return [run_point(cfg, snr, k) for k, snr in enumerate(cfg.snr_db_list)]


CSV_HEADER = "snr_db,trials,bits,bit_errors,frame_errors,ber,fer,ci95"


def csv_lines(points) -> list:
    """CSV rows (header included) with a fixed, platform-stable format."""
    lines = [CSV_HEADER]
    for p in points:
        lines.append(
            f"{p.snr_db:g},{p.trials},{p.bits},{p.bit_errors},{p.frame_errors},"
            f"{p.ber:.9e},{p.fer:.9e},{p.ci95_halfwidth:.9e}"
        )
    return lines
