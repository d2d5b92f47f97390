import math

import numpy as np
import pytest

from stbcpic.constellation import Constellation, difference_set, make_qam
from stbcpic.diversity import (
    det_product_oracle,
    diversity_slope,
    pic_criterion_check,
    pic_sic_criterion_check,
    rank_criterion_check,
)
from stbcpic.equiv_channel import build_structured, group_columns
from stbcpic.errors import GuardError
from stbcpic.linalg import null_projector, rank
from stbcpic.rotation import default_rotation, givens
from stbcpic.sim import BerPoint
from stbcpic.stbc import CodeSpec, default_grouping, encode, interleaved_grouping


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def test_rank_criterion_exhaustive_bpsk():
    spec = CodeSpec(4, 6, givens(1.02), make_qam(2))
    rep = rank_criterion_check(spec)
    assert rep.passed and rep.min_rank == 4 and rep.required_rank == 4
    assert rep.trials == 3**8 - 1 == 6560
    assert rep.witnesses == ()


def test_rank_criterion_negative_control_reports_witness():
    bad = CodeSpec(4, 6, givens(math.pi / 4), make_qam(2))
    rep = rank_criterion_check(bad)
    assert not rep.passed
    assert rep.min_rank < 4
    assert len(rep.witnesses) > 0
    # a recorded witness really is rank deficient
    w = np.array(rep.witnesses[0])
    assert rank(encode(bad, w)) < 4


def test_rank_negative_control_qam4_witness_from_vanishing_rotation():
    # the 45-degree rotation sends the difference (2, -2) to a zero
    # component; a single-layer difference built from it drops rank
    bad = CodeSpec(4, 6, givens(math.pi / 4), make_qam(4))
    delta = np.zeros(8, dtype=complex)
    delta[0], delta[1] = 2.0, -2.0
    assert rank(encode(bad, delta)) < 4
    good = CodeSpec(4, 6, givens(1.02), make_qam(4))
    assert rank(encode(good, delta)) == 4


def test_rank_criterion_sampled_mode_and_cap():
    spec = CodeSpec(4, 6, givens(1.02), make_qam(4))
    with pytest.raises(GuardError, match="cap"):
        rank_criterion_check(spec)  # 9^8 difference vectors exceed the cap
    rep = rank_criterion_check(spec, mode=2000, rng_seed=3)
    assert rep.passed and rep.trials <= 2000


def test_rank_criterion_invariant_under_global_phase():
    spec = CodeSpec(4, 6, givens(1.02), make_qam(2))
    rotated = Constellation("bpsk-rot", make_qam(2).points * np.exp(0.7j), 1)
    rep = rank_criterion_check(spec, c=rotated)
    assert rep.passed and rep.min_rank == 4


def test_det_product_oracle_agrees():
    rng = np.random.default_rng(0)
    spec = CodeSpec(4, 6, givens(1.02), make_qam(4))
    for _ in range(10):
        delta = crandn(rng, 8)  # generic: all rotated entries nonzero
        det, prod = det_product_oracle(spec, delta)
        assert det == pytest.approx(prod, rel=1e-8)


def test_det_product_oracle_scaling():
    rng = np.random.default_rng(1)
    spec = CodeSpec(4, 6, givens(1.02), make_qam(4))
    delta = crandn(rng, 8)
    d1, p1 = det_product_oracle(spec, delta)
    d2, p2 = det_product_oracle(spec, 2.0 * delta)
    assert d2 == pytest.approx(d1 * 2 ** (2 * 4), rel=1e-10)
    assert p2 == pytest.approx(p1 * 2 ** (2 * 4), rel=1e-10)


def test_det_product_oracle_preconditions():
    spec = CodeSpec(4, 6, givens(1.02), make_qam(4))
    with pytest.raises(ValueError, match="zero"):
        det_product_oracle(spec, np.zeros(8))
    theta = spec.rotation.mat
    delta = np.zeros(8, dtype=complex)
    # layer (i=1, p=1) chosen so its rotated first entry vanishes
    delta[0:2] = np.array([theta[0, 1], -theta[0, 0]])
    with pytest.raises(ValueError, match="zero rotated entry"):
        det_product_oracle(spec, delta)


def test_pic_criterion_462():
    spec = CodeSpec(4, 6, givens(1.02), make_qam(4))
    rep = pic_criterion_check(spec, n_channels=150, rng_seed=7)
    assert rep.passed
    assert rep.min_residual > 1e-6


def test_pic_criterion_residual_homogeneous_in_h():
    spec = CodeSpec(4, 6, givens(1.02), make_qam(4))
    rng = np.random.default_rng(2)
    h = crandn(rng, 4)
    a = np.array([2.0, -2.0 + 2.0j])
    for scale_h in (1.0, 3.0):
        ec = build_structured(spec, scale_h * h)
        gs = group_columns(ec, default_grouping(spec))
        q = null_projector(np.hstack(gs[1:]))
        r = np.linalg.norm(q @ gs[0] @ a) / (np.linalg.norm(scale_h * h) * np.linalg.norm(a))
        if scale_h == 1.0:
            base = r
    assert r == pytest.approx(base, rel=1e-10)


def test_pic_sic_criterion_462_passes_sequentially():
    spec = CodeSpec(4, 6, givens(1.02), make_qam(4))
    rep = pic_sic_criterion_check(spec, n_channels=150, rng_seed=7)
    assert rep.passed and rep.min_residual > 1e-6


def test_pic_sic_sequential_order_fails_for_three_layers():
    # With three or more layers the plain sequential order leaves a stage
    # whose group lies entirely inside the span of the still-undecoded
    # groups (residual exactly zero), so the per-stage condition cannot
    # hold.  The conjugate-partner interleaved order restores it.
    spec = CodeSpec(4, 8, givens(1.02), make_qam(4))
    seq = pic_sic_criterion_check(spec, n_channels=50, rng_seed=5)
    assert not seq.passed
    assert seq.min_residual < 1e-12
    assert len(seq.witnesses) > 0

    inter = pic_sic_criterion_check(
        spec, n_channels=50, rng_seed=5, grouping=interleaved_grouping(spec)
    )
    assert inter.passed and inter.min_residual > 1e-6


def test_pic_sic_last_stage_reduces_to_rotation_property():
    spec = CodeSpec(4, 6, givens(1.02), make_qam(4))
    rng = np.random.default_rng(3)
    h = crandn(rng, 4)
    gs = group_columns(build_structured(spec, h), default_grouping(spec))
    dset = difference_set(make_qam(4))
    combos = np.stack(np.meshgrid(dset, dset, indexing="ij"), axis=-1).reshape(-1, 2)
    combos = combos[np.any(combos != 0, axis=1)]
    res = np.linalg.norm(gs[-1] @ combos.T, axis=0)
    assert res.min() > 0


def test_pic_criterion_cap_guard():
    spec = CodeSpec(4, 6, givens(1.02), make_qam(4))
    with pytest.raises(GuardError, match="cap"):
        pic_criterion_check(spec, n_channels=2, cap=10)


def synth_points(diversity, snrs):
    return [
        BerPoint(s, 10**6, 10**7, 1, 1, 10.0 ** (-diversity * s / 10.0), 0.1, 0.0)
        for s in snrs
    ]


def test_diversity_slope_power_laws():
    assert diversity_slope(synth_points(4.0, [20, 22, 24, 26]), 20, 26) == pytest.approx(
        4.0, abs=0.01
    )
    assert diversity_slope(synth_points(1.0, [20, 25, 30]), 20, 30) == pytest.approx(
        1.0, abs=0.01
    )


def test_diversity_slope_needs_three_points():
    with pytest.raises(ValueError, match="3 points"):
        diversity_slope(synth_points(2.0, [20, 25]), 20, 30)
    pts = synth_points(2.0, [20, 25, 30])
    pts[1] = BerPoint(25, 10, 10, 0, 0, 0.0, 0.0, 0.0)  # zero BER dropped
    with pytest.raises(ValueError, match="3 points"):
        diversity_slope(pts, 20, 30)


def test_cert_report_lines():
    spec = CodeSpec(4, 6, givens(1.02), make_qam(2))
    rep = rank_criterion_check(spec)
    lines = rep.lines()
    assert "kind=rank" in lines
    assert "pass=true" in lines
    assert any(l.startswith("min_rank=") for l in lines)
