import itertools
import math

import numpy as np
import pytest

from stbcpic.constellation import make_qam
from stbcpic.detectors import (
    _StructuredML,
    _ml_exhaustive,
    blast_decode,
    complexity_estimate,
    ml_decode,
    mmse_decode,
    pic_group_decode,
    pic_sic_decode,
    zf_decode,
    _mmse_estimate,
    _zf_estimate,
)
from stbcpic.equiv_channel import EquivalentChannel, build_structured, group_columns
from stbcpic.errors import GuardError, RankDeficiencyError
from stbcpic.linalg import null_projector
from stbcpic.rotation import default_rotation, givens
from stbcpic.stbc import CodeSpec, GroupingScheme, default_grouping, normalization_mu


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def make_instance(rng, spec, n_rx, snr_db):
    c = spec.constellation
    scale = math.sqrt(10 ** (snr_db / 10) / normalization_mu(spec))
    s = c.points[rng.integers(0, c.order, spec.L)]
    H = crandn(rng, spec.M, n_rx)
    ec = build_structured(spec, H)
    w = crandn(rng, spec.T * n_rx)
    return ec, s, scale * (ec.Hc @ s) + w, scale


@pytest.fixture
def spec_bpsk():
    return CodeSpec(4, 6, givens(1.02), make_qam(2))


@pytest.fixture
def spec_q4():
    return CodeSpec(4, 6, givens(1.02), make_qam(4))


def test_noiseless_recovery_all_detectors(spec_q4):
    rng = np.random.default_rng(0)
    c = spec_q4.constellation
    for _ in range(10):
        s = c.points[rng.integers(0, 4, 8)]
        H = crandn(rng, 4, 2)
        ec = build_structured(spec_q4, H)
        y = 1.7 * (ec.Hc @ s)
        assert np.array_equal(ml_decode(ec, y, c, 1.7), s)
        assert np.array_equal(zf_decode(ec, y, c, 1.7), s)
        assert np.array_equal(mmse_decode(ec, y, c, 1.7, noise_var=1e-9), s)
        assert np.array_equal(blast_decode(ec, y, c, 1.7), s)
        assert np.array_equal(pic_group_decode(ec, y, c, 1.7), s)
        assert np.array_equal(pic_sic_decode(ec, y, c, 1.7), s)


def test_ml_matches_pure_python_brute_force(spec_bpsk):
    rng = np.random.default_rng(1)
    c = spec_bpsk.constellation
    for _ in range(200):
        ec, s, y, scale = make_instance(rng, spec_bpsk, 1, rng.uniform(-5, 15))
        got = ml_decode(ec, y, c, scale)
        best = None
        for cand in itertools.product(c.points.tolist(), repeat=8):
            cand = np.array(cand)
            metric = float(np.sum(np.abs(y - scale * (ec.Hc @ cand)) ** 2))
            if best is None or metric < best[0]:
                best = (metric, cand)
        assert np.array_equal(got, best[1])


def test_ml_scalar_case_closed_form():
    rng = np.random.default_rng(2)
    c = make_qam(16)
    for _ in range(50):
        hc = crandn(rng, 5, 1)
        ec = EquivalentChannel(hc, GroupingScheme(((0,),)))
        s = c.points[rng.integers(0, 16, 1)]
        y = 0.9 * (hc @ s).ravel() + crandn(rng, 5)
        got = ml_decode(ec, y, c, 0.9)
        ls = (hc[:, 0].conj() @ y) / (0.9 * np.linalg.norm(hc) ** 2)
        assert got[0] == c.points[np.argmin(np.abs(ls - c.points))]


@pytest.mark.parametrize("order,n_rx", [(2, 1), (4, 1), (4, 2), (2, 4)])
def test_structured_ml_equals_exhaustive(order, n_rx):
    rng = np.random.default_rng(order * 10 + n_rx)
    c = make_qam(order)
    rot = givens(1.02)
    spec = CodeSpec(4, 6, rot, c)
    for _ in range(40):
        ec, s, y, scale = make_instance(rng, spec, n_rx, rng.uniform(-2, 18))
        ex = _ml_exhaustive(ec.Hc, y, c, scale)
        st = _StructuredML(ec.Hc, scale, c, rot).decode_labels(y)
        assert np.array_equal(ex, st)


def test_ml_guard_and_structured_dispatch():
    c16 = make_qam(16)
    rot = givens(1.02)
    spec = CodeSpec(4, 6, rot, c16)
    rng = np.random.default_rng(3)
    ec, s, y, scale = make_instance(rng, spec, 2, 30.0)
    # without the rotation hint the 16^8 space exceeds the default guard
    with pytest.raises(GuardError, match="guard"):
        ml_decode(ec, y, c16, scale)
    # with it, the structured exact path decodes (high SNR: exact recovery)
    assert np.array_equal(ml_decode(ec, y, c16, scale, rotation=rot), s)
    with pytest.raises(GuardError):
        ml_decode(ec, y, c16, scale, rotation=rot, guard_bits=8)


def test_structured_gram_check_rejects_wrong_channel():
    rng = np.random.default_rng(4)
    c = make_qam(16)
    rot = givens(1.02)
    hc = crandn(rng, 12, 8)  # unstructured channel: Gram pattern violated
    with pytest.raises(GuardError, match="Gram"):
        _StructuredML(hc, 1.0, c, rot)


def test_zf_rank_deficiency(spec_q4):
    rng = np.random.default_rng(5)
    ec, s, y, scale = make_instance(rng, spec_q4, 1, 20.0)  # 6 rows < 8 cols
    with pytest.raises(RankDeficiencyError):
        zf_decode(ec, y, spec_q4.constellation, scale)
    dec = zf_decode(ec, y, spec_q4.constellation, scale, allow_rank_deficient=True)
    assert dec.shape == (8,)


def test_mmse_approaches_zf(spec_q4):
    rng = np.random.default_rng(6)
    ec, s, y, scale = make_instance(rng, spec_q4, 2, 10.0)
    es = spec_q4.constellation.avg_energy
    zf_est = _zf_estimate(ec, y, scale)
    mmse_est = _mmse_estimate(ec, y, scale, 1e-10, es)
    assert np.abs(zf_est - mmse_est).max() < 1e-8
    with pytest.raises(ValueError, match="positive"):
        mmse_decode(ec, y, spec_q4.constellation, scale, noise_var=0.0)


def test_zf_equals_matched_filter_on_orthogonal_columns():
    # classic 2x2 conjugate-pair channel: orthogonal columns
    rng = np.random.default_rng(7)
    c = make_qam(16)
    for _ in range(50):
        h1, h2 = crandn(rng), crandn(rng)
        hc = np.array([[h1, h2], [-np.conj(h2), np.conj(h1)]])
        ec = EquivalentChannel(hc, GroupingScheme(((0,), (1,))))
        s = c.points[rng.integers(0, 16, 2)]
        y = 1.3 * (hc @ s) + crandn(rng, 2)
        zf = zf_decode(ec, y, c, 1.3)
        gain = 1.3 * (abs(h1) ** 2 + abs(h2) ** 2)
        mf = c.points[c.nearest(hc.conj().T @ y / gain)]
        assert np.array_equal(zf, mf)


def test_pic_single_group_equals_ml(spec_bpsk):
    rng = np.random.default_rng(8)
    g = GroupingScheme((tuple(range(8)),))
    c = spec_bpsk.constellation
    for _ in range(20):
        ec, s, y, scale = make_instance(rng, spec_bpsk, 2, rng.uniform(-5, 10))
        assert np.array_equal(
            pic_group_decode(ec, y, c, scale, g), ml_decode(ec, y, c, scale)
        )
        assert np.array_equal(
            pic_sic_decode(ec, y, c, scale, g), ml_decode(ec, y, c, scale)
        )


def test_pic_singleton_groups_equals_zf(spec_q4):
    rng = np.random.default_rng(9)
    g = GroupingScheme(tuple((i,) for i in range(8)))
    c = spec_q4.constellation
    for _ in range(100):
        ec, s, y, scale = make_instance(rng, spec_q4, 2, rng.uniform(0, 20))
        assert np.array_equal(
            pic_group_decode(ec, y, c, scale, g), zf_decode(ec, y, c, scale)
        )


def test_pic_noiseless_recovery_rank_deficient_complements(spec_q4):
    # N=1: every complement is rank deficient; the projector fallback and
    # the criterion's injectivity still give exact recovery
    rng = np.random.default_rng(10)
    c = spec_q4.constellation
    for _ in range(100):
        s = c.points[rng.integers(0, 4, 8)]
        H = crandn(rng, 4, 1)
        ec = build_structured(spec_q4, H)
        assert np.array_equal(pic_group_decode(ec, ec.Hc @ s, c, 1.0), s)


def test_pic_sic_noiseless_recovery():
    rng = np.random.default_rng(11)
    q4 = make_qam(4)
    for spec, n_rx in [
        (CodeSpec(4, 6, givens(1.02), q4), 1),
        (CodeSpec(8, 10, default_rotation(4), q4), 1),
        (CodeSpec(8, 10, default_rotation(4), q4), 2),
    ]:
        for _ in range(25):
            s = q4.points[rng.integers(0, 4, spec.L)]
            H = crandn(rng, spec.M, n_rx)
            ec = build_structured(spec, H)
            assert np.array_equal(pic_sic_decode(ec, ec.Hc @ s, q4, 1.0), s)


def test_pic_sic_singleton_blast_order_equals_blast(spec_q4):
    rng = np.random.default_rng(12)
    c = spec_q4.constellation
    for _ in range(50):
        ec, s, y, scale = make_instance(rng, spec_q4, 2, rng.uniform(0, 15))
        dec, order = blast_decode(ec, y, c, scale, return_order=True)
        g = GroupingScheme(tuple((i,) for i in order))
        assert np.array_equal(pic_sic_decode(ec, y, c, scale, g), dec)


def test_blast_scalar_equals_zf():
    rng = np.random.default_rng(13)
    c = make_qam(4)
    hc = crandn(rng, 4, 1)
    ec = EquivalentChannel(hc, GroupingScheme(((0,),)))
    y = 1.1 * hc[:, 0] * c.points[2] + 0.1 * crandn(rng, 4)
    assert np.array_equal(
        blast_decode(ec, y, c, 1.1), zf_decode(ec, y, c, 1.1)
    )


def test_projector_annihilates_other_groups():
    rng = np.random.default_rng(14)
    q4 = make_qam(4)
    for spec in (CodeSpec(4, 6, givens(1.02), q4), CodeSpec(8, 10, default_rotation(4), q4)):
        g = default_grouping(spec)
        for _ in range(20):
            H = crandn(rng, spec.M, 1)
            ec = build_structured(spec, H)
            gs = group_columns(ec, g)
            for p in range(len(gs)):
                comp = np.hstack([x for q, x in enumerate(gs) if q != p])
                Q = null_projector(comp)
                for q, other in enumerate(gs):
                    if q != p:
                        assert np.linalg.norm(Q @ other) < 1e-9


def test_decisions_invariant_under_joint_rescaling(spec_q4):
    rng = np.random.default_rng(15)
    c = spec_q4.constellation
    for _ in range(20):
        ec, s, y, scale = make_instance(rng, spec_q4, 2, 8.0)
        for fn in (ml_decode, zf_decode, pic_group_decode, pic_sic_decode, blast_decode):
            assert np.array_equal(fn(ec, y, c, scale), fn(ec, 2.0 * y, c, 2.0 * scale))


def test_complexity_estimate_fixtures():
    q16 = make_qam(16)
    spec = CodeSpec(4, 6, givens(1.02), q16)
    assert complexity_estimate(default_grouping(spec), 16) == 4 * 16**2 == 1024
    spec8 = CodeSpec(8, 10, default_rotation(4), q16)
    assert complexity_estimate(default_grouping(spec8), 16) == 4 * 16**4
    assert complexity_estimate(GroupingScheme((tuple(range(8)),)), 2) == 256
    # exact big-integer arithmetic
    g = GroupingScheme((tuple(range(64)),))
    assert complexity_estimate(g, 64) == 64**64


def test_group_guard(spec_q4):
    rng = np.random.default_rng(16)
    ec, s, y, scale = make_instance(rng, spec_q4, 2, 10.0)
    with pytest.raises(GuardError, match="group"):
        pic_group_decode(ec, y, spec_q4.constellation, scale, guard_bits=2)
