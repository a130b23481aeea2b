import math

import numpy as np
import pytest
from scipy.stats import norm

from crossmpt.channel import ebno_to_sigma
from crossmpt.codes import bundled_codes, load_code
from crossmpt.evaluation import (BerPoint, BPDecoder, GenieDecoder, HardDecoder, MLDecoder, NNDecoder,
                                 estimate_ber, flops_estimate, flops_for_code)
from crossmpt.model import ModelConfig, init_params


def test_hard_decoder_matches_tail():
    code = load_code("ext_hamming_8_4")
    rep = estimate_ber(HardDecoder(), code, [4.0], min_frame_errors=10 ** 9, max_frames=100_000, seed=2,
                       chunk_size=20_000)
    p = rep.points[0]
    assert p.frames == 100_000 and p.capped
    q = norm.sf(1 / float(ebno_to_sigma(4.0, 0.5)))
    se = math.sqrt(q * (1 - q) / p.bits)
    assert abs(p.ber - q) < 3 * se


def test_genie_hits_cap(hamming):
    rep = estimate_ber(GenieDecoder(), hamming, [2.0], min_frame_errors=1, max_frames=2500, chunk_size=1000)
    p = rep.points[0]
    assert (p.frames, p.bit_errors, p.frame_errors, p.ber, p.fer) == (2500, 0, 0, 0.0, 0.0)
    assert p.capped and p.neg_ln_ber is None
    assert p.neg_ln_ber_text().startswith(">")


def test_bp_monotone_and_stopping(hamming):
    rep = estimate_ber(BPDecoder(hamming), hamming, [4.0, 5.0, 6.0], min_frame_errors=500, seed=1)
    bers = [p.ber for p in rep.points]
    assert bers[0] >= bers[1] >= bers[2]
    for p in rep.points:
        assert not p.capped and p.frame_errors >= 500
        assert p.ber == p.bit_errors / p.bits
        assert p.neg_ln_ber == pytest.approx(-math.log(p.ber))


def test_report_deterministic_and_worker_independent(hamming):
    kw = dict(min_frame_errors=80, seed=4, chunk_size=500)
    a = estimate_ber(BPDecoder(hamming), hamming, [3.0, 5.0], **kw)
    b = estimate_ber(BPDecoder(hamming), hamming, [3.0, 5.0], **kw)
    c = estimate_ber(BPDecoder(hamming), hamming, [3.0, 5.0], workers=3, **kw)
    assert a.to_csv() == b.to_csv() == c.to_csv()


def test_nn_decoder_pickles_and_runs(bch31):
    cfg = ModelConfig.for_code(bch31, num_layers=1, embed_dim=16, heads=4)
    dec = NNDecoder(init_params(cfg, np.random.default_rng(0)), cfg, bch31)
    kw = dict(min_frame_errors=30, max_frames=400, chunk_size=100, seed=1)
    a = estimate_ber(dec, bch31, [4.0], **kw)
    b = estimate_ber(dec, bch31, [4.0], workers=2, **kw)
    assert a.to_csv() == b.to_csv()
    # untrained head outputs zero logits: identical to the hard decision
    h = estimate_ber(HardDecoder(), bch31, [4.0], **kw)
    assert h.points[0].bit_errors == a.points[0].bit_errors


def test_ml_beats_hard(hamming):
    kw = dict(min_frame_errors=200, seed=3)
    ml = estimate_ber(MLDecoder(hamming), hamming, [5.0], **kw).points[0].ber
    hd = estimate_ber(HardDecoder(), hamming, [5.0], **kw).points[0].ber
    assert ml < hd


def test_rayleigh_is_worse(hamming):
    kw = dict(min_frame_errors=300, seed=5)
    aw = estimate_ber(HardDecoder(), hamming, [5.0], **kw).points[0].ber
    ry = estimate_ber(HardDecoder(), hamming, [5.0], channel="rayleigh", **kw).points[0].ber
    assert ry > aw


def test_argument_errors(hamming):
    with pytest.raises(ValueError):
        estimate_ber(HardDecoder(), hamming, [4.0], min_frame_errors=0)
    with pytest.raises(ValueError):
        estimate_ber(HardDecoder(), hamming, [4.0], channel="rician")


def test_csv_and_plot_output(tmp_path, hamming):
    rep = estimate_ber(HardDecoder(), hamming, [4.0, 6.0], min_frame_errors=50, seed=0)
    rep.write_csv(tmp_path / "r.csv")
    rep.write_plot_data(tmp_path / "p.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].split(",") == list(rep.CSV_COLUMNS)
    assert len(lines) == 3
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "ebno_db,ber"


def test_neg_ln_ber_bound():
    p = BerPoint(ebno_db=1.0, frames=10, frame_errors=0, bit_errors=0, bits=70, capped=True)
    assert p.neg_ln_ber is None
    assert p.neg_ln_ber_bound == pytest.approx(math.log(70))


TABLE2 = {  # code: (CrossMPT MFLOPs, ECCT MFLOPs)
    "bch_63_45": (11.8, 14.0),
    "ldpc_121_70": (28.8, 37.7),
    "ldpc_121_80": (26.3, 34.6),
    "turbo_132_40": (41.8, 55.0),
}


@pytest.mark.parametrize("name", sorted(TABLE2))
def test_flops_against_table(name):
    rep = flops_for_code(load_code(name), num_layers=6, embed_dim=128)
    cm, ec = TABLE2[name]
    assert rep.crossmpt.layer_dense / 1e6 == pytest.approx(cm, rel=0.2)
    assert rep.ecct.layer_dense / 1e6 == pytest.approx(ec, rel=0.2)
    assert rep.ratio == pytest.approx(cm / ec, rel=0.1)


@pytest.mark.parametrize("name", bundled_codes())
def test_flops_invariants(name):
    rep = flops_for_code(load_code(name), num_layers=6, embed_dim=128)
    assert rep.crossmpt.total_dense < rep.ecct.total_dense
    assert rep.crossmpt.total_masked < rep.ecct.total_masked
    for f in (rep.crossmpt, rep.ecct):
        assert f.attention_masked <= f.attention_dense
        assert f.total_masked <= f.total_dense
    assert rep.h1 == pytest.approx(rep.h2)


def test_flops_pure_function():
    a = flops_estimate(63, 45, 6, 128, 0.53, 0.32)
    b = flops_estimate(63, 45, 6, 128, 0.53, 0.32)
    assert a == b
    assert a.h == pytest.approx(0.53 * 81 ** 2)
    assert a.h1 == pytest.approx(0.32 * 63 * 18)
