import math

import numpy as np
import pytest
from scipy.stats import norm

from crossmpt import tensor as T
from crossmpt.channel import ebno_to_sigma, receive
from crossmpt.codes import load_code
from crossmpt.model import ModelConfig, build_masks, forward, init_params, save_checkpoint
from crossmpt.train import (TrainConfig, TrainingDiverged, cosine_lr, lr_trace, mean_loss,
                            run_training, sample_batch)


def tiny(code, **kw):
    return ModelConfig.for_code(code, num_layers=1, embed_dim=16, heads=4, **kw)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lr_start=1e-5, lr_end=1e-4)
    with pytest.raises(ValueError):
        TrainConfig(lr_end=0.0)
    with pytest.raises(ValueError):
        TrainConfig(ebno_range_db=(7.0, 3.0))
    with pytest.raises(ValueError):
        TrainConfig(ebno_range_db=(3.2, 3.8))


def test_sample_batch_zero_codeword(bch31):
    b = sample_batch(bch31, 256, (3, 7), np.random.default_rng(0))
    assert not b.transmitted_bits.any()
    assert np.array_equal(b.target, b.received.hard)
    assert set(np.unique(b.ebno_db)) <= {3.0, 4.0, 5.0, 6.0, 7.0}
    assert len(np.unique(b.ebno_db)) == 5
    u = sample_batch(bch31, 256, (3, 7), np.random.default_rng(0), snr_sampling="uniform")
    assert len(np.unique(u.ebno_db)) == 256


def test_flip_rate_matches_gaussian_tail():
    code = load_code("ext_hamming_8_4")
    frames = 100_000
    b = sample_batch(code, frames, (3, 3), np.random.default_rng(1))
    sigma = float(ebno_to_sigma(3.0, 0.5))
    p = norm.sf(1 / sigma)
    bits = frames * code.n
    se = math.sqrt(p * (1 - p) / bits)
    assert abs(b.target.mean() - p) < 3 * se


def test_random_codeword_batch_shares_noise(bch31):
    a = sample_batch(bch31, 64, (3, 7), np.random.default_rng(2))
    c = sample_batch(bch31, 64, (3, 7), np.random.default_rng(2), random_codewords=True)
    assert c.transmitted_bits.any()
    assert np.array_equal(a.received.magnitude, c.received.magnitude)
    assert np.array_equal(a.received.synd, c.received.synd)
    assert np.array_equal(a.target, c.target)


def test_lr_schedule_paper_defaults():
    trace = lr_trace(TrainConfig())
    assert len(trace) == 1000
    assert trace[0] == pytest.approx(1e-4)
    assert trace[-1] == pytest.approx(5e-7, rel=0.01)
    assert all(x >= y for x, y in zip(trace, trace[1:]))
    assert cosine_lr(99, 100, 1e-3, 1e-5) == pytest.approx(1e-5)


def test_zero_steps_leave_params(tree):
    cfg = tiny(tree)
    p0 = init_params(cfg, np.random.default_rng(0))
    rec = run_training(TrainConfig(epochs=0, seed=0), tree, cfg)
    assert rec.epoch_losses == [] and rec.lr_trace == []
    assert all(np.array_equal(p0[k].data, rec.params[k].data) for k in p0)


def test_untrained_loss_is_n_ln2(bch31):
    cfg = ModelConfig.for_code(bch31, num_layers=2, embed_dim=32)
    params = init_params(cfg, np.random.default_rng(0))
    rx = receive(np.ones((32, 31)) + 1e-6, bch31.H)
    z, _ = forward(params, cfg, rx, build_masks(cfg, bch31.H))
    loss = float(T.bce_with_logits_sum(z, np.zeros((32, 31))).data) / 32
    assert abs(loss - 31 * math.log(2)) < 0.1 * 31 * math.log(2)


@pytest.mark.parametrize("seed", [0, 1])
def test_toy_training_improves(tree, seed):
    cfg = tiny(tree)
    tc = TrainConfig(epochs=4, batches_per_epoch=50, batch_size=64, lr_start=1e-3, lr_end=1e-5, seed=seed)
    before = mean_loss(init_params(cfg, np.random.default_rng(seed)), cfg, tree, batch_size=256)
    rec = run_training(tc, tree, cfg)
    after = mean_loss(rec.params, cfg, tree, batch_size=256)
    assert len(rec.epoch_losses) == len(rec.lr_trace) == 4
    assert after < before
    assert rec.epoch_losses[-1] < rec.initial_loss


def test_codeword_invariant_training(bch31):
    cfg = tiny(bch31)
    base = dict(epochs=2, batches_per_epoch=5, batch_size=16, lr_start=1e-3, lr_end=1e-4, seed=3)
    a = run_training(TrainConfig(**base), bch31, cfg)
    b = run_training(TrainConfig(random_codewords=True, **base), bch31, cfg)
    assert a.epoch_losses == b.epoch_losses


def test_resume_is_bit_identical(tmp_path, hamming):
    cfg = tiny(hamming)
    tc = TrainConfig(epochs=4, batches_per_epoch=3, batch_size=16, lr_start=1e-3, lr_end=1e-5, seed=5)
    full = run_training(tc, hamming, cfg, checkpoint_dir=tmp_path, checkpoint_every=1,
                        loss_csv=tmp_path / "full.csv")
    resumed = run_training(tc, hamming, cfg, resume_from=tmp_path / "epoch_0002.ckpt",
                           loss_csv=tmp_path / "resumed.csv")
    assert resumed.epoch_losses == full.epoch_losses[2:]
    assert resumed.lr_trace == full.lr_trace[2:]
    assert all(np.array_equal(full.params[k].data, resumed.params[k].data) for k in full.params)
    tail = (tmp_path / "full.csv").read_text().splitlines()[3:]
    assert (tmp_path / "resumed.csv").read_text().splitlines()[1:] == tail


def test_resume_rejects_other_config(tmp_path, hamming):
    cfg = tiny(hamming)
    save_checkpoint(tmp_path / "c", init_params(cfg, np.random.default_rng(0)), cfg)
    with pytest.raises(ValueError):
        run_training(TrainConfig(epochs=1, batches_per_epoch=1), hamming,
                     ModelConfig.for_code(hamming, num_layers=2, embed_dim=16, heads=4),
                     resume_from=tmp_path / "c")


def test_loss_csv_deterministic(tmp_path, tree):
    cfg = tiny(tree)
    tc = TrainConfig(epochs=2, batches_per_epoch=4, batch_size=8, seed=11)
    run_training(tc, tree, cfg, loss_csv=tmp_path / "a.csv")
    run_training(tc, tree, cfg, loss_csv=tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "epoch,mean_loss,lr"


def test_nan_aborts_with_step(tree):
    cfg = tiny(tree)
    params = init_params(cfg, np.random.default_rng(0))
    params["head.fc2.b"].data[0] = np.nan
    with pytest.raises(TrainingDiverged) as exc:
        run_training(TrainConfig(epochs=1, batches_per_epoch=3, batch_size=4), tree, cfg, params=params)
    assert exc.value.step == 0
