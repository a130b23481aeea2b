import math

import numpy as np
import pytest

from crossmpt.channel import (ebno_to_sigma, modulate_bpsk, noise_target, receive, transmit_awgn,
                              transmit_rayleigh)
from crossmpt.codes import hard_decision


def test_bpsk():
    assert modulate_bpsk(np.zeros(4, dtype=np.uint8)).tolist() == [1, 1, 1, 1]
    assert modulate_bpsk(np.array([1, 0, 1])).tolist() == [-1, 1, -1]
    x = np.random.default_rng(0).integers(0, 2, size=(50, 9))
    assert np.array_equal(hard_decision(modulate_bpsk(x)), x)
    with pytest.raises(ValueError):
        modulate_bpsk(np.array([2]))


def test_ebno_to_sigma():
    assert ebno_to_sigma(0.0, 1.0) == pytest.approx(1 / math.sqrt(2))
    # independent evaluation: Eb/N0 = 10^0.3, N0/2 = 1 / (2 R Eb/N0)
    assert ebno_to_sigma(3.0, 0.5) == pytest.approx(math.sqrt(1 / (2 * 0.5 * 10 ** 0.3)), rel=1e-12)
    assert ebno_to_sigma(3.0, 0.5) == pytest.approx(0.7080, abs=1e-4)
    s = ebno_to_sigma(np.linspace(-2, 10, 30), 0.7)
    assert np.all(np.diff(s) < 0)
    for bad in (0.0, 1.5, -0.1):
        with pytest.raises(ValueError):
            ebno_to_sigma(1.0, bad)


def test_awgn_low_noise_and_replay():
    x = np.random.default_rng(1).integers(0, 2, size=(10, 7))
    rx = transmit_awgn(modulate_bpsk(x), 1e-9, np.random.default_rng(2))
    assert np.array_equal(rx.hard, x)
    a = transmit_awgn(modulate_bpsk(x), 0.8, np.random.default_rng(5)).y
    b = transmit_awgn(modulate_bpsk(x), 0.8, np.random.default_rng(5)).y
    assert np.array_equal(a, b)


def test_awgn_moments():
    rx = transmit_awgn(np.zeros(10 ** 6), 1.0, np.random.default_rng(11))
    z = rx.y
    assert abs(z.mean()) < 4e-3
    assert abs(z.var() - 1.0) < 0.01


def test_rayleigh():
    rx, h = transmit_rayleigh(np.ones(10 ** 6), 0.5, np.random.default_rng(3), return_fading=True)
    assert (h >= 0).all()
    assert h.mean() == pytest.approx(math.sqrt(math.pi / 2), rel=0.01)
    x = np.random.default_rng(4).integers(0, 2, size=1000)
    rx, h = transmit_rayleigh(modulate_bpsk(x), 1e-12, np.random.default_rng(6), return_fading=True)
    assert (h > 0).all()
    assert np.array_equal(rx.hard, x)


def test_received_word_fields(hamming):
    y = np.random.default_rng(0).normal(size=(20, 7))
    rx = receive(y, hamming.H)
    assert np.array_equal(rx.magnitude * modulate_bpsk(rx.hard), y)
    assert rx.synd.shape == (20, 3)


def test_noise_target():
    x_s = np.array([1.0, -1.0, 1.0, -1.0])
    assert not noise_target(x_s, x_s).any()
    y = x_s.copy()
    y[2] = -0.3
    assert noise_target(y, x_s).tolist() == [0, 0, 1, 0]
    rng = np.random.default_rng(2)
    t = rng.choice([-1.0, 1.0], size=(30, 4))
    xs2 = rng.choice([-1.0, 1.0], size=(30, 4))
    xs1 = np.broadcast_to(x_s, t.shape)
    assert np.array_equal(noise_target(xs1 * t, xs1), noise_target(xs2 * t, xs2))
    with pytest.raises(ValueError):
        noise_target(np.ones(3), np.ones(4))


def test_noise_target_is_hard_xor_x():
    rng = np.random.default_rng(9)
    x = rng.integers(0, 2, size=(100, 8)).astype(np.uint8)
    y = modulate_bpsk(x) + rng.normal(scale=0.9, size=x.shape)
    assert np.array_equal(noise_target(y, modulate_bpsk(x)), hard_decision(y) ^ x)
