"""BPSK modulation, AWGN / Rayleigh channels and the multiplicative-noise
training target.

All randomness comes from a caller-supplied ``numpy.random.Generator``.
Functions accept a single word of shape ``(n,)`` or a batch ``(B, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import hard_decision, syndrome

__all__ = [
    "ReceivedWord",
    "ChannelSample",
    "modulate_bpsk",
    "ebno_to_sigma",
    "receive",
    "transmit_awgn",
    "transmit_rayleigh",
    "noise_target",
]


@dataclass(frozen=True)
class ReceivedWord:
    """Channel output plus the quantities the decoders consume.

    ``synd`` is only filled in when a PCM was supplied to :func:`receive`.
    """

    y: np.ndarray
    magnitude: np.ndarray
    hard: np.ndarray
    synd: np.ndarray | None = None


@dataclass(frozen=True)
class ChannelSample:
    received: ReceivedWord
    transmitted_bits: np.ndarray
    target: np.ndarray
    ebno_db: np.ndarray


def modulate_bpsk(x) -> np.ndarray:
    """Bit 0 -> +1, bit 1 -> -1."""
    x = np.asarray(x)
    if not np.isin(x, (0, 1)).all():
        raise ValueError("BPSK input must be binary")
    return 1.0 - 2.0 * x.astype(np.float64)


def ebno_to_sigma(ebno_db, rate: float):
    """Noise standard deviation for unit-energy BPSK at the given Eb/N0 (dB).

    sigma = (2 R 10^(EbN0/10))^(-1/2).
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    return 1.0 / np.sqrt(2.0 * rate * 10.0 ** (np.asarray(ebno_db, dtype=float) / 10.0))


def receive(y, H=None) -> ReceivedWord:
    y = np.asarray(y, dtype=np.float64)
    hard = hard_decision(y)
    synd = syndrome(hard, H) if H is not None else None
    return ReceivedWord(y=y, magnitude=np.abs(y), hard=hard, synd=synd)


def _sigma_array(sigma, x_s):
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    # per-frame sigma broadcasts along the bit axis
    return sigma[..., None] if sigma.ndim and sigma.ndim == x_s.ndim - 1 else sigma


def transmit_awgn(x_s, sigma, rng: np.random.Generator, H=None) -> ReceivedWord:
    """y = x_s + z with z ~ N(0, sigma^2) i.i.d.; ``sigma`` may be per frame."""
    x_s = np.asarray(x_s, dtype=np.float64)
    s = _sigma_array(sigma, x_s)
    y = x_s + s * rng.standard_normal(x_s.shape)
    return receive(y, H)


def transmit_rayleigh(x_s, sigma, rng: np.random.Generator, H=None, return_fading=False):
    """y = h x_s + z, h ~ Rayleigh(scale 1) per bit, z ~ N(0, sigma^2).

    The decoder is non-coherent: only ``y`` is exposed in the result. Pass
    ``return_fading=True`` to also get ``h`` for inspection.
    """
    x_s = np.asarray(x_s, dtype=np.float64)
    s = _sigma_array(sigma, x_s)
    h = rng.rayleigh(1.0, x_s.shape)
    y = h * x_s + s * rng.standard_normal(x_s.shape)
    rx = receive(y, H)
    return (rx, h) if return_fading else rx


def noise_target(y, x_s) -> np.ndarray:
    """z~ = bin(sign(y * x_s)): 1 where the channel flipped the sign."""
    y = np.asarray(y, dtype=np.float64)
    x_s = np.asarray(x_s, dtype=np.float64)
    if y.shape != x_s.shape:
        raise ValueError(f"shape mismatch {y.shape} vs {x_s.shape}")
    return hard_decision(y * x_s)
