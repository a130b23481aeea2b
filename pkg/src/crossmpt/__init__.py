"""Transformer decoders (CrossMPT, ECCT) and classical baselines for binary
linear block codes, built on plain numpy.

Submodules: ``codes`` (PCMs, GF(2) algebra, encoding), ``channel`` (BPSK,
AWGN/Rayleigh), ``masks``, ``tensor`` (reverse-mode autodiff), ``model``,
``classical`` (BP, ML), ``train``, ``evaluation`` (BER harness, FLOPs) and
``cli``.
"""

from .channel import ebno_to_sigma, modulate_bpsk, receive, transmit_awgn
from .classical import DecodeResult, bp_decode, ml_decode
from .codes import LinearCode, encode, load_code, make_code, syndrome
from .evaluation import estimate_ber, flops_estimate, flops_for_code
from .masks import build_crossmpt_masks, build_ecct_mask, mask_density
from .model import ModelConfig, decode_nn, forward, init_params, load_checkpoint, param_count, save_checkpoint
from .train import TrainConfig, run_training

__version__ = "0.1.0"

__all__ = [
    "LinearCode", "load_code", "make_code", "encode", "syndrome",
    "modulate_bpsk", "ebno_to_sigma", "receive", "transmit_awgn",
    "build_crossmpt_masks", "build_ecct_mask", "mask_density",
    "ModelConfig", "init_params", "forward", "decode_nn", "param_count",
    "save_checkpoint", "load_checkpoint",
    "DecodeResult", "bp_decode", "ml_decode",
    "TrainConfig", "run_training",
    "estimate_ber", "flops_estimate", "flops_for_code",
]
