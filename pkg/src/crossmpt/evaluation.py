"""Monte-Carlo BER/FER estimation and the attention FLOPs estimator.

Decoders are picklable callables ``decoder(y, sigma) -> DecodeResult`` on a
batch ``y`` of shape (B, n). Frames are simulated in fixed-size chunks whose
generator is seeded by ``(seed, snr_index, chunk_index)``; chunks are
consumed in order, so the report does not depend on the worker count.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import ebno_to_sigma, modulate_bpsk, receive
from .classical import DecodeResult, bp_decode, ml_decode
from .codes import LinearCode, encode, hard_decision
from .masks import build_crossmpt_masks, build_ecct_mask, mask_density
from .model import ModelConfig, ModelParams, atomic_write_text, build_masks, decode_nn
from .tensor import Tensor

__all__ = [
    "BerPoint",
    "BerReport",
    "HardDecoder",
    "BPDecoder",
    "MLDecoder",
    "NNDecoder",
    "GenieDecoder",
    "estimate_ber",
    "FlopsReport",
    "flops_estimate",
    "flops_for_code",
]

CHANNELS = ("awgn", "rayleigh")


# ---------------------------------------------------------------------------
# decoders

class HardDecoder:
    """Uncoded reference: the sign decision of each bit."""

    name = "hard"

    def __call__(self, y, sigma):
        b = hard_decision(y)
        return DecodeResult(bits=b, soft=None, converged=np.ones(len(b), dtype=bool),
                            iterations_used=np.zeros(len(b), dtype=np.int64))


class BPDecoder:
    def __init__(self, code: LinearCode, max_iter: int = 50, variant: str = "sum_product",
                 min_sum_scale: float = 1.0):
        self.code = code
        self.max_iter = max_iter
        self.variant = variant
        self.min_sum_scale = min_sum_scale
        self.name = "bp" if variant == "sum_product" else "ms"

    def __call__(self, y, sigma):
        return bp_decode(self.code, y, sigma, self.max_iter, self.variant, self.min_sum_scale)


class MLDecoder:
    name = "ml"

    def __init__(self, code: LinearCode):
        self.code = code

    def __call__(self, y, sigma):
        return ml_decode(self.code, y)


class NNDecoder:
    """Transformer decoder; holds plain arrays so it pickles cheaply."""

    def __init__(self, params: ModelParams, cfg: ModelConfig, code: LinearCode):
        self.arrays = params.arrays()
        self.cfg = cfg
        self.code = code
        self.name = cfg.arch
        self._params = None
        self._masks = None

    def __getstate__(self):
        state = dict(self.__dict__)
        state["_params"] = state["_masks"] = None
        return state

    def __call__(self, y, sigma):
        if self._params is None:
            self._params = ModelParams({k: Tensor(v) for k, v in self.arrays.items()})
            self._masks = build_masks(self.cfg, self.code.H)
        rx = receive(y, self.code.H)
        return decode_nn(self._params, self.cfg, rx, self._masks, self.code.H)


class GenieDecoder:
    """Returns the transmitted codeword. Used to check the harness itself."""

    name = "genie"
    wants_truth = True

    def __call__(self, y, sigma, truth=None):
        bits = np.array(truth, dtype=np.uint8)
        return DecodeResult(bits=bits, soft=None, converged=np.ones(len(bits), dtype=bool),
                            iterations_used=np.zeros(len(bits), dtype=np.int64))


# ---------------------------------------------------------------------------
# Monte Carlo

@dataclass(frozen=True)
class BerPoint:
    ebno_db: float
    frames: int
    frame_errors: int
    bit_errors: int
    bits: int
    capped: bool

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    @property
    def neg_ln_ber(self) -> float | None:
        """-ln(BER), or None when no bit error was seen."""
        return -math.log(self.ber) if self.bit_errors else None

    @property
    def neg_ln_ber_bound(self) -> float | None:
        """With zero errors, -ln(1/bits): the estimate is at least this."""
        return math.log(self.bits) if self.bits and not self.bit_errors else None

    def neg_ln_ber_text(self) -> str:
        if self.neg_ln_ber is not None:
            return f"{self.neg_ln_ber:.6f}"
        if self.neg_ln_ber_bound is not None:
            return f">{self.neg_ln_ber_bound:.6f}"
        return ""


@dataclass
class BerReport:
    decoder: str
    code: str
    seed: int
    channel: str
    min_frame_errors: int
    max_frames: int
    points: list[BerPoint] = field(default_factory=list)

    CSV_COLUMNS = ("code", "decoder", "channel", "seed", "ebno_db", "frames", "frame_errors",
                   "bit_errors", "bits", "ber", "fer", "neg_ln_ber", "capped")

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        if header:
            buf.write(",".join(self.CSV_COLUMNS) + "\n")
        for p in self.points:
            row = (self.code, self.decoder, self.channel, self.seed, repr(float(p.ebno_db)), p.frames,
                   p.frame_errors, p.bit_errors, p.bits, repr(p.ber), repr(p.fer),
                   p.neg_ln_ber_text(), int(p.capped))
            buf.write(",".join(str(v) for v in row) + "\n")
        return buf.getvalue()

    def write_csv(self, path):
        atomic_write_text(path, self.to_csv())

    def plot_data(self) -> str:
        lines = ["ebno_db,ber"]
        lines += [f"{p.ebno_db!r},{p.ber!r}" for p in self.points]
        return "\n".join(lines) + "\n"

    def write_plot_data(self, path):
        atomic_write_text(path, self.plot_data())


def _run_chunk(task):
    decoder, code, sigma, ebno_db, channel, seed, snr_idx, chunk_idx, frames = task
    rng = np.random.default_rng([seed, snr_idx, chunk_idx])
    msgs = rng.integers(0, 2, size=(frames, code.k), dtype=np.uint8)
    x = encode(msgs, code)
    x_s = modulate_bpsk(x)
    noise = rng.standard_normal(x_s.shape)
    if channel == "rayleigh":
        h = rng.rayleigh(1.0, x_s.shape)
        y = h * x_s + sigma * noise
    else:
        y = x_s + sigma * noise
    if getattr(decoder, "wants_truth", False):
        res = decoder(y, sigma, truth=x)
    else:
        res = decoder(y, sigma)
    wrong = np.asarray(res.bits) != x
    per_frame = wrong.sum(axis=1)
    return int(np.count_nonzero(per_frame)), int(per_frame.sum())


def estimate_ber(decoder, code: LinearCode, ebno_list, min_frame_errors: int = 500,
                 max_frames: int = 10 ** 7, seed: int = 0, chunk_size: int = 1000,
                 workers: int = 1, channel: str = "awgn", decoder_id: str | None = None) -> BerReport:
    """Simulate random codewords at each Eb/N0 until ``min_frame_errors``
    frame errors or ``max_frames`` frames, whichever comes first.

    With ``workers > 1`` chunks run in a process pool in waves of
    ``workers``; results are folded in chunk order and the fold stops at the
    same chunk a sequential run would, so the report is identical.
    """
    if min_frame_errors < 1:
        raise ValueError("min_frame_errors must be >= 1")
    if max_frames < 1 or chunk_size < 1 or workers < 1:
        raise ValueError("max_frames, chunk_size and workers must be >= 1")
    if channel not in CHANNELS:
        raise ValueError(f"channel must be one of {CHANNELS}")
    report = BerReport(decoder=decoder_id or getattr(decoder, "name", type(decoder).__name__),
                       code=code.name, seed=seed, channel=channel,
                       min_frame_errors=min_frame_errors, max_frames=max_frames)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for si, ebno in enumerate(ebno_list):
            sigma = float(ebno_to_sigma(ebno, code.rate))
            frames = fe = be = 0
            chunk_idx = 0
            while fe < min_frame_errors and frames < max_frames:
                tasks = []
                planned = frames
                for _ in range(workers):
                    if planned >= max_frames:
                        break
                    size = min(chunk_size, max_frames - planned)
                    tasks.append((decoder, code, sigma, float(ebno), channel, seed, si,
                                  chunk_idx + len(tasks), size))
                    planned += size
                results = pool.map(_run_chunk, tasks) if pool else map(_run_chunk, tasks)
                for task, (f_err, b_err) in zip(tasks, results):
                    if fe >= min_frame_errors:
                        break
                    frames += task[-1]
                    fe += f_err
                    be += b_err
                    chunk_idx += 1
            report.points.append(BerPoint(ebno_db=float(ebno), frames=frames, frame_errors=fe,
                                          bit_errors=be, bits=frames * code.n,
                                          capped=fe < min_frame_errors))
    finally:
        if pool is not None:
            pool.shutdown()
    return report


# ---------------------------------------------------------------------------
# FLOPs

@dataclass(frozen=True)
class ModelFlops:
    """FLOPs of one architecture. ``layer_*`` count one decoder layer under
    the dense convention (Q/K/V/O projections plus the two attention
    products); ``total_*`` add the FFN, norms, softmax and head for all
    layers. ``*_masked`` only count unmasked attention entries."""

    layer_dense: float
    layer_masked: float
    attention_dense: float
    attention_masked: float
    total_dense: float
    total_masked: float
    density: float


@dataclass(frozen=True)
class FlopsReport:
    n: int
    k: int
    num_layers: int
    embed_dim: int
    rho1: float
    rho2: float
    h: float
    h1: float
    h2: float
    crossmpt: ModelFlops
    ecct: ModelFlops

    @property
    def ratio(self) -> float:
        """CrossMPT / ECCT under the per-layer dense convention."""
        return self.crossmpt.layer_dense / self.ecct.layer_dense

    CSV_COLUMNS = ("model", "n", "k", "num_layers", "embed_dim", "density", "layer_flops",
                   "layer_flops_masked", "attention_flops", "attention_flops_masked",
                   "total_flops", "total_flops_masked", "h_terms")

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.CSV_COLUMNS) + "\n")
        for name, f, hterm in (("crossmpt", self.crossmpt, self.h1 + self.h2), ("ecct", self.ecct, self.h)):
            row = (name, self.n, self.k, self.num_layers, self.embed_dim, f"{f.density:.6f}",
                   f"{f.layer_dense:.0f}", f"{f.layer_masked:.0f}", f"{f.attention_dense:.0f}",
                   f"{f.attention_masked:.0f}", f"{f.total_dense:.0f}", f"{f.total_masked:.0f}",
                   f"{hterm:.4f}")
            buf.write(",".join(str(v) for v in row) + "\n")
        return buf.getvalue()


def _model_flops(L, area, density, n, N, d, ffnn_multiplier, heads):
    proj = 8.0 * d * d * L                        # 4 projections, 2 FLOPs per MAC
    attn_dense = 4.0 * d * area                   # QK^T and AV
    attn_masked = 4.0 * d * area * density
    # softmax: exp, sum, divide per entry and head
    soft_dense = 3.0 * heads * area
    soft_masked = soft_dense * density
    ffn = 2.0 * 2.0 * L * d * ffnn_multiplier * d + L * d * ffnn_multiplier  # two linears + GELU
    norms = 2 * 5.0 * L * d + 2.0 * L * d                                      # two norms + residual adds
    per_layer_rest = ffn + norms
    head = 5.0 * L * d + 2.0 * L * d + 2.0 * L * n
    total_dense = N * (proj + attn_dense + soft_dense + per_layer_rest) + head
    total_masked = N * (proj + attn_masked + soft_masked + per_layer_rest) + head
    return ModelFlops(layer_dense=proj + attn_dense, layer_masked=proj + attn_masked,
                      attention_dense=N * attn_dense, attention_masked=N * attn_masked,
                      total_dense=total_dense, total_masked=total_masked, density=density)


def flops_estimate(n: int, k: int, num_layers: int, embed_dim: int, rho1: float, rho2: float,
                   heads: int = 8, ffnn_multiplier: int = 4) -> FlopsReport:
    """FLOPs of ECCT and CrossMPT as a pure function of (n, k, N, d, rho).

    One multiply-accumulate counts 2 FLOPs. The ECCT attention area is
    (2n-k)^2 and CrossMPT's two maps cover 2n(n-k) entries; the mask-aware
    counts scale these by the densities, giving h = rho1 (2n-k)^2 and
    h1 + h2 = 2 rho2 n (n-k).
    """
    L = 2 * n - k
    m = n - k
    area_e = float(L * L)
    area_c = 2.0 * n * m
    ecct = _model_flops(L, area_e, rho1, n, num_layers, embed_dim, ffnn_multiplier, heads)
    cross = _model_flops(L, area_c, rho2, n, num_layers, embed_dim, ffnn_multiplier, heads)
    return FlopsReport(n=n, k=k, num_layers=num_layers, embed_dim=embed_dim, rho1=rho1, rho2=rho2,
                       h=rho1 * area_e, h1=rho2 * n * m, h2=rho2 * m * n, crossmpt=cross, ecct=ecct)


def flops_for_code(code: LinearCode, num_layers: int = 6, embed_dim: int = 128, heads: int = 8,
                   ffnn_multiplier: int = 4, k: int | None = None) -> FlopsReport:
    """Densities from the code's masks, then :func:`flops_estimate`.

    ``k`` defaults to the code dimension; for PCMs with redundant rows the
    area terms still use n - k, not the number of PCM rows.
    """
    rho1 = mask_density(build_ecct_mask(code.H))
    rho2 = mask_density(build_crossmpt_masks(code.H))
    return flops_estimate(code.n, code.k if k is None else k, num_layers, embed_dim, rho1, rho2,
                          heads, ffnn_multiplier)
