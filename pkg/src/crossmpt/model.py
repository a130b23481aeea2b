"""CrossMPT and ECCT transformer decoders on top of :mod:`crossmpt.tensor`.

Both architectures share one parameter layout: a positional table of
``n + m`` rows (``m`` = number of PCM rows), ``N`` layers each holding
query/key/value/output projections, a two-layer GELU feed-forward network
and two layer norms, and an output head (norm, per-position d -> 1 map,
dense ``n + m -> n`` map). They differ only in how a layer routes its
inputs:

* ECCT runs one masked self-attention over the concatenated magnitude and
  syndrome embeddings.
* CrossMPT first updates the magnitude rows, attending to the syndrome rows
  under g(H^T), then updates the syndrome rows, attending to the refreshed
  magnitude rows under g(H). Both blocks use the same weights.

Blocks are pre-norm: ``x + Attn(LN1(x), LN1(ctx))`` then ``x + FFN(LN2(x))``.
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import tensor as T
from .channel import ReceivedWord
from .classical import DecodeResult
from .codes import syndrome
from .masks import AttentionMask, MaskSet, build_crossmpt_masks, build_ecct_mask
from .tensor import Tensor

__all__ = [
    "ModelConfig",
    "ModelParams",
    "init_params",
    "build_masks",
    "embed",
    "forward",
    "decode_nn",
    "param_count",
    "attention_scores",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
]

ARCHS = ("crossmpt", "ecct")
SYNDROME_EMBEDDINGS = ("pm1", "binary")


@dataclass(frozen=True)
class ModelConfig:
    n: int
    k: int
    num_layers: int = 6
    embed_dim: int = 128
    heads: int = 8
    ffnn_multiplier: int = 4
    arch: str = "crossmpt"
    n_checks: int | None = None
    syndrome_embedding: str = "pm1"

    def __post_init__(self):
        if self.n_checks is None:
            object.__setattr__(self, "n_checks", self.n - self.k)
        if self.arch not in ARCHS:
            raise ValueError(f"arch must be one of {ARCHS}")
        if self.syndrome_embedding not in SYNDROME_EMBEDDINGS:
            raise ValueError(f"syndrome_embedding must be one of {SYNDROME_EMBEDDINGS}")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.embed_dim % self.heads:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")
        if not 0 < self.k < self.n or self.n_checks < self.n - self.k:
            raise ValueError(f"inconsistent code dimensions n={self.n} k={self.k} m={self.n_checks}")

    @property
    def seq_len(self) -> int:
        return self.n + self.n_checks

    @classmethod
    def for_code(cls, code, **kw) -> "ModelConfig":
        return cls(n=code.n, k=code.k, n_checks=code.n_checks, **kw)

    def with_arch(self, arch: str) -> "ModelConfig":
        return replace(self, arch=arch)


class ModelParams:
    """Ordered mapping of parameter name -> :class:`Tensor`."""

    def __init__(self, tensors: dict[str, Tensor]):
        self.tensors = dict(tensors)

    def __getitem__(self, name) -> Tensor:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    def items(self):
        return self.tensors.items()

    def values(self):
        return self.tensors.values()

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.tensors.items()}

    def astype(self, dtype) -> "ModelParams":
        return ModelParams({k: Tensor(np.ascontiguousarray(v.data, dtype=dtype), requires_grad=True, name=k)
                            for k, v in self.tensors.items()})

    def copy(self) -> "ModelParams":
        return self.astype(next(iter(self.tensors.values())).dtype)

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None


def _layer_shapes(cfg: ModelConfig, layer: int):
    d, f = cfg.embed_dim, cfg.ffnn_multiplier * cfg.embed_dim
    p = f"layers.{layer}."
    return [
        (p + "attn.wq", (d, d)), (p + "attn.bq", (d,)),
        (p + "attn.wk", (d, d)), (p + "attn.bk", (d,)),
        (p + "attn.wv", (d, d)), (p + "attn.bv", (d,)),
        (p + "attn.wo", (d, d)), (p + "attn.bo", (d,)),
        (p + "ffn.w1", (d, f)), (p + "ffn.b1", (f,)),
        (p + "ffn.w2", (f, d)), (p + "ffn.b2", (d,)),
        (p + "norm1.gain", (d,)), (p + "norm1.bias", (d,)),
        (p + "norm2.gain", (d,)), (p + "norm2.bias", (d,)),
    ]


def param_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    d, L = cfg.embed_dim, cfg.seq_len
    shapes = [("pos_embed", (L, d))]
    for layer in range(cfg.num_layers):
        shapes += _layer_shapes(cfg, layer)
    shapes += [
        ("head.norm.gain", (d,)), ("head.norm.bias", (d,)),
        ("head.fc1.w", (d, 1)), ("head.fc1.b", (1,)),
        ("head.fc2.w", (L, cfg.n)), ("head.fc2.b", (cfg.n,)),
    ]
    return shapes


def init_params(cfg: ModelConfig, rng: np.random.Generator, dtype=np.float32) -> ModelParams:
    """Glorot-uniform matrices, zero biases, unit norm gains.

    The final dense map ``head.fc2.w`` starts at zero so the untrained
    decoder outputs logits of exactly 0 (every flip probability 1/2).
    """
    tensors = {}
    for name, shape in param_shapes(cfg):
        if name == "head.fc2.w":
            arr = np.zeros(shape)
        elif len(shape) == 2:
            bound = math.sqrt(6.0 / (shape[0] + shape[1]))
            arr = rng.uniform(-bound, bound, size=shape)
        elif name.endswith(".gain"):
            arr = np.ones(shape)
        else:
            arr = np.zeros(shape)
        tensors[name] = Tensor(np.ascontiguousarray(arr, dtype=dtype), requires_grad=True, name=name)
    return ModelParams(tensors)


def build_masks(cfg: ModelConfig, H):
    """Masks matching ``cfg.arch``: a MaskSet for CrossMPT, one mask for ECCT."""
    if cfg.arch == "crossmpt":
        return build_crossmpt_masks(H)
    return build_ecct_mask(H)


def param_count(params: ModelParams) -> tuple[int, dict[str, int]]:
    """Total scalar parameter count and a breakdown by component group."""
    groups = {"pos_embed": 0, "attention": 0, "ffn": 0, "norm": 0, "head": 0}
    for name, t in params.items():
        size = int(t.data.size)
        if name == "pos_embed":
            groups["pos_embed"] += size
        elif name.startswith("head."):
            groups["head"] += size
        elif ".attn." in name:
            groups["attention"] += size
        elif ".ffn." in name:
            groups["ffn"] += size
        else:
            groups["norm"] += size
    return sum(groups.values()), groups


# ---------------------------------------------------------------------------
# forward pass

def _syndrome_values(synd, cfg: ModelConfig):
    s = np.asarray(synd)
    if cfg.syndrome_embedding == "pm1":
        return 1.0 - 2.0 * s
    return s.astype(np.float64)


def embed(params: ModelParams, cfg: ModelConfig, magnitude, synd):
    """M_i = |y_i| W_i and S_j = phi(s_j) W_{n+j}.

    ``phi`` maps syndrome bits to +1/-1 by default (0 -> +1); with
    ``syndrome_embedding="binary"`` the raw 0/1 bits are used.
    """
    pos = params["pos_embed"]
    dt = pos.dtype
    magnitude = np.asarray(magnitude)
    if magnitude.shape[-1] != cfg.n or np.shape(synd)[-1] != cfg.n_checks:
        raise ValueError(f"inputs of length {magnitude.shape[-1]}/{np.shape(synd)[-1]} "
                         f"do not match n={cfg.n}, m={cfg.n_checks}")
    M = T.embed_scale(Tensor(magnitude.astype(dt)), pos[:cfg.n])
    S = T.embed_scale(Tensor(_syndrome_values(synd, cfg).astype(dt)), pos[cfg.n:])
    return M, S


def _linear(x, w, b):
    return T.add(T.matmul(x, w), b)


def _block(params, cfg, layer, x, ctx, mask, self_attention=False):
    p = f"layers.{layer}."
    g1, b1 = params[p + "norm1.gain"], params[p + "norm1.bias"]
    xn = T.layer_norm(x, g1, b1)
    cn = xn if self_attention else T.layer_norm(ctx, g1, b1)
    q = _linear(xn, params[p + "attn.wq"], params[p + "attn.bq"])
    k = _linear(cn, params[p + "attn.wk"], params[p + "attn.bk"])
    v = _linear(cn, params[p + "attn.wv"], params[p + "attn.bv"])
    a, scores = T.masked_softmax_attention(q, k, v, mask, cfg.heads)
    x = T.add(x, _linear(a, params[p + "attn.wo"], params[p + "attn.bo"]))
    h = T.layer_norm(x, params[p + "norm2.gain"], params[p + "norm2.bias"])
    h = T.gelu(_linear(h, params[p + "ffn.w1"], params[p + "ffn.b1"]))
    x = T.add(x, _linear(h, params[p + "ffn.w2"], params[p + "ffn.b2"]))
    return x, scores


def _check_masks(cfg: ModelConfig, masks):
    n, m = cfg.n, cfg.n_checks
    if cfg.arch == "crossmpt":
        if not isinstance(masks, MaskSet):
            raise TypeError("CrossMPT needs a MaskSet")
        if masks.m2s.shape != (n, m) or masks.s2m.shape != (m, n):
            raise ValueError(f"mask shapes {masks.m2s.shape}/{masks.s2m.shape} do not fit n={n}, m={m}")
    else:
        if not isinstance(masks, AttentionMask):
            raise TypeError("ECCT needs a single AttentionMask")
        if masks.shape != (n + m, n + m):
            raise ValueError(f"ECCT mask shape {masks.shape} does not fit n + m = {n + m}")


def _inputs(received, cfg):
    if isinstance(received, ReceivedWord):
        if received.synd is None:
            raise ValueError("received word carries no syndrome; build it with receive(y, H)")
        return received.magnitude, received.synd
    return received


def forward(params: ModelParams, cfg: ModelConfig, received, masks):
    """Run the decoder. Returns ``(logits, score_trace)``.

    ``received`` is a ReceivedWord (single or batched) or a
    ``(magnitude, syndrome)`` pair. ``logits`` is a Tensor of shape
    (..., n); positive entries predict a channel sign flip.
    ``score_trace[l]`` is a dict of attention-probability arrays for layer
    ``l``: keys ``"m2s"``/``"s2m"`` for CrossMPT, ``"self"`` for ECCT, each
    of shape (..., heads, rows, cols).
    """
    _check_masks(cfg, masks)
    magnitude, synd = _inputs(received, cfg)
    M, S = embed(params, cfg, magnitude, synd)
    trace = []
    if cfg.arch == "crossmpt":
        for layer in range(cfg.num_layers):
            M, sc1 = _block(params, cfg, layer, M, S, masks.m2s)
            S, sc2 = _block(params, cfg, layer, S, M, masks.s2m)
            trace.append({"m2s": sc1.data, "s2m": sc2.data})
        X = T.concat([M, S], axis=-2)
    else:
        X = T.concat([M, S], axis=-2)
        for layer in range(cfg.num_layers):
            X, sc = _block(params, cfg, layer, X, X, masks, self_attention=True)
            trace.append({"self": sc.data})
    X = T.layer_norm(X, params["head.norm.gain"], params["head.norm.bias"])
    z = _linear(X, params["head.fc1.w"], params["head.fc1.b"])
    z = T.reshape(z, z.shape[:-1])
    # (..., L) -> (..., 1, L) so the dense map is a matmul
    z = T.reshape(z, z.shape[:-1] + (1, cfg.seq_len))
    logits = _linear(z, params["head.fc2.w"], params["head.fc2.b"])
    logits = T.reshape(logits, logits.shape[:-2] + (cfg.n,))
    return logits, trace


def decode_nn(params: ModelParams, cfg: ModelConfig, received: ReceivedWord, masks, H) -> DecodeResult:
    """x_hat = hard(y) XOR [logit > 0]; converged means zero syndrome."""
    with T.no_grad():
        logits, _ = forward(params, cfg, received, masks)
    flip = (logits.data > 0).astype(np.uint8)
    bits = received.hard ^ flip
    ok = ~syndrome(bits, H).any(axis=-1)
    if bits.ndim == 1:
        return DecodeResult(bits=bits, soft=logits.data, converged=bool(ok), iterations_used=cfg.num_layers)
    return DecodeResult(bits=bits, soft=logits.data, converged=ok,
                        iterations_used=np.full(bits.shape[0], cfg.num_layers))


def attention_scores(params: ModelParams, cfg: ModelConfig, received, masks,
                     aggregate: str = "per_layer", reduce: str = "none"):
    """Head-averaged attention maps.

    Returns a list (one dict per layer) for ``aggregate="per_layer"`` or a
    single dict for ``"mean_over_layers"``. ``reduce="column_sum"`` sums
    each map over its query rows, leaving one score per key position.
    """
    if aggregate not in ("per_layer", "mean_over_layers"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    if reduce not in ("none", "column_sum"):
        raise ValueError(f"unknown reduce {reduce!r}")
    with T.no_grad():
        _, trace = forward(params, cfg, received, masks)
    layers = [{k: v.mean(axis=-3) for k, v in entry.items()} for entry in trace]
    if aggregate == "mean_over_layers":
        layers = [{k: np.mean([e[k] for e in layers], axis=0) for k in layers[0]}]
    if reduce == "column_sum":
        layers = [{k: v.sum(axis=-2) for k, v in e.items()} for e in layers]
    return layers[0] if aggregate == "mean_over_layers" else layers


# ---------------------------------------------------------------------------
# checkpoints

MAGIC = b"CMPTCKPT"
VERSION = 1
_HEADER = struct.Struct("<8sI7IBBQI")


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: ModelParams, cfg: ModelConfig, extra: dict | None = None,
                    step: int = 0):
    """Write parameters (plus optional extra named arrays) atomically.

    Layout, all little-endian: magic ``CMPTCKPT``; u32 version; u32 n, k,
    n_checks, num_layers, embed_dim, heads, ffnn_multiplier; u8 arch
    (0 crossmpt, 1 ecct); u8 syndrome embedding (0 pm1, 1 binary); u64 step;
    u32 record count; then per record: u32 name length, UTF-8 name, u32 rank,
    u32 dims, float32 values in row-major order.
    """
    records = list(params.arrays().items()) + list((extra or {}).items())
    chunks = [_HEADER.pack(MAGIC, VERSION, cfg.n, cfg.k, cfg.n_checks, cfg.num_layers,
                           cfg.embed_dim, cfg.heads, cfg.ffnn_multiplier,
                           ARCHS.index(cfg.arch), SYNDROME_EMBEDDINGS.index(cfg.syndrome_embedding),
                           step, len(records))]
    for name, arr in records:
        arr = np.ascontiguousarray(arr, dtype="<f4")
        raw = name.encode()
        chunks.append(struct.pack("<I", len(raw)) + raw)
        chunks.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        chunks.append(arr.tobytes())
    atomic_write_bytes(path, b"".join(chunks))


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`.

    Returns ``(cfg, params, extra, step)``; parameters come back as float32
    tensors, names not produced by :func:`param_shapes` land in ``extra``.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    (magic, version, n, k, m, N, d, heads, ff, arch, semb, step, count) = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    cfg = ModelConfig(n=n, k=k, n_checks=m, num_layers=N, embed_dim=d, heads=heads,
                      ffnn_multiplier=ff, arch=ARCHS[arch], syndrome_embedding=SYNDROME_EMBEDDINGS[semb])
    off = _HEADER.size
    arrays = {}
    try:
        for _ in range(count):
            (ln,) = struct.unpack_from("<I", data, off)
            off += 4
            name = data[off:off + ln].decode()
            off += ln
            (rank,) = struct.unpack_from("<I", data, off)
            off += 4
            dims = struct.unpack_from(f"<{rank}I", data, off)
            off += 4 * rank
            size = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(data, dtype="<f4", count=size, offset=off).reshape(dims)
            off += 4 * size
            arrays[name] = arr.astype(np.float32)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt record ({exc})") from None
    expected = dict(param_shapes(cfg))
    missing = [nm for nm in expected if nm not in arrays]
    if missing:
        raise CheckpointError(f"{path}: missing parameters {missing[:3]}")
    for nm, shape in expected.items():
        if arrays[nm].shape != shape:
            raise CheckpointError(f"{path}: {nm} has shape {arrays[nm].shape}, config expects {shape}")
    params = ModelParams({nm: Tensor(arrays[nm], requires_grad=True, name=nm) for nm in expected})
    extra = {nm: a for nm, a in arrays.items() if nm not in expected}
    return cfg, params, extra, step


def atomic_write_bytes(path, payload: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode())
