"""Reference decoders: flooding belief propagation and exhaustive ML."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import LinearCode, as_bit_matrix, codebook, hard_decision, syndrome
from .channel import modulate_bpsk

__all__ = [
    "DecodeResult",
    "TannerGraph",
    "bp_decode",
    "ml_decode",
    "ML_MAX_K",
]

ML_MAX_K = 24
_TANH_CLAMP = 1.0 - 1e-12


@dataclass(frozen=True)
class DecodeResult:
    """Decoder output for one word ``(n,)`` or a batch ``(B, n)``.

    ``converged`` and ``iterations_used`` are scalars for a single word and
    per-frame arrays for a batch.
    """

    bits: np.ndarray
    soft: np.ndarray | None
    converged: np.ndarray | bool
    iterations_used: np.ndarray | int


class TannerGraph:
    """Edge-list view of H: edge e joins check ``check[e]`` and bit ``bit[e]``.

    ``to_checks`` (E x m) and ``to_bits`` (E x n) are 0/1 incidence matrices;
    right-multiplying per-edge values by them sums the values per node.
    """

    def __init__(self, H):
        H = as_bit_matrix(H)
        self.H = H
        self.m, self.n = H.shape
        self.check, self.bit = np.nonzero(H)
        self.n_edges = self.check.size
        self.bits_of_check = [np.flatnonzero(H[c]) for c in range(self.m)]
        self.checks_of_bit = [np.flatnonzero(H[:, b]) for b in range(self.n)]
        e = np.arange(self.n_edges)
        self.to_checks = np.zeros((self.n_edges, self.m))
        self.to_checks[e, self.check] = 1.0
        self.to_bits = np.zeros((self.n_edges, self.n))
        self.to_bits[e, self.bit] = 1.0


def bp_decode(code: LinearCode, y, sigma: float, max_iter: int = 50,
              variant: str = "sum_product", min_sum_scale: float = 1.0) -> DecodeResult:
    """Flooding BP from channel LLRs ``2 y / sigma^2`` (positive favours 0).

    Frames stop individually as soon as their hard decision satisfies every
    check; a frame whose received hard decision is already a codeword is
    returned unchanged with ``iterations_used == 0``.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if variant not in ("sum_product", "min_sum"):
        raise ValueError(f"unknown BP variant {variant!r}")
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    Y = y[None] if single else y
    B = Y.shape[0]

    graph = TannerGraph(code.H)
    Mc, Mb = graph.to_checks, graph.to_bits
    H = code.H
    llr = 2.0 * Y / sigma ** 2

    bits = hard_decision(Y)
    post = llr.copy()
    done = ~syndrome(bits, H).any(axis=1)
    iters = np.zeros(B, dtype=np.int64)
    c2v = np.zeros((B, graph.n_edges))

    for it in range(1, max_iter + 1):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        L = llr[act]
        cv = c2v[act]
        # variable -> check: total belief minus the edge's own incoming message
        v2c = (L + cv @ Mb)[:, graph.bit] - cv
        if variant == "sum_product":
            t = np.clip(np.tanh(0.5 * v2c), -_TANH_CLAMP, _TANH_CLAMP)
            # extrinsic product via log-magnitudes and sign parity
            zero = t == 0.0
            logabs = np.log(np.where(zero, 1.0, np.abs(t)))
            neg = (t < 0).astype(np.float64)
            tot_log = (logabs @ Mc)[:, graph.check] - logabs
            tot_neg = (neg @ Mc)[:, graph.check] - neg
            tot_zero = (zero.astype(np.float64) @ Mc)[:, graph.check] - zero
            sign = 1.0 - 2.0 * (np.rint(tot_neg) % 2)
            prod = np.where(tot_zero > 0.5, 0.0, sign * np.exp(tot_log))
            prod = np.clip(prod, -_TANH_CLAMP, _TANH_CLAMP)
            new = 2.0 * np.arctanh(prod)
        else:
            new = _min_sum_update(v2c, graph) * min_sum_scale
        c2v[act] = new
        post_a = L + new @ Mb
        post[act] = post_a
        b = hard_decision(post_a)
        bits[act] = b
        iters[act] = it
        done[act] = ~syndrome(b, H).any(axis=1)

    soft = post[0] if single else post
    if single:
        return DecodeResult(bits=bits[0], soft=soft, converged=bool(done[0]),
                            iterations_used=int(iters[0]))
    return DecodeResult(bits=bits, soft=soft, converged=done, iterations_used=iters)


def _min_sum_update(v2c, graph: TannerGraph):
    out = np.empty_like(v2c)
    mag = np.abs(v2c)
    neg = v2c < 0
    for c in range(graph.m):
        edges = np.flatnonzero(graph.check == c)
        m = mag[:, edges]
        if edges.size == 1:
            out[:, edges] = 0.0
            continue
        order = np.argsort(m, axis=1)
        first = np.take_along_axis(m, order[:, :1], axis=1)
        second = np.take_along_axis(m, order[:, 1:2], axis=1)
        is_min = np.zeros_like(m, dtype=bool)
        np.put_along_axis(is_min, order[:, :1], True, axis=1)
        ext = np.where(is_min, second, first)
        parity = neg[:, edges].sum(axis=1, keepdims=True) % 2
        sgn = np.where((parity + neg[:, edges]) % 2 == 1, -1.0, 1.0)
        out[:, edges] = sgn * ext
    return out


def ml_decode(code: LinearCode, y) -> DecodeResult:
    """Nearest codeword in Euclidean distance over all 2^k codewords.

    Ties go to the codeword with the smallest message index (message bits
    read as a binary number, most significant bit first).
    """
    if code.k > ML_MAX_K:
        raise ValueError(f"ML decoding enumerates 2^k codewords; k={code.k} exceeds limit {ML_MAX_K}")
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    Y = y[None] if single else y
    C = codebook(code)
    X = modulate_bpsk(C)
    best = np.empty(Y.shape[0], dtype=np.int64)
    step = max(1, (1 << 22) // max(1, X.shape[0] * Y.shape[1]))
    for s in range(0, Y.shape[0], step):
        d = ((Y[s:s + step, None, :] - X[None]) ** 2).sum(axis=-1)
        best[s:s + step] = d.argmin(axis=1)
    bits = C[best]
    if single:
        return DecodeResult(bits=bits[0], soft=None, converged=True, iterations_used=0)
    return DecodeResult(bits=bits, soft=None, converged=np.ones(len(best), dtype=bool),
                        iterations_used=np.zeros(len(best), dtype=np.int64))
