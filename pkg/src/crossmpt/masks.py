"""Additive attention masks for CrossMPT and ECCT, and their densities."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .codes import as_bit_matrix

__all__ = [
    "AttentionMask",
    "MaskSet",
    "EcctBlockCounts",
    "build_crossmpt_masks",
    "build_ecct_mask",
    "ecct_block_counts",
    "mask_density",
    "mask_density_exact",
]


@dataclass(frozen=True)
class AttentionMask:
    """Mask with entries 0 (attend) or -inf (blocked).

    ``allowed`` is the boolean pattern; ``additive`` is derived from it.
    """

    allowed: np.ndarray

    def __post_init__(self):
        a = np.array(self.allowed, dtype=bool)
        if a.ndim != 2:
            raise ValueError("attention mask must be 2-D")
        a.setflags(write=False)
        object.__setattr__(self, "allowed", a)

    @property
    def rows(self) -> int:
        return self.allowed.shape[0]

    @property
    def cols(self) -> int:
        return self.allowed.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.allowed.shape

    @property
    def unmasked_count(self) -> int:
        return int(self.allowed.sum())

    @property
    def additive(self) -> np.ndarray:
        return np.where(self.allowed, 0.0, -np.inf)

    def index_list(self) -> np.ndarray:
        """(row, col) pairs of unmasked entries, shape (unmasked_count, 2)."""
        return np.argwhere(self.allowed)

    @property
    def T(self) -> "AttentionMask":
        return AttentionMask(self.allowed.T)


@dataclass(frozen=True)
class MaskSet:
    """CrossMPT masks: ``m2s`` = g(H^T) (n x m), ``s2m`` = g(H) (m x n)."""

    m2s: AttentionMask
    s2m: AttentionMask

    @property
    def unmasked_count(self) -> int:
        return self.m2s.unmasked_count + self.s2m.unmasked_count

    @property
    def size(self) -> int:
        return self.m2s.rows * self.m2s.cols + self.s2m.rows * self.s2m.cols


def build_crossmpt_masks(H) -> MaskSet:
    H = as_bit_matrix(H).astype(bool)
    return MaskSet(m2s=AttentionMask(H.T), s2m=AttentionMask(H))


def build_ecct_mask(H, ablate_self_blocks: bool = False) -> AttentionMask:
    """ECCT self-attention mask over the n + m concatenated positions.

    Blocks are ``[[MM, MS], [SM, SS]]``. MM pairs bits that share a check
    (plus the diagonal), MS/SM link each bit with its checks, SS keeps only
    the diagonal. ``ablate_self_blocks`` masks MM off-diagonal and all of SS.
    """
    H = as_bit_matrix(H).astype(bool)
    m, n = H.shape
    Hi = H.astype(np.int64)
    mm = (Hi.T @ Hi) > 0
    eye_n = np.eye(n, dtype=bool)
    mm |= eye_n
    ss = np.eye(m, dtype=bool)
    if ablate_self_blocks:
        mm = eye_n
        ss = np.zeros((m, m), dtype=bool)
    full = np.block([[mm, H.T], [H, ss]])
    return AttentionMask(full)


@dataclass(frozen=True)
class EcctBlockCounts:
    mm: int
    ms: int
    sm: int
    ss: int


def ecct_block_counts(mask: AttentionMask, n: int) -> EcctBlockCounts:
    a = mask.allowed
    return EcctBlockCounts(mm=int(a[:n, :n].sum()), ms=int(a[:n, n:].sum()),
                           sm=int(a[n:, :n].sum()), ss=int(a[n:, n:].sum()))


def mask_density_exact(mask) -> Fraction:
    if isinstance(mask, MaskSet):
        return Fraction(mask.unmasked_count, mask.size)
    return Fraction(mask.unmasked_count, mask.rows * mask.cols)


def mask_density(mask) -> float:
    """Fraction of unmasked entries; for a MaskSet both maps are pooled."""
    return float(mask_density_exact(mask))
