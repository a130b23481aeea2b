"""GF(2) linear-code algebra: parity-check ingestion, generator derivation,
encoding, hard decisions and syndromes.

Bit matrices are plain ``numpy.uint8`` arrays holding 0/1 entries. Every
function here validates its inputs and returns read-only arrays where the
result is meant to be shared.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "AlistError",
    "RankError",
    "LinearCode",
    "as_bit_matrix",
    "parse_alist",
    "emit_alist",
    "parse_plain_pcm",
    "emit_plain_pcm",
    "read_pcm",
    "gf2_rank",
    "gf2_row_reduce",
    "independent_rows",
    "derive_generator",
    "make_code",
    "load_code",
    "bundled_codes",
    "encode",
    "syndrome",
    "hard_decision",
    "codebook",
]


class AlistError(ValueError):
    """Malformed alist input. ``line`` is 1-indexed into the source text."""

    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class RankError(ValueError):
    """Parity-check matrix does not have the rank the caller asked for."""

    def __init__(self, message, rank):
        self.rank = rank
        super().__init__(f"{message} (achieved GF(2) rank {rank})")


def as_bit_matrix(a) -> np.ndarray:
    """Validate ``a`` as a non-empty 2-D 0/1 matrix and return it as uint8."""
    arr = np.asarray(a)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"bit matrix must be 2-D and non-empty, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("bit matrix entries must be 0 or 1")
    return arr.astype(np.uint8)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# file formats

def parse_alist(text: str) -> np.ndarray:
    """Parse a MacKay alist description into a dense bit matrix.

    The layout is ``cols rows`` / ``max_col_deg max_row_deg`` / column
    degrees / row degrees / one line of 1-indexed row positions per column /
    one line of column positions per row. Zeros are padding. The row section
    may be absent; when present it must agree with the column section.
    """
    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines())]
    lines = [(no, toks) for no, toks in lines if toks]
    if len(lines) < 4:
        raise AlistError("alist needs at least a 4-line header", lines[-1][0] if lines else None)

    def ints(no, toks):
        try:
            return [int(t) for t in toks]
        except ValueError:
            raise AlistError(f"non-integer token in {toks!r}", no) from None

    no, head = lines[0]
    head = ints(no, head)
    if len(head) != 2 or min(head) < 1:
        raise AlistError("first line must be 'cols rows' with positive counts", no)
    n, m = head
    no, maxdeg = lines[1]
    maxdeg = ints(no, maxdeg)
    if len(maxdeg) != 2:
        raise AlistError("second line must hold the maximum column and row degrees", no)

    no, col_deg = lines[2]
    col_deg = ints(no, col_deg)
    if len(col_deg) != n:
        raise AlistError(f"expected {n} column degrees, got {len(col_deg)}", no)
    no, row_deg = lines[3]
    row_deg = ints(no, row_deg)
    if len(row_deg) != m:
        raise AlistError(f"expected {m} row degrees, got {len(row_deg)}", no)
    if max(col_deg) != maxdeg[0] or max(row_deg) != maxdeg[1]:
        raise AlistError("maximum degrees disagree with the degree lists", lines[1][0])

    body = lines[4:]
    if len(body) < n:
        last = body[-1][0] if body else lines[3][0]
        raise AlistError(f"expected {n} column position lines, found {len(body)}", last)

    H = np.zeros((m, n), dtype=np.uint8)
    for c in range(n):
        no, toks = body[c]
        pos = [p for p in ints(no, toks) if p != 0]
        if len(pos) != col_deg[c]:
            raise AlistError(f"column {c + 1} lists {len(pos)} positions, degree is {col_deg[c]}", no)
        for p in pos:
            if not 1 <= p <= m:
                raise AlistError(f"row position {p} out of range 1..{m}", no)
            if H[p - 1, c]:
                raise AlistError(f"duplicate position {p} in column {c + 1}", no)
            H[p - 1, c] = 1

    rows = body[n:]
    if rows:
        if len(rows) != m:
            raise AlistError(f"expected {m} row position lines, found {len(rows)}", rows[-1][0])
        for r in range(m):
            no, toks = rows[r]
            pos = [p for p in ints(no, toks) if p != 0]
            if len(pos) != row_deg[r]:
                raise AlistError(f"row {r + 1} lists {len(pos)} positions, degree is {row_deg[r]}", no)
            for p in pos:
                if not 1 <= p <= n:
                    raise AlistError(f"column position {p} out of range 1..{n}", no)
            if sorted(pos) != list(np.flatnonzero(H[r]) + 1):
                raise AlistError(f"row {r + 1} disagrees with the column section", no)
    elif not np.array_equal(H.sum(axis=1), row_deg):
        raise AlistError("row degrees disagree with the column section", lines[3][0])
    return H


def emit_alist(H) -> str:
    """Write ``H`` in alist format with zero padding to the maximum degree."""
    H = as_bit_matrix(H)
    m, n = H.shape
    col_deg = H.sum(axis=0).astype(int)
    row_deg = H.sum(axis=1).astype(int)
    cmax, rmax = int(col_deg.max()), int(row_deg.max())
    out = [f"{n} {m}", f"{cmax} {rmax}",
           " ".join(map(str, col_deg)), " ".join(map(str, row_deg))]
    for c in range(n):
        pos = list(np.flatnonzero(H[:, c]) + 1)
        out.append(" ".join(map(str, pos + [0] * (cmax - len(pos)))))
    for r in range(m):
        pos = list(np.flatnonzero(H[r]) + 1)
        out.append(" ".join(map(str, pos + [0] * (rmax - len(pos)))))
    return "\n".join(out) + "\n"


def parse_plain_pcm(text: str) -> np.ndarray:
    """One matrix row per line, entries 0/1 separated by whitespace."""
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise ValueError("empty PCM text")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ValueError(f"line {i + 1}: expected {width} entries, got {len(r)}")
    try:
        return as_bit_matrix([[int(t) for t in r] for r in rows])
    except ValueError as exc:
        raise ValueError(f"plain PCM: {exc}") from None


def emit_plain_pcm(H) -> str:
    H = as_bit_matrix(H)
    return "\n".join(" ".join(str(int(b)) for b in row) for row in H) + "\n"


def read_pcm(path) -> np.ndarray:
    """Read a PCM from disk; ``.alist`` files are alist, anything else plain text."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".alist":
        return parse_alist(text)
    return parse_plain_pcm(text)


# ---------------------------------------------------------------------------
# GF(2) linear algebra

def gf2_row_reduce(A) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2).

    Returns ``(R, pivots)`` where ``R`` has the same shape as ``A`` and
    ``pivots[i]`` is the pivot column of row ``i`` for ``i < rank``.
    """
    R = as_bit_matrix(A).copy()
    m, n = R.shape
    pivots = []
    r = 0
    for c in range(n):
        if r == m:
            break
        hits = np.flatnonzero(R[r:, c])
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            R[[r, p]] = R[[p, r]]
        others = np.flatnonzero(R[:, c])
        others = others[others != r]
        R[others] ^= R[r]
        pivots.append(c)
        r += 1
    return R, pivots


def gf2_rank(A) -> int:
    return len(gf2_row_reduce(A)[1])


def independent_rows(H) -> list[int]:
    """Indices of a maximal set of linearly independent rows, greedy in row order."""
    H = as_bit_matrix(H)
    keep = []
    basis = np.zeros((0, H.shape[1]), dtype=np.uint8)
    rank = 0
    for i in range(H.shape[0]):
        trial = np.vstack([basis, H[i]])
        r = gf2_rank(trial)
        if r > rank:
            keep.append(i)
            basis, rank = trial, r
    return keep


def derive_generator(H, allow_redundant: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Derive a generator matrix G with G @ H.T = 0 over GF(2).

    Returns ``(G, col_perm)``. ``col_perm`` lists the pivot (parity) columns
    of H followed by the information columns, so ``G[:, col_perm]`` has the
    systematic form ``[A | I_k]``. H itself is never permuted.

    Raises RankError if H has dependent rows (unless ``allow_redundant``) or
    if the code would have dimension 0.
    """
    H = as_bit_matrix(H)
    m, n = H.shape
    R, pivots = gf2_row_reduce(H)
    rank = len(pivots)
    if rank < m and not allow_redundant:
        raise RankError(f"H has {m} rows but is rank deficient", rank)
    k = n - rank
    if k < 1:
        raise RankError(f"code dimension would be {k}; need k >= 1", rank)
    info = [c for c in range(n) if c not in set(pivots)]
    # R[:rank] = [I | A] on columns (pivots, info): parity bits = A @ info bits
    A = R[:rank][:, info]
    G = np.zeros((k, n), dtype=np.uint8)
    G[:, info] = np.eye(k, dtype=np.uint8)
    G[:, pivots] = A.T
    return G, np.array(pivots + info, dtype=np.intp)


# ---------------------------------------------------------------------------
# codes

@dataclass(frozen=True)
class LinearCode:
    """A binary linear (n, k) code.

    ``H`` is kept exactly as loaded. It may carry more than ``n - k`` rows
    when the source file includes linearly dependent checks; ``n_checks``
    is its row count and is what syndromes, masks and models are sized by.
    """

    name: str
    n: int
    k: int
    H: np.ndarray
    G: np.ndarray
    col_perm: np.ndarray

    @property
    def n_checks(self) -> int:
        return self.H.shape[0]

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def rank(self) -> int:
        return self.n - self.k


_REDUNDANT_POLICIES = ("reject", "drop", "keep")


def make_code(H, name: str = "code", k: int | None = None, redundant_rows: str = "reject") -> LinearCode:
    """Build a LinearCode from a PCM.

    ``redundant_rows`` decides what happens if H has linearly dependent rows:
    ``"reject"`` raises RankError, ``"drop"`` removes them (greedy, first
    occurrence kept), ``"keep"`` leaves H untouched so masks are built over
    every row. If ``k`` is given it must equal ``n - rank(H)``.
    """
    if redundant_rows not in _REDUNDANT_POLICIES:
        raise ValueError(f"redundant_rows must be one of {_REDUNDANT_POLICIES}")
    H = as_bit_matrix(H)
    rank = gf2_rank(H)
    if rank < H.shape[0]:
        if redundant_rows == "reject":
            raise RankError(f"{name}: H has {H.shape[0]} rows but dependent checks", rank)
        if redundant_rows == "drop":
            H = H[independent_rows(H)]
    n = H.shape[1]
    if k is not None and k != n - rank:
        raise RankError(f"{name}: declared k={k} needs rank {n - k}", rank)
    G, perm = derive_generator(H, allow_redundant=True)
    return LinearCode(name=name, n=n, k=n - rank, H=_frozen(H), G=_frozen(G),
                      col_perm=_frozen(perm))


# name -> (file, declared k, redundant-row policy)
_BUNDLED = {
    "tree_3": ("tree_3.alist", 1, "reject"),
    "hamming_7_4": ("hamming_7_4.alist", 4, "reject"),
    "ext_hamming_8_4": ("ext_hamming_8_4.alist", 4, "reject"),
    "bch_31_16": ("bch_31_16.alist", 16, "reject"),
    "bch_63_36": ("bch_63_36.alist", 36, "reject"),
    "bch_63_45": ("bch_63_45.alist", 45, "reject"),
    "bch_63_51": ("bch_63_51.alist", 51, "reject"),
    "ldpc_121_70": ("ldpc_121_70.alist", 70, "keep"),
    "ldpc_121_80": ("ldpc_121_80.alist", 80, "keep"),
    "turbo_132_40": ("turbo_132_40.alist", 40, "reject"),
    "wran_384_320": ("wran_384_320.alist", 320, "reject"),
}


def bundled_codes() -> list[str]:
    return list(_BUNDLED)


def load_code(source, name: str | None = None, k: int | None = None,
              redundant_rows: str | None = None) -> LinearCode:
    """Load a code by bundled name or by file path.

    Lookup order for a bare name: bundled codes, then the directory named by
    the ``CROSSMPT_PCM_DIR`` environment variable.
    """
    key = str(source)
    if key in _BUNDLED:
        fname, k0, policy = _BUNDLED[key]
        text = resources.files("crossmpt").joinpath("pcm", fname).read_text()
        H = parse_alist(text)
        return make_code(H, name=name or key, k=k if k is not None else k0,
                         redundant_rows=redundant_rows or policy)
    path = Path(key)
    if not path.exists() and os.environ.get("CROSSMPT_PCM_DIR"):
        alt = Path(os.environ["CROSSMPT_PCM_DIR"]) / key
        if alt.exists():
            path = alt
    if not path.exists():
        stem = Path(key).stem
        if stem in _BUNDLED:
            return load_code(stem, name=name, k=k, redundant_rows=redundant_rows)
        raise FileNotFoundError(f"PCM not found: {key}")
    H = read_pcm(path)
    return make_code(H, name=name or path.stem, k=k, redundant_rows=redundant_rows or "reject")


# ---------------------------------------------------------------------------
# encoding and decisions

def encode(m, code: LinearCode) -> np.ndarray:
    """x = m G over GF(2). ``m`` may be a single message or a (batch, k) array."""
    m = np.asarray(m)
    if m.shape[-1] != code.k:
        raise ValueError(f"message length {m.shape[-1]} != k={code.k}")
    if not np.isin(m, (0, 1)).all():
        raise ValueError("message must be binary")
    return ((m.astype(np.int64) @ code.G) & 1).astype(np.uint8)


def syndrome(y_b, H) -> np.ndarray:
    """s = H y_b^T over GF(2); works on a word or a batch of words."""
    y_b = np.asarray(y_b)
    H = np.asarray(H)
    if y_b.shape[-1] != H.shape[1]:
        raise ValueError(f"word length {y_b.shape[-1]} != n={H.shape[1]}")
    return ((y_b.astype(np.int64) @ H.T.astype(np.int64)) & 1).astype(np.uint8)


def hard_decision(y) -> np.ndarray:
    """bin(sign(y)): 0 where y >= 0 (including +/-0.0), 1 where y < 0."""
    y = np.asarray(y, dtype=float)
    if not np.isfinite(y).all():
        raise ValueError("hard_decision needs finite inputs")
    return (y < 0).astype(np.uint8)


def codebook(code: LinearCode) -> np.ndarray:
    """All 2^k codewords, row i encoding the message whose bits are the
    binary expansion of i (most significant bit first)."""
    k = code.k
    if k > 24:
        raise ValueError(f"refusing to enumerate 2^{k} codewords (limit k <= 24)")
    idx = np.arange(2 ** k, dtype=np.int64)
    msgs = ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)
    return encode(msgs, code)
