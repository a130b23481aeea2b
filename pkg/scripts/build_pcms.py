"""Regenerate the parity-check matrices bundled under src/crossmpt/pcm/.

The benchmark PCMs used for the density and FLOPs tables normally come from
the channel-codes database (https://rptu.de/channel-codes). This sandbox has
no route to it, so the same matrices are rebuilt here from their standard
algebraic definitions:

* BCH(n, k): systematic form H = [I | P^T], row i of P being the remainder
  of x^(n-k+i) mod g(x), g(x) the narrow-sense BCH generator over the
  primitive polynomial below.
* LDPC(121, 70/80): array codes with q = 11 and j = 5 / 4 block rows of
  circulant powers P^(a*b). The full j*q rows are kept, including the j-1
  dependent ones, as the database files do.
* Turbo(132, 40): LTE turbo code (RSC 13/15 octal, QPP interleaver
  f1 = 3, f2 = 10, trellis termination), written as [P^T | I] from its
  systematic generator.
* WRAN(384, 320): IEEE 802.22 rate-5/6 LDPC, expansion factor 16, built
  from the shared 802.16e base matrix with shifts floor(p * 16 / 96).

Run:  python scripts/build_pcms.py
"""

from pathlib import Path

import numpy as np

from crossmpt.codes import emit_alist, gf2_rank

OUT = Path(__file__).resolve().parents[1] / "src" / "crossmpt" / "pcm"


# --- GF(2)[x] helpers (polynomials as Python ints, bit i = coeff of x^i) ---

def pmul(a, b):
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def pmod(a, b):
    db = b.bit_length() - 1
    while a and a.bit_length() - 1 >= db:
        a ^= b << (a.bit_length() - 1 - db)
    return a


def gf_powers(m, prim):
    out, x = [], 1
    for _ in range((1 << m) - 1):
        out.append(x)
        x <<= 1
        if x >> m:
            x ^= prim
    return out


def minimal_poly(i, m, exp):
    order = (1 << m) - 1
    log = {v: e for e, v in enumerate(exp)}

    def mul(a, b):
        if a == 0 or b == 0:
            return 0
        return exp[(log[a] + log[b]) % order]

    coset, j = [], i
    while j not in coset:
        coset.append(j)
        j = (2 * j) % order
    poly = [1]
    for j in coset:
        root = exp[j]
        nxt = [0] * (len(poly) + 1)
        for t, c in enumerate(poly):
            nxt[t + 1] ^= c
            nxt[t] ^= mul(c, root)
        poly = nxt
    assert all(c in (0, 1) for c in poly)
    return sum(c << t for t, c in enumerate(poly))


def bch_generator(m, prim, t):
    exp = gf_powers(m, prim)
    g, seen = 1, set()
    for i in range(1, 2 * t, 2):
        mp = minimal_poly(i, m, exp)
        if mp not in seen:
            seen.add(mp)
            g = pmul(g, mp)
    return g


def bch_systematic_pcm(n, m, prim, t):
    g = bch_generator(m, prim, t)
    r = g.bit_length() - 1
    k = n - r
    P = np.array([[(pmod(1 << (r + i), g) >> b) & 1 for b in range(r)] for i in range(k)],
                 dtype=np.uint8)
    return np.hstack([np.eye(r, dtype=np.uint8), P.T])


def array_ldpc_pcm(q, j):
    P = np.roll(np.eye(q, dtype=np.uint8), 1, axis=1)
    return np.block([[np.linalg.matrix_power(P, (a * b) % q) % 2 for b in range(q)]
                     for a in range(j)]).astype(np.uint8)


def lte_turbo_pcm(K=40, f1=3, f2=10):
    perm = [(f1 * i + f2 * i * i) % K for i in range(K)]

    def rsc(u):
        s = [0, 0, 0]
        par = []
        for b in u:
            a = b ^ s[1] ^ s[2]
            par.append(a ^ s[0] ^ s[2])
            s = [a, s[0], s[1]]
        xt, zt = [], []
        for _ in range(3):
            xt.append(s[1] ^ s[2])
            zt.append(s[0] ^ s[2])
            s = [0, s[0], s[1]]
        return par, xt, zt

    def enc(u):
        z1, x1, t1 = rsc(u)
        z2, x2, t2 = rsc([u[p] for p in perm])
        return list(u) + z1 + z2 + x1 + t1 + x2 + t2

    G = np.array([enc(list(e)) for e in np.eye(K, dtype=int)], dtype=np.uint8)
    P = G[:, K:]
    return np.hstack([P.T, np.eye(P.shape[1], dtype=np.uint8)])


WIMAX_R56 = [
    [1, 25, 55, -1, 47, 4, -1, 91, 84, 8, 86, 52, 82, 33, 5, 0, 36, 20, 4, 77, 80, 0, -1, -1],
    [-1, 6, -1, 36, 40, 47, 12, 79, 47, -1, 41, 21, 12, 71, 14, 72, 0, 44, 49, 0, 0, 0, 0, -1],
    [51, 81, 83, 4, 67, -1, 21, -1, 31, 24, 91, 61, 81, 9, 86, 78, 60, 88, 67, 15, -1, -1, 0, 0],
    [50, -1, 50, 15, -1, 36, 13, 10, 11, 20, 53, 90, 29, 92, 57, 30, 84, 92, 11, 66, 80, -1, -1, 0],
]


def qc_expand(base, z, z0=96):
    blocks = []
    for row in base:
        line = []
        for p in row:
            if p < 0:
                line.append(np.zeros((z, z), dtype=np.uint8))
            else:
                line.append(np.roll(np.eye(z, dtype=np.uint8), (p * z) // z0, axis=1))
        blocks.append(np.hstack(line))
    return np.vstack(blocks)


def small_codes():
    return {
        "tree_3": np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8),
        "hamming_7_4": np.array([[(c + 1) >> b & 1 for c in range(7)] for b in range(3)],
                                dtype=np.uint8),
        "ext_hamming_8_4": np.array([[1] * 8,
                                     [0, 0, 0, 0, 1, 1, 1, 1],
                                     [0, 0, 1, 1, 0, 0, 1, 1],
                                     [0, 1, 0, 1, 0, 1, 0, 1]], dtype=np.uint8),
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    pcms = small_codes()
    pcms["bch_31_16"] = bch_systematic_pcm(31, 5, 0b100101, 3)
    pcms["bch_63_36"] = bch_systematic_pcm(63, 6, 0b1000011, 5)
    pcms["bch_63_45"] = bch_systematic_pcm(63, 6, 0b1000011, 3)
    pcms["bch_63_51"] = bch_systematic_pcm(63, 6, 0b1000011, 2)
    pcms["ldpc_121_70"] = array_ldpc_pcm(11, 5)
    pcms["ldpc_121_80"] = array_ldpc_pcm(11, 4)
    pcms["turbo_132_40"] = lte_turbo_pcm()
    pcms["wran_384_320"] = qc_expand(WIMAX_R56, 16)
    for name, H in pcms.items():
        (OUT / f"{name}.alist").write_text(emit_alist(H))
        print(f"{name:14s} {H.shape[0]:4d} x {H.shape[1]:4d}  rank {gf2_rank(H)}")


if __name__ == "__main__":
    main()
