#!/usr/bin/env python3
"""Regenerates attention_seed0.txt, the golden toy-attention map.

Independent reference for the seed-0 toy harness (grid 4x4, 3 tokens,
feature dim 8, latent dim 8): plain-loop matrix math on IEEE doubles plus a
hand-rolled MT19937, mirroring the library's documented draw order exactly
(projections q,k,v from seed, features from seed+1). Values are written as
hexfloats so the comparison is bit-exact.
"""

import math
import os


class MT19937:
    def __init__(self, seed):
        self.mt = [0] * 624
        self.mt[0] = seed & 0xFFFFFFFF
        for i in range(1, 624):
            self.mt[i] = (1812433253 * (self.mt[i - 1] ^ (self.mt[i - 1] >> 30)) + i) & 0xFFFFFFFF
        self.index = 624

    def _generate(self):
        for i in range(624):
            y = (self.mt[i] & 0x80000000) + (self.mt[(i + 1) % 624] & 0x7FFFFFFF)
            self.mt[i] = self.mt[(i + 397) % 624] ^ (y >> 1)
            if y % 2:
                self.mt[i] ^= 0x9908B0DF
        self.index = 0

    def next_u32(self):
        if self.index >= 624:
            self._generate()
        y = self.mt[self.index]
        self.index += 1
        y ^= y >> 11
        y ^= (y << 7) & 0x9D2C5680
        y ^= (y << 15) & 0xEFC60000
        return (y ^ (y >> 18)) & 0xFFFFFFFF


def unit(rng):
    return rng.next_u32() / 4294967296.0 * 2.0 - 1.0


def seeded_matrix(rows, cols, rng, scale):
    return [[unit(rng) * scale for _ in range(cols)] for _ in range(rows)]


def matmul(a, b):
    rows, inner, cols = len(a), len(b), len(b[0])
    out = [[0.0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            acc = 0.0
            for k in range(inner):
                acc += a[i][k] * b[k][j]
            out[i][j] = acc
    return out


def main():
    height = width = 4
    tokens = 3
    feature_dim = 8
    latent_dim = 8
    seed = 0

    feature_rng = MT19937(seed + 1)
    f_image = seeded_matrix(height * width, feature_dim, feature_rng, 1.0)
    f_text = seeded_matrix(tokens, feature_dim, feature_rng, 1.0)

    proj_rng = MT19937(seed)
    scale = 1.0 / math.sqrt(float(feature_dim))
    wq = seeded_matrix(feature_dim, latent_dim, proj_rng, scale)
    wk = seeded_matrix(feature_dim, latent_dim, proj_rng, scale)
    wv = seeded_matrix(feature_dim, latent_dim, proj_rng, scale)

    q = matmul(f_image, wq)
    k = matmul(f_text, wk)
    sqrt_d = math.sqrt(float(latent_dim))

    rows = []
    for p in range(height * width):
        logits = []
        for t in range(tokens):
            acc = 0.0
            for c in range(latent_dim):
                acc += q[p][c] * k[t][c]
            logits.append(acc / sqrt_d)
        row_max = logits[0]
        for v in logits[1:]:
            row_max = max(row_max, v)
        exps = [math.exp(v - row_max) for v in logits]
        total = 0.0
        for e in exps:
            total += e
        rows.append([e / total for e in exps])

    out_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "attention_seed0.txt")
    with open(out_path, "w") as out:
        out.write(f"{height * width} {tokens}\n")
        for row in rows:
            out.write(" ".join(v.hex() for v in row) + "\n")
    print(f"wrote {out_path}")


if __name__ == "__main__":
    main()
