"""Binary BCH codes of length 127 with hard-decision decoding, and LLR export.

Bit vectors are indexed by polynomial degree: ``word[i]`` is the coefficient
of ``x**i``.  Encoding is systematic with the message in the top ``k``
positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channel import ChannelParams
from .quantizer import Quantizer, quantized_transition

PRIMITIVE_POLY = 0b10001001  # x^7 + x^3 + 1
LLR_FLOOR = 1e-30


class GF2m:
    """GF(2^m) with exp/log tables."""

    def __init__(self, m: int = 7, poly: int = PRIMITIVE_POLY):
        self.m = m
        self.order = (1 << m) - 1
        exp = [0] * (2 * self.order)
        log = [0] * (1 << m)
        x = 1
        for i in range(self.order):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & (1 << m):
                x ^= poly
        if x != 1:
            raise ValueError("polynomial is not primitive")
        for i in range(self.order, 2 * self.order):
            exp[i] = exp[i - self.order]
        self.exp = exp
        self.log = log

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[self.log[a] + self.log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return self.exp[self.order - self.log[a]]

    def pow_alpha(self, k: int) -> int:
        return self.exp[k % self.order]


def _poly_mul_gf2(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def _poly_mod_gf2(a: int, g: int) -> int:
    dg = g.bit_length() - 1
    while a.bit_length() - 1 >= dg:
        a ^= g << (a.bit_length() - 1 - dg)
    return a


def _minimal_poly(field: GF2m, k: int) -> int:
    """Minimal polynomial of alpha^k as a GF(2) bit mask."""
    coset = []
    e = k % field.order
    while e not in coset:
        coset.append(e)
        e = (2 * e) % field.order
    # product of (x - alpha^e) over the cyclotomic coset, coefficients in GF(2^m)
    poly = [1]
    for e in coset:
        root = field.pow_alpha(e)
        nxt = [0] * (len(poly) + 1)
        for i, c in enumerate(poly):
            nxt[i + 1] ^= c
            nxt[i] ^= field.mul(c, root)
        poly = nxt
    if any(c not in (0, 1) for c in poly):
        raise RuntimeError("minimal polynomial not binary")
    return sum(c << i for i, c in enumerate(poly))


@dataclass
class BchCode:
    """Narrow-sense binary BCH code of length 127."""

    k_code: int
    n_code: int = 127
    gf: GF2m = field(default_factory=GF2m, repr=False)
    t_corr: int = field(init=False)
    generator: int = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_code != self.gf.order:
            raise ValueError("only primitive-length codes are supported")
        g, t, used = 1, 0, set()
        while g.bit_length() - 1 < self.n_code - self.k_code:
            t += 1
            for k in (2 * t - 1,):
                mp = _minimal_poly(self.gf, k)
                if mp not in used:
                    used.add(mp)
                    g = _poly_mul_gf2(g, mp)
        if g.bit_length() - 1 != self.n_code - self.k_code:
            raise ValueError(f"no narrow-sense BCH code with n={self.n_code}, k={self.k_code}")
        self.t_corr = t
        self.generator = g
        nk = self.n_code - self.k_code
        # parity of each message unit vector
        parity = np.zeros((self.k_code, nk), dtype=np.uint8)
        for i in range(self.k_code):
            rem = _poly_mod_gf2(1 << (nk + i), g)
            parity[i] = [(rem >> b) & 1 for b in range(nk)]
        self._parity = parity
        # alpha^(i*pos) for syndromes S_1..S_2t
        powers = np.arange(1, 2 * t + 1)[:, None] * np.arange(self.n_code)[None, :]
        self._syn_table = np.array(self.gf.exp, dtype=np.int64)[powers % self.gf.order]

    @classmethod
    def from_id(cls, name: str) -> "BchCode":
        """``bch127-113`` or ``bch127-92``."""
        try:
            n, k = name.lower().removeprefix("bch").split("-")
            return _cached_code(int(k), int(n))
        except (ValueError, AttributeError) as exc:
            raise ValueError(f"unknown code id {name!r}") from exc

    @property
    def name(self) -> str:
        return f"bch{self.n_code}-{self.k_code}"

    def encode(self, message) -> np.ndarray:
        msg = np.asarray(message, dtype=np.uint8)
        if msg.shape[-1] != self.k_code:
            raise ValueError(f"message length must be {self.k_code}")
        parity = (msg.astype(np.int64) @ self._parity) & 1
        return np.concatenate([parity.astype(np.uint8), msg], axis=-1)

    def syndromes(self, words) -> np.ndarray:
        words = np.asarray(words, dtype=bool)
        terms = np.where(words[..., None, :], self._syn_table, 0)
        return np.bitwise_xor.reduce(terms, axis=-1)

    def decode(self, word):
        """Bounded-distance decode; returns the message or ``None`` on failure."""
        word = np.asarray(word, dtype=np.uint8)
        if word.shape != (self.n_code,):
            raise ValueError(f"word length must be {self.n_code}")
        syn = self.syndromes(word)
        if not syn.any():
            return word[self.n_code - self.k_code:].copy()
        fixed = self._correct(word, [int(s) for s in syn])
        return None if fixed is None else fixed[self.n_code - self.k_code:]

    def decode_batch(self, words) -> tuple[np.ndarray, np.ndarray]:
        """Decode many words; returns ``(messages, ok)``."""
        words = np.asarray(words, dtype=np.uint8)
        syn = self.syndromes(words)
        out = words[:, self.n_code - self.k_code:].copy()
        ok = np.ones(len(words), dtype=bool)
        for idx in np.nonzero(syn.any(axis=1))[0]:
            fixed = self._correct(words[idx], [int(s) for s in syn[idx]])
            if fixed is None:
                ok[idx] = False
            else:
                out[idx] = fixed[self.n_code - self.k_code:]
        return out, ok

    def _correct(self, word: np.ndarray, syn: list[int]):
        f = self.gf
        lam = _berlekamp_massey(f, syn)
        deg = len(lam) - 1
        if deg > self.t_corr:
            return None
        # Chien search: error at position p iff Lambda(alpha^-p) = 0
        positions = []
        for p in range(self.n_code):
            acc = 0
            for i, c in enumerate(lam):
                if c:
                    acc ^= f.exp[(f.log[c] - i * p) % f.order]
            if acc == 0:
                positions.append(p)
        if len(positions) != deg:
            return None
        fixed = word.copy()
        fixed[positions] ^= 1
        return fixed


def _berlekamp_massey(f: GF2m, syn: list[int]) -> list[int]:
    """Error-locator polynomial (low degree first) from syndromes S_1..S_2t."""
    c = [1]
    b = [1]
    L, m, bb = 0, 1, 1
    for n, s in enumerate(syn):
        d = s
        for i in range(1, L + 1):
            if i < len(c):
                d ^= f.mul(c[i], syn[n - i])
        if d == 0:
            m += 1
            continue
        coef = f.mul(d, f.inv(bb))
        t = list(c)
        shifted = [0] * m + [f.mul(coef, x) for x in b]
        if len(shifted) > len(c):
            c = c + [0] * (len(shifted) - len(c))
        for i, x in enumerate(shifted):
            c[i] ^= x
        if 2 * L <= n:
            L = n + 1 - L
            b, bb, m = t, d, 1
        else:
            m += 1
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c


@lru_cache(maxsize=None)
def _cached_code(k: int, n: int) -> BchCode:
    return BchCode(k_code=k, n_code=n)


def llr_table(quantizer: Quantizer, params: ChannelParams, n_reads: int = 1) -> np.ndarray:
    """ln Pr(j|0) - ln Pr(j|1) for every output symbol j (nats)."""
    p0 = np.maximum(quantized_transition(quantizer, 0, params, n_reads), LLR_FLOOR)
    p1 = np.maximum(quantized_transition(quantizer, 1, params, n_reads), LLR_FLOOR)
    return np.log(p0) - np.log(p1)


def llr_from_symbol(j: int, quantizer: Quantizer, params: ChannelParams, n_reads: int = 1) -> float:
    if not 0 <= j < quantizer.levels:
        raise ValueError(f"symbol index {j} out of range")
    return float(llr_table(quantizer, params, n_reads)[j])


__all__ = ["BchCode", "GF2m", "llr_from_symbol", "llr_table"]
