"""Deterministic pseudo-random number generation.

Every stochastic routine in this package draws from :class:`Rng`, a pure
Python xoshiro256** generator (Blackman & Vigna, 64-bit shift/rotate/add,
period 2**256 - 1) seeded through splitmix64.  The implementation is
self-contained on purpose: streams are bit-identical across platforms and
numpy versions, so every experiment is exactly reproducible from its seed.

Normal variates use the polar (Marsaglia) variant of the Box-Muller
transform.  A generator is single-owner: parallel code must derive child
generators via :func:`split_seed` rather than sharing one stream.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)


def _splitmix64(x: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new state, output word)."""
    x = (x + _SPLITMIX_GAMMA) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x, z ^ (z >> 31)


def split_seed(parent_seed: int, stream_index: int) -> int:
    """Derive an independent child seed from a parent seed and a stream index.

    Mixes both words through splitmix64 so nearby (seed, index) pairs give
    unrelated streams.
    """
    x, a = _splitmix64(parent_seed & _MASK64)
    _, b = _splitmix64((x ^ (stream_index & _MASK64)) & _MASK64)
    return (a ^ b) & _MASK64


class Rng:
    """xoshiro256** stream with vector draw methods.

    Parameters
    ----------
    seed : int
        64-bit unsigned seed.  Equal seeds give bit-identical streams.
    """

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        self.seed = seed & _MASK64
        # Expand the 64-bit seed into four nonzero state words.
        x = self.seed
        state = []
        for _ in range(4):
            x, word = _splitmix64(x)
            state.append(word)
        self._s = state

    def spawn(self, stream_index: int) -> "Rng":
        """Child generator with an independent stream (single-owner rule)."""
        return Rng(split_seed(self.seed, stream_index))

    def _raw(self, n: int) -> list:
        """Next n raw 64-bit words (the hot loop: locals only)."""
        s0, s1, s2, s3 = self._s
        out = []
        append = out.append
        for _ in range(n):
            x = (s1 * 5) & _MASK64
            r = (((x << 7) & _MASK64) | (x >> 57)) * 9 & _MASK64
            t = (s1 << 17) & _MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) & _MASK64) | (s3 >> 19)
            append(r)
        self._s = [s0, s1, s2, s3]
        return out

    def uniform01(self, n: int) -> np.ndarray:
        """n i.i.d. U[0,1) draws (53-bit mantissas)."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        words = np.array(self._raw(n), dtype=np.uint64)
        return (words >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def std_normal(self, n: int) -> np.ndarray:
        """n i.i.d. N(0,1) draws via polar Box-Muller.

        Uniform pairs are mapped to the square [-1,1)^2 and rejected outside
        the open unit disk; each accepted pair yields two normals.  The
        number of stream words consumed is itself seed-deterministic.
        """
        if n < 0:
            raise ValueError("n must be nonnegative")
        out = np.empty(n, dtype=np.float64)
        filled = 0
        while filled < n:
            need = n - filled
            # 1/(pi/4) uniform pairs per accepted pair, plus slack.
            m = max(16, int(need * 0.7) + 8)
            u = self.uniform01(2 * m).reshape(m, 2) * 2.0 - 1.0
            s = u[:, 0] ** 2 + u[:, 1] ** 2
            keep = (s > 0.0) & (s < 1.0)
            s = s[keep]
            u = u[keep]
            factor = np.sqrt(-2.0 * np.log(s) / s)
            pair = np.empty(2 * len(s))
            pair[0::2] = u[:, 0] * factor
            pair[1::2] = u[:, 1] * factor
            take = min(len(pair), need)
            out[filled:filled + take] = pair[:take]
            filled += take
        return out

    def bernoulli(self, p: float, n: int) -> np.ndarray:
        """n i.i.d. Bernoulli(p) draws as 0.0/1.0 floats."""
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"bernoulli p must lie in [0, 1], got {p}")
        return (self.uniform01(n) < p).astype(np.float64)

    def below(self, bound: int) -> int:
        """One integer uniform on {0, ..., bound-1} (rejection, unbiased)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        span = bound.bit_length()
        while True:
            r = self._raw(1)[0] >> (64 - span)
            if r < bound:
                return r

    def integers(self, bound: int, n: int) -> np.ndarray:
        """n integers uniform on {0, ..., bound-1}."""
        return np.array([self.below(bound) for _ in range(n)], dtype=np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        idx = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx

    def categorical(self, proportions, n: int) -> np.ndarray:
        """n draws from {0..K-1} with the given probabilities (must sum to 1)."""
        props = np.asarray(proportions, dtype=np.float64)
        if props.min() < 0 or abs(props.sum() - 1.0) > 1e-9:
            raise ValueError("proportions must be nonnegative and sum to 1")
        edges = np.cumsum(props)
        edges[-1] = 1.0  # guard against round-off at the top
        return np.searchsorted(edges, self.uniform01(n), side="right")

    def poisson(self, lam: float, n: int) -> np.ndarray:
        """n Poisson(lam) draws (Knuth product method; small lam only)."""
        if lam < 0:
            raise ValueError("lam must be nonnegative")
        limit = math.exp(-lam)
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            k = 0
            prod = (self._raw(1)[0] >> 11) * _INV_2_53
            while prod > limit:
                k += 1
                prod *= (self._raw(1)[0] >> 11) * _INV_2_53
            out[i] = k
        return out


def prng_stream(rng: Rng, kind: str, n: int, p: float = 0.5) -> np.ndarray:
    """Draw n values of the requested kind from rng.

    kind is one of "uniform01", "std_normal", "bernoulli" (the latter uses
    keep-probability p).
    """
    if kind == "uniform01":
        return rng.uniform01(n)
    if kind == "std_normal":
        return rng.std_normal(n)
    if kind == "bernoulli":
        return rng.bernoulli(p, n)
    raise ValueError(f"unknown stream kind: {kind!r}")
