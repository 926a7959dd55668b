"""Deterministic vocabulary partitioning for tri-set watermarking.

Every decoding step derives a 64-bit seed from the recent context window and a
secret key, then splits the vocabulary into three disjoint sets — GREEN
(bias-favoured), YELLOW (bias-penalised) and RED (excluded) — using two
domain-separated pseudo-uniform streams.  The same construction is replayed at
detection time, so everything here must be bit-exact and dependency-light.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

#: Stream tags for the two independent uniform draws per vocabulary index.
GREEN_STREAM = 1
YELLOW_RED_STREAM = 2


class Label(enum.IntEnum):
    """Partition membership of a single vocabulary index."""

    GREEN = 0
    YELLOW = 1
    RED = 2


def hash64(x: int) -> int:
    """Finalize ``x`` (taken modulo 2**64) into a well-mixed 64-bit value.

    This is the SplitMix64 finalizer: an add of the golden-ratio constant
    followed by two xor-shift/multiply rounds and a final xor-shift.  It is
    bijective on the 64-bit domain and serves as the single hashing primitive
    for seeding, stream derivation and evaluation sub-seeding.
    """
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _hash64_vec(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic wraps modulo 2**64, matching hash64 bit-for-bit
    # (equivalence is pinned by tests against the scalar path).
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def seed_from_context(context: Sequence[int], key: int) -> int:
    """Combine a context window and key into the partition seed.

    Per-token hashes are aggregated by summation modulo 2**64, so the seed is
    invariant under reordering of the window but, unlike an XOR fold, does not
    cancel when a token appears twice.  An empty window yields ``key`` itself.
    """
    total = key & _MASK64
    for tok in context:
        t = int(tok)
        if t < 0:
            raise ValueError(f"token id must be non-negative, got {t}")
        total = (total + hash64(t)) & _MASK64
    return total


def window_seeds(tokens: np.ndarray, window_h: int, key: int) -> np.ndarray:
    """Seeds for every position of a token stream in one vectorized pass.

    Position ``i`` is seeded from the up-to-``window_h`` tokens preceding it,
    exactly as :func:`seed_from_context` would compute them one at a time.
    """
    if window_h < 1:
        raise ValueError(f"window_h must be >= 1, got {window_h}")
    toks = np.asarray(tokens, dtype=np.uint64)
    hashed = _hash64_vec(toks)
    # prefix[i] = sum of hashes of tokens[:i] modulo 2**64; uint64 cumsum and
    # the subtraction below both wrap, which is exactly the modular window sum.
    prefix = np.zeros(len(toks) + 1, dtype=np.uint64)
    np.cumsum(hashed, dtype=np.uint64, out=prefix[1:])
    idx = np.arange(len(toks))
    lo = np.maximum(0, idx - window_h)
    return np.uint64(key & _MASK64) + (prefix[idx] - prefix[lo])


def uniform_stream(seed: int, stream_tag: int, k: int) -> float:
    """Deterministic uniform draw in the unit interval for index ``k``.

    Two hash rounds: the seed is first offset by ``stream_tag`` times the
    golden constant (domain separation between the green and yellow/red
    streams), then the index is folded in.  The 64-bit result is scaled by
    2**-64 as a correctly rounded double; draws within 2**10 of 2**64 round
    to exactly 1.0, which no strict ``<`` threshold comparison can select.
    """
    if stream_tag not in (GREEN_STREAM, YELLOW_RED_STREAM):
        raise ValueError(f"unknown stream tag {stream_tag}")
    if k < 0:
        raise ValueError(f"stream index must be non-negative, got {k}")
    base = hash64((seed + stream_tag * _GOLDEN) & _MASK64)
    return hash64((base + k) & _MASK64) / 2**64


def _uniform_vec(seeds: np.ndarray, stream_tag: int, ks: np.ndarray) -> np.ndarray:
    # Array-seed variant: numpy scalar overflow warns, array overflow wraps
    # silently, so both callers keep the arithmetic in array context.
    tag = np.uint64((stream_tag * _GOLDEN) & _MASK64)
    base = _hash64_vec(seeds + tag)
    return _hash64_vec(base + ks).astype(np.float64) * 2.0**-64


def _stream_uniforms(seed: int, stream_tag: int, ks: np.ndarray) -> np.ndarray:
    # Scalar-seed variant: the per-stream base is hashed in exact Python ints,
    # only the per-index fold runs vectorized.
    base = hash64((seed + stream_tag * _GOLDEN) & _MASK64)
    return _hash64_vec(np.uint64(base) + ks).astype(np.float64) * 2.0**-64


@dataclass(frozen=True)
class PartitionParams:
    """Shared configuration for embedding and detection.

    The three ``gamma`` weights are the expected vocabulary shares of the
    green, yellow and red sets and must sum to one.  ``delta`` is the logit
    bonus/penalty magnitude, ``window_h`` the seeding context length, ``key``
    the secret 64-bit key, ``lambda_f`` the green-vs-red weight in the
    combined detection score, and ``alpha`` the target false-positive rate.
    """

    gamma_g: float = 0.25
    gamma_y: float = 0.65
    gamma_r: float = 0.10
    delta: float = 4.0
    window_h: int = 4
    key: int = 0
    lambda_f: float = 0.5
    alpha: float = 0.01
    vocab_size: int = 256

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma_g < 1.0:
            raise ValueError(f"gamma_g must lie in (0, 1), got {self.gamma_g}")
        if not 0.0 < self.gamma_y < 1.0:
            raise ValueError(f"gamma_y must lie in (0, 1), got {self.gamma_y}")
        # gamma_r = 0 is allowed: it degenerates to a two-set scheme with no
        # excluded tokens (detection statistics then refuse the red side).
        if not 0.0 <= self.gamma_r < 1.0:
            raise ValueError(f"gamma_r must lie in [0, 1), got {self.gamma_r}")
        total = self.gamma_g + self.gamma_y + self.gamma_r
        if abs(total - 1.0) > 1e-12:
            raise ValueError(
                f"gamma_g + gamma_y + gamma_r must sum to 1 (within 1e-12), got {total!r}"
            )
        if not self.gamma_r < 1.0 - self.gamma_g:
            raise ValueError(
                f"gamma_r must be smaller than 1 - gamma_g, got gamma_r={self.gamma_r} "
                f"with gamma_g={self.gamma_g}"
            )
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not (isinstance(self.window_h, int) and self.window_h >= 1):
            raise ValueError(f"window_h must be an integer >= 1, got {self.window_h!r}")
        if not (isinstance(self.key, int) and 0 <= self.key < 2**64):
            raise ValueError(f"key must be an unsigned 64-bit integer, got {self.key!r}")
        if not 0.0 < self.lambda_f <= 1.0:
            raise ValueError(f"lambda_f must lie in (0, 1], got {self.lambda_f}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (isinstance(self.vocab_size, int) and self.vocab_size >= 2):
            raise ValueError(f"vocab_size must be an integer >= 2, got {self.vocab_size!r}")

    @property
    def red_threshold(self) -> float:
        """Red share of the non-green probability mass, gamma_r / (1 - gamma_g)."""
        return self.gamma_r / (1.0 - self.gamma_g)

    def to_dict(self) -> dict:
        return {
            "gamma_g": self.gamma_g,
            "gamma_y": self.gamma_y,
            "gamma_r": self.gamma_r,
            "delta": self.delta,
            "window_h": self.window_h,
            "key": self.key,
            "lambda_f": self.lambda_f,
            "alpha": self.alpha,
            "vocab_size": self.vocab_size,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PartitionParams":
        known = {f for f in cls.__dataclass_fields__}  # noqa: C416 - explicit set
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown parameter field(s): {', '.join(sorted(extra))}")
        kwargs = dict(data)
        # JSON producers that cannot represent full 64-bit integers (e.g.
        # JavaScript) send the key as a decimal string.
        if isinstance(kwargs.get("key"), str):
            kwargs["key"] = int(kwargs["key"], 10)
        for name in ("window_h", "key", "vocab_size"):
            if name in kwargs and isinstance(kwargs[name], float) and kwargs[name].is_integer():
                kwargs[name] = int(kwargs[name])
        return cls(**kwargs)


@dataclass(frozen=True)
class TriPartition:
    """Labels for every vocabulary index under one seed."""

    labels: np.ndarray = field(repr=False)  # uint8, one Label per index

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", np.ascontiguousarray(self.labels, dtype=np.uint8))

    @property
    def vocab_size(self) -> int:
        return int(self.labels.shape[0])

    @property
    def green_mask(self) -> np.ndarray:
        return self.labels == Label.GREEN

    @property
    def yellow_mask(self) -> np.ndarray:
        return self.labels == Label.YELLOW

    @property
    def red_mask(self) -> np.ndarray:
        return self.labels == Label.RED

    def counts(self) -> tuple[int, int, int]:
        """(green, yellow, red) index counts; always sums to the vocab size."""
        n = np.bincount(self.labels, minlength=3)
        return int(n[Label.GREEN]), int(n[Label.YELLOW]), int(n[Label.RED])


def tri_partition(seed: int, params: PartitionParams) -> TriPartition:
    """Split the whole vocabulary into green/yellow/red under ``seed``.

    Index ``k`` is GREEN when its green-stream draw falls below ``gamma_g``;
    otherwise it is RED when its yellow/red-stream draw falls below
    ``gamma_r / (1 - gamma_g)``, and YELLOW in the remaining case.  The three
    sets are therefore disjoint and cover every index by construction.
    """
    ks = np.arange(params.vocab_size, dtype=np.uint64)
    u_green = _stream_uniforms(seed, GREEN_STREAM, ks)
    u_yr = _stream_uniforms(seed, YELLOW_RED_STREAM, ks)
    labels = np.full(params.vocab_size, Label.YELLOW, dtype=np.uint8)
    green = u_green < params.gamma_g
    red = ~green & (u_yr < params.red_threshold)
    labels[green] = Label.GREEN
    labels[red] = Label.RED
    return TriPartition(labels=labels)


def token_label(seed: int, token: int, params: PartitionParams) -> Label:
    """Label of a single token without materializing the full partition."""
    if not 0 <= token < params.vocab_size:
        raise ValueError(
            f"token id {token} outside vocabulary of size {params.vocab_size}"
        )
    if uniform_stream(seed, GREEN_STREAM, token) < params.gamma_g:
        return Label.GREEN
    if uniform_stream(seed, YELLOW_RED_STREAM, token) < params.red_threshold:
        return Label.RED
    return Label.YELLOW


def stream_labels(seeds: np.ndarray, tokens: np.ndarray, params: PartitionParams) -> np.ndarray:
    """Vectorized :func:`token_label` over aligned seed/token arrays.

    ``seeds[i]`` is the partition seed in force at position ``i`` and
    ``tokens[i]`` the token observed there; returns one ``Label`` value per
    position as a uint8 array.
    """
    toks = np.asarray(tokens)
    if toks.size and (toks.min() < 0 or toks.max() >= params.vocab_size):
        raise ValueError(
            f"token ids must lie in [0, {params.vocab_size}), "
            f"got range [{toks.min()}, {toks.max()}]"
        )
    seeds_u = np.asarray(seeds, dtype=np.uint64)
    toks_u = toks.astype(np.uint64)
    u_green = _uniform_vec(seeds_u, GREEN_STREAM, toks_u)
    u_yr = _uniform_vec(seeds_u, YELLOW_RED_STREAM, toks_u)
    labels = np.full(toks_u.shape, Label.YELLOW, dtype=np.uint8)
    green = u_green < params.gamma_g
    red = ~green & (u_yr < params.red_threshold)
    labels[green] = Label.GREEN
    labels[red] = Label.RED
    return labels


def partition_means(seeds: Iterable[int], params: PartitionParams) -> tuple[float, float, float]:
    """Mean (green, yellow, red) vocabulary fractions across many seeds."""
    totals = np.zeros(3, dtype=np.int64)
    n = 0
    for seed in seeds:
        totals += np.asarray(tri_partition(seed, params).counts(), dtype=np.int64)
        n += 1
    if n == 0:
        raise ValueError("at least one seed is required")
    fracs = totals / (n * params.vocab_size)
    return float(fracs[0]), float(fracs[1]), float(fracs[2])
