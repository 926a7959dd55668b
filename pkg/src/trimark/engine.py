"""Embedding side: logit biasing during decoding, plus a small self-contained
language model so generation and perplexity work without external weights.

The watermark never touches model internals — it only adds ``+delta`` to
green logits, ``-delta`` to yellow logits, and masks red indices out of the
candidate set before the next token is chosen.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .partition import Label, PartitionParams, TriPartition, seed_from_context, tri_partition
from .tokens import BYTE_VOCAB_SIZE, TokenStream, as_stream


@runtime_checkable
class LogitsSource(Protocol):
    """Anything that can score the next token given the full context so far."""

    vocab_size: int

    def next_logits(self, context: Sequence[int]) -> np.ndarray: ...


class UniformLogitsSource:
    """Maximum-entropy source: every token equally likely at every step."""

    def __init__(self, vocab_size: int = BYTE_VOCAB_SIZE):
        self.vocab_size = vocab_size
        self._logits = np.full(vocab_size, -math.log(vocab_size))

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        return self._logits.copy()


class ToyMarkovModel:
    """Order-``n`` Markov model with add-one smoothing over a small vocabulary.

    Logits are exact log-probabilities: ``log((count + 1) / (total + V))``
    for each continuation of the current length-``n`` context, so unseen
    contexts fall back to the uniform distribution.  Good enough to give the
    sampler realistic-looking preferences; not a language model.
    """

    def __init__(self, vocab_size: int = BYTE_VOCAB_SIZE, order: int = 2):
        if not (isinstance(order, int) and order >= 1):
            raise ValueError(f"order must be an integer >= 1, got {order!r}")
        if not (isinstance(vocab_size, int) and vocab_size >= 2):
            raise ValueError(f"vocab_size must be an integer >= 2, got {vocab_size!r}")
        self.vocab_size = vocab_size
        self.order = order
        self._counts: dict[tuple[int, ...], np.ndarray] = {}
        self._trained_tokens = 0

    def train(self, tokens: Sequence[int] | np.ndarray) -> None:
        """Accumulate transition counts from one token sequence."""
        toks = np.asarray(tokens, dtype=np.int64)
        if toks.size and (toks.min() < 0 or toks.max() >= self.vocab_size):
            raise ValueError(
                f"training token ids must lie in [0, {self.vocab_size})"
            )
        for i in range(self.order, toks.size):
            ctx = tuple(int(t) for t in toks[i - self.order : i])
            row = self._counts.get(ctx)
            if row is None:
                row = np.zeros(self.vocab_size, dtype=np.int64)
                self._counts[ctx] = row
            row[toks[i]] += 1
        self._trained_tokens += int(toks.size)

    @property
    def context_count(self) -> int:
        return len(self._counts)

    @property
    def trained_tokens(self) -> int:
        return self._trained_tokens

    def next_logits(self, context: Sequence[int]) -> np.ndarray:
        if len(context) >= self.order:
            ctx = tuple(int(t) for t in context[-self.order :])
            counts = self._counts.get(ctx)
        else:
            counts = None
        if counts is None:
            return np.full(self.vocab_size, -math.log(self.vocab_size))
        total = int(counts.sum())
        return np.log((counts + 1.0) / (total + self.vocab_size))

    @classmethod
    def from_text_file(cls, path: str | Path, order: int = 2) -> "ToyMarkovModel":
        data = Path(path).read_bytes()
        model = cls(vocab_size=BYTE_VOCAB_SIZE, order=order)
        model.train(np.frombuffer(data, dtype=np.uint8).astype(np.int64))
        return model

    def save(self, path: str | Path) -> None:
        """Serialize counts as JSON (context key "a,b" -> {token: count})."""
        payload = {
            "vocab_size": self.vocab_size,
            "order": self.order,
            "trained_tokens": self._trained_tokens,
            "counts": {
                ",".join(map(str, ctx)): {
                    str(int(tok)): int(row[tok]) for tok in np.nonzero(row)[0]
                }
                for ctx, row in sorted(self._counts.items())
            },
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ToyMarkovModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        model = cls(vocab_size=int(payload["vocab_size"]), order=int(payload["order"]))
        for ctx_key, row in payload["counts"].items():
            ctx = tuple(int(t) for t in ctx_key.split(","))
            if len(ctx) != model.order:
                raise ValueError(f"context key {ctx_key!r} does not match order {model.order}")
            counts = np.zeros(model.vocab_size, dtype=np.int64)
            for tok, cnt in row.items():
                counts[int(tok)] = int(cnt)
            model._counts[ctx] = counts
        model._trained_tokens = int(payload.get("trained_tokens", 0))
        return model


@dataclass(frozen=True)
class BiasedLogits:
    """Watermark-adjusted logits plus the mask of excluded (red) indices.

    Red entries are set to ``-inf`` in ``values`` for transparency, but the
    selection helpers consult ``red_mask`` and drop those entries *before*
    any arithmetic, so no infinities ever reach exp/softmax.
    """

    values: np.ndarray = field(repr=False)
    red_mask: np.ndarray = field(repr=False)


def bias_logits(logits: np.ndarray, partition: TriPartition, delta: float) -> BiasedLogits:
    """Apply the tri-set adjustment: green ``+delta``, yellow ``-delta``, red out."""
    values = np.asarray(logits, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] != partition.vocab_size:
        raise ValueError(
            f"logits shape {values.shape} does not match vocab size {partition.vocab_size}"
        )
    if not np.isfinite(values).all():
        raise ValueError("input logits must all be finite")
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    out = values.copy()
    out[partition.green_mask] += delta
    out[partition.yellow_mask] -= delta
    red = partition.red_mask.copy()
    out[red] = -np.inf
    return BiasedLogits(values=out, red_mask=red)


def bias_for_context(context, logits, params: PartitionParams) -> BiasedLogits:
    """One decoding step's bias, for mounting inside an external decode loop.

    Seeds the partition from the trailing ``window_h`` tokens of ``context``
    (an empty context seeds from the key alone), splits the vocabulary, and
    applies the green/yellow/red adjustment to ``logits`` — exactly the
    per-step transform ``generate`` runs internally.
    """
    stream = as_stream(context, params.vocab_size)
    window = [int(t) for t in stream.ids[-params.window_h :]]
    seed = seed_from_context(window, params.key)
    return bias_logits(logits, tri_partition(seed, params), params.delta)


def masked_argmax(biased: BiasedLogits) -> int:
    """Highest-scoring non-red index; ties break toward the lowest index."""
    open_mask = ~biased.red_mask
    if not open_mask.any():
        raise ValueError("every vocabulary index is red-masked")
    candidates = np.flatnonzero(open_mask)
    return int(candidates[np.argmax(biased.values[candidates])])


def masked_softmax(biased: BiasedLogits, temperature: float = 1.0) -> np.ndarray:
    """Probabilities over non-red indices; red entries are exactly zero."""
    if not temperature > 0.0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    open_mask = ~biased.red_mask
    if not open_mask.any():
        raise ValueError("every vocabulary index is red-masked")
    v = biased.values[open_mask] / temperature
    v = v - v.max()
    weights = np.exp(v)
    probs = np.zeros(biased.values.shape[0])
    probs[open_mask] = weights / weights.sum()
    return probs


@dataclass
class GenerationRecord:
    """One watermarked generation: prompt, completion, config, step labels."""

    prompt: TokenStream
    completion: TokenStream
    params: PartitionParams
    step_labels: tuple[Label, ...]

    def to_json_dict(self) -> dict:
        return {
            "prompt_tokens": [int(t) for t in self.prompt.ids],
            "completion_tokens": [int(t) for t in self.completion.ids],
            "params": self.params.to_dict(),
            "step_labels": [label.name for label in self.step_labels],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GenerationRecord":
        params = PartitionParams.from_dict(data["params"])
        return cls(
            prompt=TokenStream.from_ids(data["prompt_tokens"], params.vocab_size),
            completion=TokenStream.from_ids(data["completion_tokens"], params.vocab_size),
            params=params,
            step_labels=tuple(Label[name] for name in data["step_labels"]),
        )


def generate(
    prompt,
    n_tokens: int,
    source: LogitsSource,
    params: PartitionParams,
    mode: str = "greedy",
    temperature: float = 1.0,
    rng: np.random.Generator | None = None,
) -> GenerationRecord:
    """Decode ``n_tokens`` watermarked tokens after ``prompt``.

    Each step reseeds the partition from the trailing ``window_h`` tokens of
    the running context (prompt plus tokens emitted so far), biases the
    source's logits and picks the next token greedily (default) or by
    temperature sampling when ``mode="sample"`` (requires ``rng``).  The
    chosen token's label is recorded per step; red tokens cannot be chosen.
    """
    prompt_stream = as_stream(prompt, params.vocab_size)
    if len(prompt_stream) == 0:
        raise ValueError("prompt must contain at least one token")
    if not (isinstance(n_tokens, int) and n_tokens >= 0):
        raise ValueError(f"n_tokens must be a non-negative integer, got {n_tokens!r}")
    if source.vocab_size != params.vocab_size:
        raise ValueError(
            f"source vocab size {source.vocab_size} does not match params "
            f"vocab size {params.vocab_size}"
        )
    if mode not in ("greedy", "sample"):
        raise ValueError(f"mode must be 'greedy' or 'sample', got {mode!r}")
    if mode == "sample" and rng is None:
        raise ValueError("sample mode requires an explicit rng")

    context: list[int] = [int(t) for t in prompt_stream.ids]
    completion: list[int] = []
    labels: list[Label] = []
    partition_cache: dict[int, TriPartition] = {}
    for _ in range(n_tokens):
        logits = np.asarray(source.next_logits(context), dtype=np.float64)
        seed = seed_from_context(context[-params.window_h :], params.key)
        partition = partition_cache.get(seed)
        if partition is None:
            partition = tri_partition(seed, params)
            partition_cache[seed] = partition
        biased = bias_logits(logits, partition, params.delta)
        if mode == "greedy":
            token = masked_argmax(biased)
        else:
            probs = masked_softmax(biased, temperature)
            token = int(rng.choice(params.vocab_size, p=probs))
        labels.append(Label(int(partition.labels[token])))
        completion.append(token)
        context.append(token)

    return GenerationRecord(
        prompt=prompt_stream,
        completion=TokenStream.from_ids(completion, params.vocab_size),
        params=params,
        step_labels=tuple(labels),
    )


@dataclass(frozen=True)
class PerplexityResult:
    """Perplexity of a stream under a source, with the underflow-clamp count."""

    value: float
    clamped_positions: int


def perplexity(text_or_ids, source: LogitsSource) -> PerplexityResult:
    """Perplexity ``exp(-mean log p)`` of a stream under the *unbiased* source.

    Each position is scored by the source given all preceding tokens.
    Probabilities that underflow to zero are clamped to ``1e-300`` and
    counted in ``clamped_positions``.
    """
    stream = as_stream(text_or_ids, source.vocab_size)
    if len(stream) == 0:
        raise ValueError("cannot compute perplexity of an empty stream")
    context: list[int] = []
    total_log = 0.0
    clamped = 0
    for token in stream.ids:
        logits = np.asarray(source.next_logits(context), dtype=np.float64)
        shifted = logits - logits.max()
        log_prob = float(shifted[token] - math.log(np.sum(np.exp(shifted))))
        prob = math.exp(log_prob)
        if prob <= 0.0:
            prob = 1e-300
            clamped += 1
        total_log += math.log(prob)
        context.append(int(token))
    return PerplexityResult(
        value=math.exp(-total_log / len(stream)), clamped_positions=clamped
    )
