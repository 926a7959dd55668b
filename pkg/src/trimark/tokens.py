"""Token stream plumbing: a validated id sequence plus byte-level text codecs.

The reference vocabulary is the 256 byte values, so any text round-trips
losslessly through UTF-8 bytes.  Everything downstream (engine, detector,
evaluation) works on integer ids and never inspects text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

BYTE_VOCAB_SIZE = 256


@dataclass(frozen=True)
class TokenStream:
    """Immutable sequence of token ids validated against a vocabulary size."""

    ids: np.ndarray = field(repr=False)
    vocab_size: int = BYTE_VOCAB_SIZE

    def __post_init__(self) -> None:
        ids = np.ascontiguousarray(self.ids, dtype=np.int64)
        if ids.ndim != 1:
            raise ValueError(f"token ids must be one-dimensional, got shape {ids.shape}")
        if not (isinstance(self.vocab_size, int) and self.vocab_size >= 2):
            raise ValueError(f"vocab_size must be an integer >= 2, got {self.vocab_size!r}")
        if ids.size and (ids.min() < 0 or ids.max() >= self.vocab_size):
            raise ValueError(
                f"token ids must lie in [0, {self.vocab_size}), "
                f"got range [{ids.min()}, {ids.max()}]"
            )
        ids.setflags(write=False)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return int(self.ids.size)

    def __iter__(self) -> Iterator[int]:
        return iter(int(t) for t in self.ids)

    def __getitem__(self, index) -> "TokenStream | int":
        if isinstance(index, slice):
            return TokenStream(self.ids[index], self.vocab_size)
        return int(self.ids[index])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TokenStream):
            return NotImplemented
        return self.vocab_size == other.vocab_size and np.array_equal(self.ids, other.ids)

    @classmethod
    def from_text(cls, text: str) -> "TokenStream":
        """Encode text as UTF-8 bytes, one token per byte."""
        return cls(np.frombuffer(text.encode("utf-8"), dtype=np.uint8), BYTE_VOCAB_SIZE)

    @classmethod
    def from_ids(cls, ids: Sequence[int], vocab_size: int) -> "TokenStream":
        return cls(np.asarray(list(ids), dtype=np.int64), vocab_size)

    def to_text(self) -> str:
        """Decode byte tokens back to text (replacing invalid UTF-8 runs)."""
        if self.vocab_size != BYTE_VOCAB_SIZE:
            raise ValueError(
                f"only byte-level streams decode to text, vocab_size={self.vocab_size}"
            )
        return bytes(self.ids.astype(np.uint8)).decode("utf-8", errors="replace")

    def concat(self, other: "TokenStream") -> "TokenStream":
        if other.vocab_size != self.vocab_size:
            raise ValueError("cannot concatenate streams with different vocab sizes")
        return TokenStream(np.concatenate([self.ids, other.ids]), self.vocab_size)


def as_stream(text_or_ids, vocab_size: int) -> TokenStream:
    """Coerce text, an id sequence, or an existing stream to a ``TokenStream``."""
    if isinstance(text_or_ids, TokenStream):
        if text_or_ids.vocab_size != vocab_size:
            raise ValueError(
                f"stream has vocab_size={text_or_ids.vocab_size}, expected {vocab_size}"
            )
        return text_or_ids
    if isinstance(text_or_ids, str):
        if vocab_size != BYTE_VOCAB_SIZE:
            raise ValueError(f"text input requires vocab_size={BYTE_VOCAB_SIZE}")
        return TokenStream.from_text(text_or_ids)
    return TokenStream.from_ids(text_or_ids, vocab_size)


def load_corpus_tokens(paths: Iterable[str | Path], vocab_size: int = BYTE_VOCAB_SIZE) -> np.ndarray:
    """Concatenate the byte tokens of one or more UTF-8 text files."""
    chunks: list[np.ndarray] = []
    for path in paths:
        data = Path(path).read_bytes()
        chunks.append(np.frombuffer(data, dtype=np.uint8).astype(np.int64))
    if not chunks:
        return np.zeros(0, dtype=np.int64)
    tokens = np.concatenate(chunks)
    if tokens.size and tokens.max() >= vocab_size:
        raise ValueError(
            f"corpus contains byte value {tokens.max()} outside vocab of size {vocab_size}"
        )
    return tokens


def read_jsonl(path: str | Path) -> Iterator[dict | list]:
    """Yield one parsed JSON value per non-empty line."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON ({exc.msg})") from exc


def write_jsonl(path: str | Path, records: Iterable[dict]) -> int:
    """Write records as one JSON object per line; returns the record count."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            count += 1
    return count
