"""Desk-scale evaluation harness: watermark-then-detect TPR runs, clean-text
FPR runs, perplexity summaries, and a parameter-grid sweep.

All randomness flows from ``EvalConfig.seed`` through per-sample sub-seeds
(hash-chained, with floats keyed by their IEEE-754 bits), so serial reruns —
or a parallel fan-out, if anyone adds one — produce byte-identical reports.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .detector import Decision, detect
from .engine import LogitsSource, generate, perplexity
from .partition import PartitionParams, hash64
from .tokens import TokenStream, load_corpus_tokens

_MASK64 = (1 << 64) - 1

# Role tags keep the sub-seed streams for unrelated draws disjoint.
_TAG_TPR_SAMPLE = 101
_TAG_FPR_SAMPLE = 102
_TAG_SWEEP_GEN = 103
_TAG_SWEEP_CLEAN = 104

#: Column order of sweep CSV output (fixed; empty cells mean "not applicable").
SWEEP_COLUMNS = (
    "delta",
    "gamma_g",
    "gamma_y",
    "gamma_r",
    "lambda_f",
    "alpha",
    "length",
    "n_samples",
    "tpr",
    "fpr",
    "status",
)


def _subseed(*parts: int | float) -> int:
    """Chain-hash heterogeneous parts into one 64-bit sub-seed.

    Floats contribute their exact IEEE-754 bit pattern so equal values give
    equal seeds everywhere; the chain is order-sensitive.
    """
    acc = 0
    for part in parts:
        if isinstance(part, float):
            bits = struct.unpack("<Q", struct.pack("<d", part))[0]
        else:
            bits = int(part) & _MASK64
        acc = hash64((acc + bits) & _MASK64)
    return acc


def generation_subseed(seed: int, delta: float, gamma_g: float, gamma_r: float,
                       length: int, index: int) -> int:
    """Sub-seed for one generated sample in a sweep cell.

    Deliberately excludes ``lambda_f`` and ``alpha``: cells that differ only
    in detection-side settings replay byte-identical generations, which is
    what makes cross-column comparisons (e.g. the two-set degeneration at
    ``lambda_f = 1``) meaningful.
    """
    return _subseed(seed, _TAG_SWEEP_GEN, float(delta), float(gamma_g),
                    float(gamma_r), length, index)


@dataclass
class EvalConfig:
    """One evaluation run: how many samples, how long, which parameters."""

    n_samples: int
    tokens_per_sample: int
    params: PartitionParams
    corpus_paths: list[str] = field(default_factory=list)
    seed: int = 0
    prompt_len: int = 16
    detect_key: int | None = None  # set to a different key as a negative control
    mode: str = "greedy"
    temperature: float = 1.0

    def __post_init__(self) -> None:
        if not (isinstance(self.n_samples, int) and self.n_samples >= 1):
            raise ValueError(f"n_samples must be an integer >= 1, got {self.n_samples!r}")
        if not (isinstance(self.tokens_per_sample, int) and self.tokens_per_sample >= 25):
            raise ValueError(
                f"tokens_per_sample must be an integer >= 25, got {self.tokens_per_sample!r}"
            )
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not (isinstance(self.prompt_len, int) and self.prompt_len >= 1):
            raise ValueError(f"prompt_len must be an integer >= 1, got {self.prompt_len!r}")
        if self.detect_key is not None and not (
            isinstance(self.detect_key, int) and 0 <= self.detect_key < 2**64
        ):
            raise ValueError(
                f"detect_key must be an unsigned 64-bit integer or null, got {self.detect_key!r}"
            )
        if self.mode not in ("greedy", "sample"):
            raise ValueError(f"mode must be 'greedy' or 'sample', got {self.mode!r}")
        if not (
            isinstance(self.temperature, (int, float))
            and math.isfinite(self.temperature)
            and self.temperature > 0.0
        ):
            raise ValueError(f"temperature must be a finite positive number, got {self.temperature!r}")
        self.temperature = float(self.temperature)

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "tokens_per_sample": self.tokens_per_sample,
            "params": self.params.to_dict(),
            "corpus_paths": list(self.corpus_paths),
            "seed": self.seed,
            "prompt_len": self.prompt_len,
            "detect_key": self.detect_key,
            "mode": self.mode,
            "temperature": self.temperature,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvalConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown eval config field(s): {', '.join(sorted(extra))}")
        kwargs = dict(data)
        kwargs["params"] = PartitionParams.from_dict(kwargs.get("params", {}))
        for name in ("seed", "detect_key"):
            if isinstance(kwargs.get(name), str):
                kwargs[name] = int(kwargs[name], 10)
        return cls(**kwargs)


@dataclass
class EvalReport:
    """Aggregate rates plus per-sample evidence and the config that made them."""

    tpr: float | None
    fpr: float | None
    per_sample: list[dict]
    ppl_summary: dict | None
    config: EvalConfig

    def to_json_dict(self) -> dict:
        return {
            "tpr": self.tpr,
            "fpr": self.fpr,
            "per_sample": self.per_sample,
            "ppl_summary": self.ppl_summary,
            "config": self.config.to_dict(),
        }

    def to_json(self) -> str:
        """Deterministic serialization (sorted keys, no whitespace drift)."""
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ": "))


def _detect_params(config: EvalConfig) -> PartitionParams:
    if config.detect_key is None or config.detect_key == config.params.key:
        return config.params
    return replace(config.params, key=config.detect_key)


def _draw_prompt(
    rng: np.random.Generator, corpus: np.ndarray | None, config: EvalConfig
) -> TokenStream:
    vocab = config.params.vocab_size
    n = config.prompt_len
    if corpus is not None and corpus.size >= n:
        offset = int(rng.integers(0, corpus.size - n + 1))
        ids = corpus[offset : offset + n]
    else:
        ids = rng.integers(0, vocab, size=n)
    return TokenStream.from_ids([int(t) for t in ids], vocab)


def _load_corpus(config: EvalConfig) -> np.ndarray | None:
    if not config.corpus_paths:
        return None
    tokens = load_corpus_tokens(config.corpus_paths, config.params.vocab_size)
    return tokens if tokens.size else None


def run_tpr(config: EvalConfig, source: LogitsSource) -> EvalReport:
    """Generate watermarked samples, detect each, report the detected fraction.

    Prompts are drawn from the corpus when one is configured (uniform tokens
    otherwise) and decoding follows ``config.mode`` — greedy, or temperature
    sampling driven by each sample's sub-seeded rng.  Detection scores the
    generated completion only, under ``detect_key`` if set (the mismatched-key
    negative control) or the generation key.
    """
    corpus = _load_corpus(config)
    det_params = _detect_params(config)
    per_sample: list[dict] = []
    perplexities: list[float] = []
    detected = 0
    for i in range(config.n_samples):
        try:
            rng = np.random.default_rng(_subseed(config.seed, _TAG_TPR_SAMPLE, i))
            prompt = _draw_prompt(rng, corpus, config)
            record = generate(
                prompt,
                config.tokens_per_sample,
                source,
                config.params,
                mode=config.mode,
                temperature=config.temperature,
                rng=rng,
            )
            report = detect(record.completion, det_params)
            ppl = perplexity(record.completion, source)
        except Exception as exc:
            exc.args = (f"sample {i}: {exc}",)
            raise
        if report.decision is Decision.WATERMARKED:
            detected += 1
        perplexities.append(ppl.value)
        per_sample.append(
            {
                "id": i,
                "fisher_score": report.fisher_score,
                "decision": report.decision.value,
                "threshold": report.threshold,
                "perplexity": ppl.value,
            }
        )
    summary = {
        "mean": float(np.mean(perplexities)),
        "median": float(np.median(perplexities)),
    }
    return EvalReport(
        tpr=detected / config.n_samples,
        fpr=None,
        per_sample=per_sample,
        ppl_summary=summary,
        config=config,
    )


def _corpus_chunks(config: EvalConfig) -> list[np.ndarray]:
    """Non-overlapping chunks of ``tokens_per_sample`` across the corpus files."""
    size = config.tokens_per_sample
    chunks: list[np.ndarray] = []
    for path in config.corpus_paths:
        tokens = load_corpus_tokens([path], config.params.vocab_size)
        for j in range(tokens.size // size):
            chunks.append(tokens[j * size : (j + 1) * size])
    if len(chunks) < config.n_samples:
        raise ValueError(
            f"corpus yields only {len(chunks)} chunk(s) of {size} tokens, "
            f"but n_samples={config.n_samples}"
        )
    return chunks[: config.n_samples]


def run_fpr(config: EvalConfig) -> EvalReport:
    """Detect on clean streams and report the flagged fraction.

    With corpus paths configured, the negatives are non-overlapping corpus
    chunks; with none, they are synthetic i.i.d.-uniform token streams drawn
    from the harness seed.
    """
    det_params = _detect_params(config)
    if config.corpus_paths:
        streams = _corpus_chunks(config)
    else:
        streams = []
        for i in range(config.n_samples):
            rng = np.random.default_rng(_subseed(config.seed, _TAG_FPR_SAMPLE, i))
            streams.append(
                rng.integers(0, config.params.vocab_size, size=config.tokens_per_sample)
            )
    per_sample: list[dict] = []
    flagged = 0
    for i, stream in enumerate(streams):
        try:
            report = detect([int(t) for t in stream], det_params)
        except Exception as exc:
            exc.args = (f"sample {i}: {exc}",)
            raise
        if report.decision is Decision.WATERMARKED:
            flagged += 1
        per_sample.append(
            {
                "id": i,
                "fisher_score": report.fisher_score,
                "decision": report.decision.value,
                "threshold": report.threshold,
            }
        )
    return EvalReport(
        tpr=None,
        fpr=flagged / config.n_samples,
        per_sample=per_sample,
        ppl_summary=None,
        config=config,
    )


_GRID_KEYS = ("delta", "gamma_g", "gamma_r", "lambda_f", "alpha", "length")


def sweep(
    config: EvalConfig,
    source: LogitsSource,
    grid: Mapping[str, Sequence],
    max_cells: int = 256,
) -> list[dict]:
    """Cartesian TPR/FPR sweep over watermark and detection settings.

    ``grid`` maps any of delta / gamma_g / gamma_r / lambda_f / alpha /
    length to candidate values; unlisted axes stay at the config's value
    (``gamma_y`` absorbs the remainder so the weights keep summing to one).
    Cells whose parameters are invalid — notably ``gamma_r = 0``, where the
    red-depletion statistic is undefined — are reported with
    ``status="invalid"`` and empty rates rather than silently skipped.
    Returns one row dict per cell in :data:`SWEEP_COLUMNS` order.
    """
    unknown = set(grid) - set(_GRID_KEYS)
    if unknown:
        raise ValueError(f"unknown sweep axis(es): {', '.join(sorted(unknown))}")
    base = config.params
    axes: list[list] = []
    defaults = {
        "delta": [base.delta],
        "gamma_g": [base.gamma_g],
        "gamma_r": [base.gamma_r],
        "lambda_f": [base.lambda_f],
        "alpha": [base.alpha],
        "length": [config.tokens_per_sample],
    }
    for key in _GRID_KEYS:
        values = list(grid.get(key, defaults[key]))
        if not values:
            raise ValueError(f"sweep axis {key!r} has no values")
        axes.append(values)
    n_cells = math.prod(len(a) for a in axes)
    if n_cells > max_cells:
        raise ValueError(f"sweep grid has {n_cells} cells, exceeding the budget of {max_cells}")

    corpus = _load_corpus(config)
    rows: list[dict] = []
    for cell in itertools.product(*axes):
        delta, gamma_g, gamma_r, lambda_f, alpha, length = cell
        length = int(length)
        row = {
            "delta": float(delta),
            "gamma_g": float(gamma_g),
            "gamma_y": 1.0 - float(gamma_g) - float(gamma_r),
            "gamma_r": float(gamma_r),
            "lambda_f": float(lambda_f),
            "alpha": float(alpha),
            "length": length,
            "n_samples": config.n_samples,
            "tpr": None,
            "fpr": None,
            "status": "ok",
        }
        try:
            if not gamma_r > 0.0:
                raise ValueError("gamma_r = 0 leaves the red-depletion statistic undefined")
            if length < 25:
                raise ValueError("length must be >= 25")
            cell_params = replace(
                base,
                delta=float(delta),
                gamma_g=float(gamma_g),
                gamma_y=row["gamma_y"],
                gamma_r=float(gamma_r),
                lambda_f=float(lambda_f),
                alpha=float(alpha),
            )
        except ValueError as exc:
            row["status"] = f"invalid: {exc}"
            rows.append(row)
            continue

        detected = 0
        for i in range(config.n_samples):
            sub = generation_subseed(config.seed, delta, gamma_g, gamma_r, length, i)
            rng = np.random.default_rng(sub)
            prompt = _draw_prompt(rng, corpus, config)
            record = generate(
                prompt,
                length,
                source,
                cell_params,
                mode=config.mode,
                temperature=config.temperature,
                rng=rng,
            )
            if detect(record.completion, cell_params).decision is Decision.WATERMARKED:
                detected += 1
        flagged = 0
        for i in range(config.n_samples):
            rng = np.random.default_rng(_subseed(config.seed, _TAG_SWEEP_CLEAN, length, i))
            clean = rng.integers(0, cell_params.vocab_size, size=length)
            if detect([int(t) for t in clean], cell_params).decision is Decision.WATERMARKED:
                flagged += 1
        row["tpr"] = detected / config.n_samples
        row["fpr"] = flagged / config.n_samples
        rows.append(row)
    return rows


def write_sweep_csv(rows: Iterable[dict], path: str | Path) -> None:
    """Write sweep rows in the fixed :data:`SWEEP_COLUMNS` order."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in SWEEP_COLUMNS})
