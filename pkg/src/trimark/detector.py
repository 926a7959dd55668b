"""Detection side: replay the per-position partitions over a token stream,
test green enrichment and red depletion separately, and combine the two
one-sided tests into a single decision score.

Detection needs only the shared parameters (including the key) — never the
generating model — and is a pure function of the scored token stream.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import chi2_4_quantile, norm_sf
from .partition import Label, PartitionParams, stream_labels, window_seeds
from .tokens import as_stream

#: Below this many scored tokens the normal approximation is shaky, so the
#: report carries a low-confidence flag (the decision is still computed).
LOW_CONFIDENCE_LENGTH = 25

_P_FLOOR = 1e-300


class Decision(str, enum.Enum):
    WATERMARKED = "WATERMARKED"
    CLEAN = "CLEAN"


@dataclass(frozen=True)
class HitSeries:
    """Per-position green/red membership indicators for a scored stream."""

    green_hits: np.ndarray = field(repr=False)  # bool, token was green there
    red_hits: np.ndarray = field(repr=False)  # bool, token was red there

    def __post_init__(self) -> None:
        green = np.ascontiguousarray(self.green_hits, dtype=bool)
        red = np.ascontiguousarray(self.red_hits, dtype=bool)
        if green.shape != red.shape or green.ndim != 1:
            raise ValueError("green and red indicator arrays must be aligned 1-d arrays")
        if np.any(green & red):
            raise ValueError("a position cannot be both green and red")
        object.__setattr__(self, "green_hits", green)
        object.__setattr__(self, "red_hits", red)

    def __len__(self) -> int:
        return int(self.green_hits.size)

    @property
    def green_count(self) -> int:
        return int(self.green_hits.sum())

    @property
    def red_count(self) -> int:
        return int(self.red_hits.sum())


def replay_indicators(text_or_ids, params: PartitionParams) -> HitSeries:
    """Recompute each position's partition and record set membership.

    Position ``i`` is seeded from the up-to-``window_h`` preceding tokens of
    the scored stream itself — the same windows the embedder used — so on an
    untampered stream the replayed labels match the generation-time labels
    exactly.
    """
    stream = as_stream(text_or_ids, params.vocab_size)
    if len(stream) == 0:
        raise ValueError("cannot score an empty token stream")
    seeds = window_seeds(stream.ids, params.window_h, params.key)
    labels = stream_labels(seeds, stream.ids, params)
    return HitSeries(green_hits=labels == Label.GREEN, red_hits=labels == Label.RED)


def z_statistics(series: HitSeries, params: PartitionParams) -> tuple[float, float]:
    """One-sided z-scores for green enrichment and red depletion.

    Under the no-watermark null each position is green with probability
    ``gamma_g`` and red with probability ``gamma_r``; both statistics are
    oriented so that watermark evidence pushes them positive (more green
    than expected, *less* red than expected).
    """
    length = len(series)
    if length == 0:
        raise ValueError("cannot compute statistics for an empty hit series")
    if not 0.0 < params.gamma_r < 1.0:
        raise ValueError(
            f"detection statistics require gamma_r in (0, 1), got {params.gamma_r}"
        )
    green_frac = series.green_count / length
    red_frac = series.red_count / length
    z_green = (green_frac - params.gamma_g) / math.sqrt(
        params.gamma_g * (1.0 - params.gamma_g) / length
    )
    z_red = (params.gamma_r - red_frac) / math.sqrt(
        params.gamma_r * (1.0 - params.gamma_r) / length
    )
    return z_green, z_red


@dataclass(frozen=True)
class FisherOutcome:
    """Combined-test result: tail p-values, weighted score, threshold, call."""

    p_green: float
    p_red: float
    fisher_score: float
    threshold: float
    decision: Decision


def fisher_decide(z_green: float, z_red: float, params: PartitionParams) -> FisherOutcome:
    """Combine the two one-sided tests Fisher-style and compare to threshold.

    ``score = -2 * (lambda_f * ln(p_green) + (1 - lambda_f) * ln(p_red))``
    with upper-tail p-values clamped into ``[1e-300, 1]``; the decision
    threshold is the chi-square(4 dof) quantile at level ``1 - alpha``.
    """
    p_green = min(1.0, max(_P_FLOOR, norm_sf(z_green)))
    p_red = min(1.0, max(_P_FLOOR, norm_sf(z_red)))
    score = -2.0 * (
        params.lambda_f * math.log(p_green) + (1.0 - params.lambda_f) * math.log(p_red)
    )
    threshold = chi2_4_quantile(1.0 - params.alpha)
    decision = Decision.WATERMARKED if score >= threshold else Decision.CLEAN
    return FisherOutcome(
        p_green=p_green,
        p_red=p_red,
        fisher_score=score,
        threshold=threshold,
        decision=decision,
    )


@dataclass(frozen=True)
class DetectionReport:
    """Everything the detector concluded about one token stream."""

    length: int
    green_count: int
    red_count: int
    green_fraction: float
    red_fraction: float
    z_green: float
    z_red: float
    p_green: float
    p_red: float
    fisher_score: float
    threshold: float
    decision: Decision
    low_confidence: bool
    params: PartitionParams

    def to_json_dict(self) -> dict:
        return {
            "length": self.length,
            "green_count": self.green_count,
            "red_count": self.red_count,
            "green_fraction": self.green_fraction,
            "red_fraction": self.red_fraction,
            "z_green": self.z_green,
            "z_red": self.z_red,
            "p_green": self.p_green,
            "p_red": self.p_red,
            "fisher_score": self.fisher_score,
            "threshold": self.threshold,
            "decision": self.decision.value,
            "low_confidence": self.low_confidence,
            "params": self.params.to_dict(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "DetectionReport":
        return cls(
            length=int(data["length"]),
            green_count=int(data["green_count"]),
            red_count=int(data["red_count"]),
            green_fraction=float(data["green_fraction"]),
            red_fraction=float(data["red_fraction"]),
            z_green=float(data["z_green"]),
            z_red=float(data["z_red"]),
            p_green=float(data["p_green"]),
            p_red=float(data["p_red"]),
            fisher_score=float(data["fisher_score"]),
            threshold=float(data["threshold"]),
            decision=Decision(data["decision"]),
            low_confidence=bool(data["low_confidence"]),
            params=PartitionParams.from_dict(data["params"]),
        )


def detect(text_or_ids, params: PartitionParams) -> DetectionReport:
    """Score a token stream end to end and return the full report."""
    series = replay_indicators(text_or_ids, params)
    length = len(series)
    z_green, z_red = z_statistics(series, params)
    outcome = fisher_decide(z_green, z_red, params)
    return DetectionReport(
        length=length,
        green_count=series.green_count,
        red_count=series.red_count,
        green_fraction=series.green_count / length,
        red_fraction=series.red_count / length,
        z_green=z_green,
        z_red=z_red,
        p_green=outcome.p_green,
        p_red=outcome.p_red,
        fisher_score=outcome.fisher_score,
        threshold=outcome.threshold,
        decision=outcome.decision,
        low_confidence=length < LOW_CONFIDENCE_LENGTH,
        params=params,
    )
