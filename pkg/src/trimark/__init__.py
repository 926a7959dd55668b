"""Tri-set statistical watermarking for token streams.

Embedding partitions the vocabulary at every decoding step — seeded by the
recent context and a secret key — into green (logit bonus), yellow (logit
penalty) and red (excluded) sets.  Detection replays the partitions over a
token stream and combines a green-enrichment test with a red-depletion test
into one decision score.
"""

from .detector import (
    Decision,
    DetectionReport,
    FisherOutcome,
    HitSeries,
    detect,
    fisher_decide,
    replay_indicators,
    z_statistics,
)
from .engine import (
    BiasedLogits,
    GenerationRecord,
    LogitsSource,
    PerplexityResult,
    ToyMarkovModel,
    UniformLogitsSource,
    bias_for_context,
    bias_logits,
    generate,
    masked_argmax,
    masked_softmax,
    perplexity,
)
from .evaluate import (
    EvalConfig,
    EvalReport,
    run_fpr,
    run_tpr,
    sweep,
    write_sweep_csv,
)
from .numerics import binom_sf, chi2_4_cdf, chi2_4_quantile, norm_cdf, norm_sf
from .partition import (
    GREEN_STREAM,
    YELLOW_RED_STREAM,
    Label,
    PartitionParams,
    TriPartition,
    hash64,
    seed_from_context,
    token_label,
    tri_partition,
    uniform_stream,
)
from .tokens import BYTE_VOCAB_SIZE, TokenStream

__version__ = "0.1.0"

__all__ = [
    "BYTE_VOCAB_SIZE",
    "BiasedLogits",
    "Decision",
    "DetectionReport",
    "EvalConfig",
    "EvalReport",
    "FisherOutcome",
    "GREEN_STREAM",
    "GenerationRecord",
    "HitSeries",
    "Label",
    "LogitsSource",
    "PartitionParams",
    "PerplexityResult",
    "TokenStream",
    "ToyMarkovModel",
    "TriPartition",
    "UniformLogitsSource",
    "YELLOW_RED_STREAM",
    "bias_for_context",
    "bias_logits",
    "binom_sf",
    "chi2_4_cdf",
    "chi2_4_quantile",
    "detect",
    "fisher_decide",
    "generate",
    "hash64",
    "masked_argmax",
    "masked_softmax",
    "norm_cdf",
    "norm_sf",
    "perplexity",
    "replay_indicators",
    "run_fpr",
    "run_tpr",
    "seed_from_context",
    "sweep",
    "token_label",
    "tri_partition",
    "uniform_stream",
    "write_sweep_csv",
    "z_statistics",
]
