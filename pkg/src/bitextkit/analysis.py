"""Training diagnostics: queue-similarity distributions and threshold sweeps.

``similarity_distribution`` replays the exact batching and queue dynamics
of a training run (no weight updates) and records, for every target at the
moment its batch is processed, the average cosine between its teacher
embedding and the queue contents.  Batching by similar length concentrates
near-duplicates, which shows up as probability mass at high similarity —
the regime where hard-negative pre-filtering matters.

``threshold_sweep`` trains one student per filter threshold from the same
seed/init and reports held-out alignment error plus the fraction of
negatives the mask kept.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .embfile import atomic_write_text
from .encoder import EncoderParams, encode_batch
from .errors import EmptyQueueError
from .filtering import count_tokens
from .margin import SearchConfig, xsim_error_rate
from .trainer import NegativeQueue, TrainConfig, batch_indices, train_distill

Pair = tuple[str, str]

DEFAULT_BINS = 40


@dataclass(frozen=True)
class Histogram:
    """Fixed-range histogram; edges has len(counts) + 1 entries."""

    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def cosine_histogram(values, bins: int = DEFAULT_BINS) -> Histogram:
    """Uniform-bin histogram over [-1, 1]; every cosine lands in a bin
    (the last bin is closed on the right), so counts sum to len(values)."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins, range=(-1.0, 1.0))
    return Histogram(edges, counts.astype(np.int64))


def avg_target_similarity(target_emb, queue: NegativeQueue) -> float:
    """Mean cosine between one (unit-norm) target embedding and every
    queue entry; raises EmptyQueueError on an empty queue."""
    if queue.size == 0:
        raise EmptyQueueError("queue is empty")
    k = np.asarray(target_emb, dtype=np.float64)
    sims = np.clip(queue.entries @ k, -1.0, 1.0)
    return float(sims.mean())


def similarity_values(
    targets: list[str], teacher: EncoderParams, cfg: TrainConfig
) -> np.ndarray:
    """Average target-vs-queue similarity for one replayed pass.

    Replays the batch order and FIFO queue updates a training run with
    ``cfg`` would perform (same derived RNG streams), recording each
    target's average similarity against the queue as it stood when the
    target's batch was processed.  Targets of the warm-up batch (empty
    queue) are excluded.  Weights never enter: only the frozen teacher's
    embeddings matter.
    """
    tgt = encode_batch(teacher, targets)
    lengths = [count_tokens(t) for t in targets]
    _, batch_seq, _ = np.random.SeedSequence(cfg.rng_seed).spawn(3)
    batch_rng = np.random.default_rng(batch_seq)
    queue_mat = np.empty((0, teacher.dim), dtype=np.float64)
    values: list[np.ndarray] = []
    for batch in batch_indices(lengths, cfg, batch_rng):
        emb = tgt[batch]
        if queue_mat.shape[0]:
            sims = np.clip(emb @ queue_mat.T, -1.0, 1.0)
            values.append(sims.mean(axis=1))
        queue_mat = np.vstack([queue_mat, emb])[-cfg.queue_size :]
    if not values:
        return np.empty(0, dtype=np.float64)
    return np.concatenate(values)


def similarity_distribution(
    targets: list[str],
    teacher: EncoderParams,
    cfg: TrainConfig,
    bins: int = DEFAULT_BINS,
) -> Histogram:
    """Histogram of similarity_values over uniform bins on [-1, 1]."""
    return cosine_histogram(similarity_values(targets, teacher, cfg), bins=bins)


@dataclass(frozen=True)
class SweepRow:
    """One threshold sweep result row.

    error_rate is a held-out xsim error percentage in [0, 100];
    kept_fraction is the mask-level keep rate in [0, 1].
    """

    sigma: float
    error_rate: float
    kept_fraction: float
    seed: int


def threshold_sweep(
    pairs: list[Pair],
    teacher: EncoderParams,
    base_cfg: TrainConfig,
    sigmas,
    eval_pairs: list[Pair],
    search_cfg: SearchConfig | None = None,
    log_fn=None,
) -> list[SweepRow]:
    """Train one student per threshold (same seed => same init and batch
    order) and evaluate each on held-out pairs.

    A failure for one threshold is isolated: its row records NaN and the
    sweep continues.  kept_fraction is the mask-level keep rate observed
    during that run.
    """
    search_cfg = search_cfg or SearchConfig()
    eval_tgt = encode_batch(teacher, [t for _, t in eval_pairs])
    rows: list[SweepRow] = []
    for sigma in sigmas:
        cfg = replace(
            base_cfg, filter_threshold=float(sigma), prefilter_enabled=True
        )
        try:
            result = train_distill(pairs, teacher, cfg, log_fn=log_fn)
            eval_src = encode_batch(result.student, [s for s, _ in eval_pairs])
            err = xsim_error_rate(eval_src, eval_tgt, search_cfg)
            rows.append(
                SweepRow(float(sigma), err, result.kept_fraction, cfg.rng_seed)
            )
        except Exception as exc:  # isolate the failing threshold
            if log_fn is not None:
                log_fn(f"sigma={sigma}: failed: {exc}")
            rows.append(
                SweepRow(float(sigma), math.nan, math.nan, cfg.rng_seed)
            )
    return rows


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def write_histogram_csv(
    path: str | os.PathLike,
    hist: Histogram,
    shuffle: bool,
    comments: list[str] | None = None,
) -> None:
    """CSV of ``bin_lo,bin_hi,count`` rows with a ``# total=... shuffle=...``
    comment first; extra comments follow it."""
    lines = [f"# total={hist.total} shuffle={1 if shuffle else 0}"]
    lines += [f"# {c}" for c in (comments or [])]
    lines.append("bin_lo,bin_hi,count")
    for lo, hi, count in zip(hist.edges[:-1], hist.edges[1:], hist.counts):
        lines.append(f"{lo:.6f},{hi:.6f},{int(count)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_sweep_csv(
    path: str | os.PathLike,
    rows: list[SweepRow],
    comments: list[str] | None = None,
) -> None:
    """CSV of ``sigma,error_rate,kept_fraction,seed`` rows (error_rate a
    percentage in [0, 100], kept_fraction a fraction in [0, 1])."""
    lines = [f"# {c}" for c in (comments or [])]
    lines.append("sigma,error_rate,kept_fraction,seed")
    for r in rows:
        lines.append(
            f"{r.sigma:g},{r.error_rate:.6f},{r.kept_fraction:.6f},{r.seed}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")
