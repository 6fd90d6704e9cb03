"""Parallel-corpus scoring and token-budgeted subset selection.

Corpora travel as TSV: one ``source<TAB>target`` pair per line.  Blank
lines and comment lines ('#' first character, no tab) are skipped on read;
any other line without exactly one tab is rejected with its 1-based line
number.  Scored corpora are written as ``score<TAB>source<TAB>target``
with six fractional digits, descending by score.

Scoring embeds sources with the student and targets with the teacher and
assigns each aligned pair its margin score against k-NN neighbourhoods
drawn from the corpus's own embedding sets.  Pairs with an empty side get
score -inf and are excluded from everyone's neighbourhoods.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .embfile import atomic_write_text
from .encoder import EncoderParams, encode
from .errors import CorpusFormatError, ZeroVectorError
from .margin import SearchConfig, knn, margin, neighborhood_means

Pair = tuple[str, str]


def count_tokens(sentence: str) -> int:
    """Number of whitespace-delimited tokens ('' -> 0, runs collapse)."""
    return len(sentence.split())


# ---------------------------------------------------------------------------
# TSV I/O
# ---------------------------------------------------------------------------


def read_pairs_tsv(path: str | os.PathLike) -> list[Pair]:
    """Read a pair-per-line TSV corpus.

    Raises CorpusFormatError listing every offending line number when any
    non-comment, non-blank line does not contain exactly one tab.
    """
    path = os.fspath(path)
    pairs: list[Pair] = []
    bad: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if line.endswith("\r"):
                line = line[:-1]
            if not line.strip():
                continue
            if line.startswith("#") and "\t" not in line:
                continue
            if line.count("\t") != 1:
                bad.append(lineno)
                continue
            source, target = line.split("\t")
            pairs.append((source, target))
    if bad:
        raise CorpusFormatError(path, bad, "expected exactly one tab per line")
    return pairs


def _check_writable_sentence(s: str) -> None:
    if "\t" in s or "\n" in s or "\r" in s:
        raise ValueError("sentences must not contain tabs or newlines")


def write_pairs_tsv(
    path: str | os.PathLike, pairs: list[Pair], comments: list[str] | None = None
) -> None:
    """Write pairs as ``source<TAB>target`` lines (atomic), with optional
    leading '#' comment lines."""
    lines = [f"# {c}" for c in (comments or [])]
    for source, target in pairs:
        _check_writable_sentence(source)
        _check_writable_sentence(target)
        lines.append(f"{source}\t{target}")
    atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass(frozen=True)
class ScoredPair:
    """A corpus pair with its margin score and target-side token count."""

    source: str
    target: str
    score: float
    target_tokens: int


def write_scored_tsv(
    path: str | os.PathLike,
    scored: list[ScoredPair],
    comments: list[str] | None = None,
) -> None:
    """Write ``score<TAB>source<TAB>target`` lines, descending by score
    (ties keep the given order); -inf prints as '-inf'."""
    order = sorted(range(len(scored)), key=lambda i: -scored[i].score)
    lines = [f"# {c}" for c in (comments or [])]
    for i in order:
        p = scored[i]
        _check_writable_sentence(p.source)
        _check_writable_sentence(p.target)
        lines.append(f"{p.score:.6f}\t{p.source}\t{p.target}")
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# scoring and selection
# ---------------------------------------------------------------------------


def score_corpus(
    pairs: list[Pair],
    student: EncoderParams,
    teacher: EncoderParams,
    cfg: SearchConfig,
    langid_hook=None,
    threads: int = 1,
) -> list[ScoredPair]:
    """Margin-score every pair (student encodes sources, teacher targets).

    ``langid_hook(source, target) -> bool`` drops a pair entirely when it
    returns True (e.g. wrong-language detection).  Pairs with an empty
    side, or whose encoding collapses, score -inf and are isolated from
    all neighbourhoods.  Output order follows the (surviving) input.
    """
    if langid_hook is not None:
        pairs = [p for p in pairs if not langid_hook(*p)]

    src_vecs: list[np.ndarray | None] = []
    tgt_vecs: list[np.ndarray | None] = []
    for source, target in pairs:
        try:
            s = encode(student, source) if source else None
            t = encode(teacher, target) if target else None
        except ZeroVectorError:
            s = t = None
        if s is None or t is None:  # a pair participates only when whole
            s = t = None
        src_vecs.append(s)
        tgt_vecs.append(t)

    valid = [i for i, s in enumerate(src_vecs) if s is not None]
    scores = np.full(len(pairs), -math.inf)
    if valid:
        S = np.stack([src_vecs[i] for i in valid])
        T = np.stack([tgt_vecs[i] for i in valid])
        _, fwd_cos = knn(S, T, cfg.k, threads)
        _, bwd_cos = knn(T, S, cfg.k, threads)
        dx = neighborhood_means(fwd_cos, cfg.k)
        dy = neighborhood_means(bwd_cos, cfg.k)
        diag = np.clip(np.einsum("nd,nd->n", S, T), -1.0, 1.0)
        for row, i in enumerate(valid):
            scores[i] = margin(
                float(diag[row]), float(dx[row] + dy[row]), cfg.margin_kind
            )
    return [
        ScoredPair(source, target, float(scores[i]), count_tokens(target))
        for i, (source, target) in enumerate(pairs)
    ]


def select_by_token_budget(scored: list[ScoredPair], budget: int) -> list[ScoredPair]:
    """Greedy best-first selection under a target-token budget.

    Pairs are taken in descending score order (ties keep input order)
    until the first pair that would overflow the budget; selection stops
    there, so selections for nested budgets are prefixes of each other.
    -inf-scored pairs are never selected.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    if any(math.isnan(p.score) for p in scored):
        raise ValueError("scores must not be NaN")
    order = sorted(range(len(scored)), key=lambda i: -scored[i].score)
    out: list[ScoredPair] = []
    total = 0
    for i in order:
        p = scored[i]
        if p.score == -math.inf:
            break  # everything after is -inf too
        if total + p.target_tokens > budget:
            break
        out.append(p)
        total += p.target_tokens
    return out
