"""Hashed character n-gram featurizer and linear sentence encoder.

A sentence is wrapped in sentinels ("^" prepended, "$" appended), its
character n-grams are hashed into a fixed number of buckets (see
``hashing`` for the exact hash), and the resulting sparse count vector f
is projected and normalized:

    embed(s) = l2_normalize(W^T f),   W in R^(buckets x dim)

Encoders are plain parameter containers; a frozen encoder's weights are
read-only and any gradient computation against it raises.
"""

from __future__ import annotations

import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import hashing
from .embfile import atomic_write_text, read_embeddings, write_embeddings
from .errors import DimMismatchError, FrozenEncoderError, ZeroVectorError
from .vectors import ZERO_NORM_EPS

SENTINEL_BEGIN = "^"
SENTINEL_END = "$"
DEFAULT_ORDERS = (2, 3)
DEFAULT_BUCKETS = 4096


@dataclass(frozen=True)
class FeaturizerConfig:
    """Defines the text -> sparse feature map; equal configs hash equally."""

    ngram_orders: tuple[int, ...] = DEFAULT_ORDERS
    bucket_count: int = DEFAULT_BUCKETS
    hash_seed: int = 0

    def __post_init__(self):
        orders = tuple(sorted({int(o) for o in self.ngram_orders}))
        if not orders or orders[0] < 1:
            raise ValueError("ngram_orders must be non-empty with all orders >= 1")
        object.__setattr__(self, "ngram_orders", orders)
        if int(self.bucket_count) < 2:
            raise ValueError("bucket_count must be >= 2")
        object.__setattr__(self, "bucket_count", int(self.bucket_count))
        object.__setattr__(self, "hash_seed", int(self.hash_seed))


@dataclass(frozen=True)
class SparseCounts:
    """Sparse count vector: strictly increasing indices, positive counts."""

    indices: np.ndarray  # int64
    counts: np.ndarray  # float64
    length: int

    @property
    def nnz(self) -> int:
        return int(self.indices.shape[0])

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.length, dtype=np.float64)
        dense[self.indices] = self.counts
        return dense


def featurize(sentence: str, cfg: FeaturizerConfig) -> SparseCounts:
    """Hashed n-gram counts of a sentence.

    The empty sentence maps to the all-zero vector (no sentinel n-grams
    are counted for it).  Deterministic for a fixed config.
    """
    if sentence:
        wrapped = SENTINEL_BEGIN + sentence + SENTINEL_END
        ids = hashing.ngram_bucket_ids(
            wrapped, cfg.ngram_orders, cfg.bucket_count, cfg.hash_seed
        )
    else:
        ids = np.empty(0, dtype=np.int64)
    if ids.size == 0:
        return SparseCounts(
            np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64), cfg.bucket_count
        )
    idx, cnt = np.unique(ids, return_counts=True)
    return SparseCounts(idx, cnt.astype(np.float64), cfg.bucket_count)


@dataclass
class EncoderParams:
    """Featurizer config plus the (bucket_count x dim) projection weights.

    Weights are held as float64; frozen encoders get a private read-only
    copy so they can never be modified through this object.
    """

    featurizer: FeaturizerConfig
    weights: np.ndarray
    frozen: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise DimMismatchError(f"weights must be 2-D, got shape {w.shape}")
        if w.shape[0] != self.featurizer.bucket_count:
            raise DimMismatchError(
                f"weights have {w.shape[0]} rows but featurizer has "
                f"{self.featurizer.bucket_count} buckets"
            )
        if w.shape[1] < 2:
            raise DimMismatchError("embedding dim must be >= 2")
        if not np.isfinite(w).all():
            raise ValueError("non-finite encoder weights")
        if self.frozen:
            w = w.copy()
            w.setflags(write=False)
        self.weights = w

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1])


def make_teacher(
    featurizer: FeaturizerConfig, dim: int, weight_seed: int
) -> EncoderParams:
    """Frozen encoder with seeded uniform[-1, 1] weights."""
    rng = np.random.default_rng(weight_seed)
    weights = rng.uniform(-1.0, 1.0, size=(featurizer.bucket_count, dim))
    return EncoderParams(featurizer, weights, frozen=True)


def encode(params: EncoderParams, sentence: str) -> np.ndarray:
    """Unit-norm float64 embedding of a sentence.

    Raises ZeroVectorError if the sentence is empty, produces no features,
    or its projection collapses to (near-)zero norm.
    """
    feats = featurize(sentence, params.featurizer)
    if feats.nnz == 0:
        raise ZeroVectorError("sentence has no features")
    z = feats.counts @ params.weights[feats.indices]
    norm = float(np.linalg.norm(z))
    if norm <= ZERO_NORM_EPS:
        raise ZeroVectorError("projection collapsed to zero norm")
    return z / norm


def encode_batch(
    params: EncoderParams, sentences: list[str], threads: int = 1
) -> np.ndarray:
    """Embeddings for a list of sentences, rows in input order.

    Failures report the lowest failing sentence index regardless of thread
    scheduling; parallel output is bitwise identical to serial because each
    row is computed independently and written by index.
    """
    n = len(sentences)
    out = np.empty((n, params.dim), dtype=np.float64)
    if threads <= 1 or n < 2:
        for i, sentence in enumerate(sentences):
            try:
                out[i] = encode(params, sentence)
            except Exception as exc:
                raise type(exc)(f"sentence {i}: {exc}") from exc
        return out

    failures: list[tuple[int, Exception]] = []

    def work(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            try:
                out[i] = encode(params, sentences[i])
            except Exception as exc:
                failures.append((i, exc))
                return

    step = -(-n // threads)
    bounds = [(lo, min(lo + step, n)) for lo in range(0, n, step)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda b: work(*b), bounds))
    if failures:
        i, exc = min(failures, key=lambda f: f[0])
        raise type(exc)(f"sentence {i}: {exc}") from exc
    return out


def backprop_encode(
    params: EncoderParams, sentence: str, upstream_grad
) -> np.ndarray:
    """Gradient of the embedding w.r.t. the weights for one sentence.

    With f the feature vector, z = W^T f, q = z/||z|| and g the upstream
    gradient on q, the chain rule through normalization gives
    dL/dz = (g - (g.q) q)/||z|| and dL/dW[b, :] = f_b * dL/dz; only rows of
    active buckets are nonzero.  Raises FrozenEncoderError for frozen
    encoders.
    """
    if params.frozen:
        raise FrozenEncoderError("cannot backprop through a frozen encoder")
    feats = featurize(sentence, params.featurizer)
    if feats.nnz == 0:
        raise ZeroVectorError("sentence has no features")
    rows = params.weights[feats.indices]
    z = feats.counts @ rows
    norm = float(np.linalg.norm(z))
    if norm <= ZERO_NORM_EPS:
        raise ZeroVectorError("projection collapsed to zero norm")
    q = z / norm
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.shape != (params.dim,):
        raise DimMismatchError(f"upstream grad shape {g.shape} != ({params.dim},)")
    dz = (g - np.dot(g, q) * q) / norm
    grad = np.zeros_like(params.weights)
    grad[feats.indices] = feats.counts[:, None] * dz[None, :]
    return grad


# ---------------------------------------------------------------------------
# serialization: EMB1 weight matrix + plain-text sidecar header
# ---------------------------------------------------------------------------

_META_SUFFIX = ".meta"
_META_RE = re.compile(
    r"^dim=(\d+) buckets=(\d+) orders=([\d,]+) seed=(-?\d+) frozen=([01])$"
)


def save_encoder(
    params: EncoderParams, path: str | os.PathLike, comments: list[str] | None = None
) -> None:
    """Write weights to ``path`` (EMB1, float32) and a text sidecar to
    ``path + ".meta"``.

    The sidecar's first line pins the geometry and featurizer:
    ``dim=<d> buckets=<b> orders=<o,o> seed=<s> frozen=<0|1>``; any extra
    ``comments`` follow as '#' lines.
    """
    write_embeddings(path, params.weights)
    orders = ",".join(str(o) for o in params.featurizer.ngram_orders)
    header = (
        f"dim={params.dim} buckets={params.featurizer.bucket_count} "
        f"orders={orders} seed={params.featurizer.hash_seed} "
        f"frozen={1 if params.frozen else 0}"
    )
    lines = [header] + [f"# {c}" for c in (comments or [])]
    atomic_write_text(os.fspath(path) + _META_SUFFIX, "\n".join(lines) + "\n")


def load_encoder(path: str | os.PathLike) -> EncoderParams:
    """Inverse of save_encoder.

    Weights come back as float64 (the file stores float32, so a save/load
    round trip quantizes to float32 precision).  The sidecar header must
    agree with the matrix shape.
    """
    meta_path = os.fspath(path) + _META_SUFFIX
    header = None
    with open(meta_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            header = line
            break
    if header is None:
        raise ValueError(f"{meta_path}: no header line found")
    m = _META_RE.match(header)
    if m is None:
        raise ValueError(f"{meta_path}: malformed header {header!r}")
    dim, buckets, orders_s, seed, frozen = m.groups()
    featurizer = FeaturizerConfig(
        ngram_orders=tuple(int(o) for o in orders_s.split(",")),
        bucket_count=int(buckets),
        hash_seed=int(seed),
    )
    weights = read_embeddings(path).astype(np.float64)
    if weights.shape != (int(buckets), int(dim)):
        raise DimMismatchError(
            f"{path}: weight shape {weights.shape} does not match sidecar "
            f"({buckets} x {dim})"
        )
    return EncoderParams(featurizer, weights, frozen=frozen == "1")
