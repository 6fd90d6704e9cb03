"""Benchmark the compiled vs pure-Python n-gram hashing backends.

Generates a synthetic corpus, featurizes it with each available backend,
and reports throughput (sentences/s and n-grams/s).  Both backends produce
bit-identical bucket ids; the benchmark asserts that on a sample before
timing anything.

Usage:
    python bench/bench_hashing.py [--sentences 20000] [--repeats 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bitextkit import CipherSpec, gen_cipher_corpus
from bitextkit.hashing import _fill_compiled, _fill_pure, ngram_bucket_ids

ORDERS = (2, 3)
BUCKETS = 4096
SEED = 11


def backend_table() -> dict[str, object]:
    table = {"pure": _fill_pure}
    if _fill_compiled is not None:
        table["compiled"] = _fill_compiled
    return table


def run(sentences: list[str], fill, repeats: int) -> tuple[float, int]:
    """Best-of-N wall time over the whole corpus plus total n-gram count."""
    total = 0
    best = float("inf")
    for _ in range(repeats):
        count = 0
        start = time.perf_counter()
        for s in sentences:
            count += ngram_bucket_ids(s, ORDERS, BUCKETS, SEED, backend=fill).size
        best = min(best, time.perf_counter() - start)
        total = count
    return best, total


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sentences", type=int, default=20000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    spec = CipherSpec(vocab_size=200, min_len=2, max_len=20, map_seed=3)
    pairs = gen_cipher_corpus(spec, args.sentences, seed=5)
    sentences = [s for s, _ in pairs] + [t for _, t in pairs]

    table = backend_table()
    if len(table) > 1:
        sample = sentences[:: max(1, len(sentences) // 200)]
        for s in sample:
            ids = {
                name: ngram_bucket_ids(s, ORDERS, BUCKETS, SEED, backend=fill)
                for name, fill in table.items()
            }
            first = next(iter(ids.values()))
            for name, got in ids.items():
                if not np.array_equal(first, got):
                    raise AssertionError(f"backend {name} disagrees on {s!r}")
        print(f"agreement check passed on {len(sample)} sentences")
    else:
        print("compiled backend unavailable; benchmarking pure only")

    results = {}
    for name, fill in table.items():
        elapsed, ngrams = run(sentences, fill, args.repeats)
        results[name] = elapsed
        print(
            f"{name:>8}: {elapsed:.3f} s  "
            f"({len(sentences) / elapsed:,.0f} sentences/s, "
            f"{ngrams / elapsed:,.0f} n-grams/s)"
        )
    if "compiled" in results:
        print(f"speedup: {results['pure'] / results['compiled']:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
