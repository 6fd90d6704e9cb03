"""End-to-end acceptance checks.

Ten numbered criteria, each asserted at a pinned tolerance and reporting a
single ``[criterion N] PASS`` line with its measured numbers.  The heavy
training runs are shared session fixtures (see conftest).
"""

import math
import time
from dataclasses import replace

import numpy as np

from bitextkit.analysis import (
    similarity_distribution,
    similarity_values,
    threshold_sweep,
    write_histogram_csv,
    write_sweep_csv,
)
from bitextkit.embfile import read_embeddings, write_embeddings
from bitextkit.encoder import EncoderParams, FeaturizerConfig, make_teacher
from bitextkit.errors import ZeroVectorError
from bitextkit.filtering import score_corpus, select_by_token_budget
from bitextkit.margin import SearchConfig, align, xsim_error_rate
from bitextkit.synth import gen_cipher_corpus, inject_noise
from bitextkit.trainer import (
    NegativeQueue,
    TrainConfig,
    equalize_negatives,
    filtered_infonce_loss,
    infonce_loss,
    prefilter_mask,
    queue_update,
    train_distill,
    train_step,
)

from conftest import distill_config


def random_units(rng, n, dim) -> np.ndarray:
    m = rng.normal(size=(n, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def random_word(rng, alphabet, max_len=4) -> str:
    length = int(rng.integers(1, max_len + 1))
    return "".join(alphabet[int(c)] for c in rng.integers(0, len(alphabet), size=length))


# --- criterion 1: analytic gradients vs central finite differences -------------


def test_criterion_1_training_gradient_matches_finite_differences():
    start = time.perf_counter()
    rng = np.random.default_rng(777)
    eps = 1e-4
    checked = 0
    worst = 0.0
    while checked < 20:
        buckets = int(rng.integers(2, 11))  # at most 10 buckets
        dim = int(rng.integers(2, 9))  # at most 8 dims
        teacher_feat = FeaturizerConfig(
            ngram_orders=(1, 2), bucket_count=buckets, hash_seed=int(rng.integers(0, 1000))
        )
        teacher = make_teacher(teacher_feat, dim, weight_seed=int(rng.integers(0, 1000)))
        student_feat = replace(teacher_feat, hash_seed=teacher_feat.hash_seed + 1)
        W0 = rng.uniform(-0.5, 0.5, size=(buckets, dim))
        batch = [
            (random_word(rng, "abcd"), random_word(rng, "nopq"))
            for _ in range(int(rng.integers(2, 4)))
        ]
        queue = NegativeQueue(8, random_units(rng, 4, dim))
        cfg = TrainConfig(
            temperature=0.5, queue_size=8, batch_size=len(batch), step_size=1.0
        )
        eval_cfg = replace(cfg, step_size=0.0)

        def loss_of(W):
            student = EncoderParams(student_feat, W)
            loss, _, _ = train_step(
                student, teacher, batch, queue, eval_cfg, rng=np.random.default_rng(777)
            )
            return loss

        try:
            _, updated, _ = train_step(
                EncoderParams(student_feat, W0.copy()),
                teacher,
                batch,
                queue,
                cfg,
                rng=np.random.default_rng(777),
            )
        except ZeroVectorError:
            continue  # a degenerate draw; take another instance
        analytic = W0 - updated.weights  # step size is exactly 1.0

        fd = np.zeros_like(W0)
        for b in range(buckets):
            for d in range(dim):
                w_plus = W0.copy()
                w_plus[b, d] += eps
                w_minus = W0.copy()
                w_minus[b, d] -= eps
                fd[b, d] = (loss_of(w_plus) - loss_of(w_minus)) / (2.0 * eps)

        scale = np.maximum(np.abs(analytic), np.abs(fd))
        rel = np.where(scale < 1e-10, 0.0, np.abs(analytic - fd) / np.maximum(scale, 1e-300))
        worst = max(worst, float(rel.max()))
        assert rel.max() <= 1e-4
        checked += 1

    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    print(
        f"[criterion 1] PASS — {checked} instances, worst relative error "
        f"{worst:.3e} (<= 1e-4), {elapsed:.1f}s (< 60s)"
    )


# --- criterion 2: keep-all filter reproduces the unfiltered loss ----------------


def test_criterion_2_keep_all_filter_is_loss_neutral():
    rng = np.random.default_rng(1234)
    worst = 0.0
    for _ in range(100):
        dim = int(rng.integers(2, 11))
        batch = int(rng.integers(1, 9))
        pool_n = int(rng.integers(1, 25))
        q = random_units(rng, batch, dim)
        k = random_units(rng, batch, dim)
        pool = random_units(rng, pool_n, dim)
        tau = float(rng.uniform(0.05, 1.5))
        mask = np.stack([prefilter_mask(k[j], pool, 1.5) for j in range(batch)])
        assert mask.all()  # threshold 1.5 keeps every candidate
        fs = equalize_negatives(mask, rng)
        filtered = filtered_infonce_loss(q, k, pool, fs, tau)
        plain = float(np.mean([infonce_loss(q[j], k[j], pool, tau) for j in range(batch)]))
        worst = max(worst, abs(filtered - plain))
        assert abs(filtered - plain) <= 1e-12
    print(
        f"[criterion 2] PASS — 100 random batches, filtered-vs-unfiltered "
        f"max deviation {worst:.2e} (<= 1e-12)"
    )


# --- criterion 3: closed-form loss values ---------------------------------------


def test_criterion_3_closed_form_losses():
    q = np.array([1.0, 0.0, 0.0])
    orth = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

    got_a = infonce_loss(q, q, orth, 1.0)
    want_a = math.log1p(2.0 * math.exp(-1.0))  # = 0.551444713932051
    assert abs(got_a - want_a) <= 1e-6
    assert abs(got_a - 0.551444713932051) <= 1e-6

    k = np.array([0.0, 1.0, 0.0, 0.0])
    uniform_negs = np.array(
        [[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0], [0.0, -1.0, 0.0, 0.0]]
    )
    got_b = infonce_loss(np.array([1.0, 0.0, 0.0, 0.0]), k, uniform_negs, 0.25)
    assert abs(got_b - math.log(4.0)) <= 1e-6

    got_c = infonce_loss(q, q, orth, 0.05)
    want_c = math.log1p(2.0 * math.exp(-20.0))
    assert abs(got_c - want_c) <= 1e-6

    print(
        f"[criterion 3] PASS — ln(1+2/e)={got_a:.12f}, ln(4)={got_b:.12f}, "
        f"sharp tau={got_c:.3e} (all within 1e-6)"
    )


# --- criterion 4: alignment vs an exhaustive scorer ------------------------------


def test_criterion_4_alignment_matches_exhaustive_oracle():
    rng = np.random.default_rng(4242)
    S = random_units(rng, 100, 8)
    T = random_units(rng, 100, 8)
    cfg = SearchConfig(k=4, margin_kind="ratio")

    got_idx, got_score = align(S, T, cfg)

    # oracle: score all 100 x 100 candidates directly
    cross = np.clip(S @ T.T, -1.0, 1.0)
    fwd = np.take_along_axis(cross, np.argsort(-cross, axis=1, kind="stable")[:, :4], axis=1)
    back = cross.T
    bwd = np.take_along_axis(back, np.argsort(-back, axis=1, kind="stable")[:, :4], axis=1)
    dx = fwd.sum(axis=1) / 8.0
    dy = bwd.sum(axis=1) / 8.0
    scores = cross / (dx[:, None] + dy[None, :])
    want_idx = scores.argmax(axis=1)
    want_score = scores[np.arange(100), want_idx]

    assert np.array_equal(got_idx, want_idx)
    max_dev = float(np.abs(got_score - want_score).max())
    assert max_dev <= 1e-9

    got_err = xsim_error_rate(S, T, cfg)
    want_err = 100.0 * float((want_idx != np.arange(100)).mean())
    assert got_err == want_err

    print(
        f"[criterion 4] PASS — 100x100 argmaxes exact, max score deviation "
        f"{max_dev:.2e} (<= 1e-9), error rate {got_err:.2f}% both routes"
    )


# --- criterion 5: distillation reaches low held-out error ------------------------


def test_criterion_5_distillation_quality(student_init, held_eval, co_run, cf_run):
    co_result, co_seconds = co_run
    cf_result, cf_seconds = cf_run
    err_init = held_eval(student_init)
    err_co = held_eval(co_result.student)
    err_cf = held_eval(cf_result.student)

    assert err_init >= 50.0
    assert err_co <= 5.0
    assert err_cf <= 5.0
    assert co_seconds + cf_seconds < 300.0

    print(
        f"[criterion 5] PASS — held-out error init {err_init:.1f}% >= 50%, "
        f"queue {err_co:.1f}% and filtered {err_cf:.1f}% <= 5%; "
        f"training {co_seconds:.1f}s + {cf_seconds:.1f}s (< 300s)"
    )


# --- criterion 6: queue vs in-batch comparison, deterministic completion ---------


def test_criterion_6_queue_vs_in_batch(
    train_corpus, teacher, student_init, held_eval, co_run, ib_run
):
    co_result, _ = co_run
    ib_result, _ = ib_run
    co_again = train_distill(
        train_corpus, teacher, distill_config(), student_init=student_init
    )
    ib_again = train_distill(
        train_corpus,
        teacher,
        distill_config(negatives_source="in_batch"),
        student_init=student_init,
    )
    assert np.array_equal(co_result.student.weights, co_again.student.weights)
    assert np.array_equal(ib_result.student.weights, ib_again.student.weights)

    err_co = held_eval(co_result.student)
    err_ib = held_eval(ib_result.student)
    print(
        f"[criterion 6] PASS — both modes rerun bitwise-identically; "
        f"queue negatives: error {err_co:.1f}%, final loss "
        f"{co_result.epoch_losses[-1]:.4f} | in-batch negatives: error "
        f"{err_ib:.1f}%, final loss {ib_result.epoch_losses[-1]:.4f}"
    )


# --- criterion 7: length batching concentrates high similarity -------------------


def test_criterion_7_shuffle_off_concentrates_similar_targets(cipher_spec, teacher):
    report = []
    for seed in (21, 22, 23):
        targets = [t for _, t in gen_cipher_corpus(cipher_spec, 3000, seed=seed)]
        fraction = {}
        for shuffle in (False, True):
            cfg = TrainConfig(
                queue_size=512, batch_size=32, shuffle=shuffle, rng_seed=seed
            )
            values = similarity_values(targets, teacher, cfg)
            fraction[shuffle] = float((values > 0.4).mean())
        assert fraction[False] > fraction[True]
        report.append(f"seed {seed}: {fraction[False]:.4f} > {fraction[True]:.4f}")
    print(
        "[criterion 7] PASS — share of queue similarities above 0.4, "
        "length-batched vs shuffled: " + "; ".join(report)
    )


# --- criterion 8: kept fraction grows with the threshold --------------------------


def test_criterion_8_kept_fraction_monotone_in_threshold(
    train_corpus, held_corpus, teacher, search_cfg
):
    cfg = distill_config(epochs=1, shuffle=False)
    sigmas = [0.5, 0.7, 0.9, 1.5]
    rows = threshold_sweep(
        train_corpus[:2000], teacher, cfg, sigmas, held_corpus, search_cfg
    )
    kept = [r.kept_fraction for r in rows]
    assert all(math.isfinite(k) for k in kept)
    assert all(lo <= hi for lo, hi in zip(kept, kept[1:]))
    assert kept[-1] == 1.0
    pairs = ", ".join(f"sigma {s:g}: {k:.4f}" for s, k in zip(sigmas, kept))
    print(f"[criterion 8] PASS — kept fraction non-decreasing ({pairs}); 1.5 keeps all")


# --- criterion 9: margin scores expose injected noise ----------------------------


def test_criterion_9_noise_sinks_to_the_bottom(cipher_spec, teacher, search_cfg, co_run):
    student = co_run[0].student
    clean = gen_cipher_corpus(cipher_spec, 1200, seed=31)
    noisy = inject_noise(clean, rate=0.30, seed=32)
    scored = score_corpus(noisy.pairs, student, teacher, search_cfg)

    order = np.argsort([-p.score for p in scored], kind="stable")
    n_noise = noisy.noise_count
    bottom = set(order[-n_noise:].tolist())
    noise_idx = set(np.flatnonzero(noisy.labels).tolist())
    hits = len(bottom & noise_idx)
    assert hits >= 0.8 * n_noise

    rng = np.random.default_rng(99)
    for _ in range(1000):
        budget = int(rng.integers(0, 3000))
        subset = select_by_token_budget(scored, budget)
        assert sum(p.target_tokens for p in subset) <= budget

    print(
        f"[criterion 9] PASS — {hits}/{n_noise} injected misalignments in the "
        f"bottom {n_noise} scores ({100.0 * hits / n_noise:.1f}% >= 80%); "
        f"1000/1000 budget draws within budget"
    )


# --- criterion 10: bitwise reproducibility ----------------------------------------


def test_criterion_10_reproducibility(cipher_spec, teacher, tmp_path):
    from bitextkit.encoder import save_encoder

    pairs = gen_cipher_corpus(cipher_spec, 1000, seed=41)
    cfg = distill_config(epochs=2, queue_size=128, prefilter_enabled=True)
    run1 = train_distill(pairs, teacher, cfg)
    run2 = train_distill(pairs, teacher, cfg)
    assert np.array_equal(run1.student.weights, run2.student.weights)
    assert run1.log_lines == run2.log_lines
    student_a, student_b = tmp_path / "a.emb", tmp_path / "b.emb"
    save_encoder(run1.student, student_a)
    save_encoder(run2.student, student_b)
    assert student_a.read_bytes() == student_b.read_bytes()

    targets = [t for _, t in pairs[:500]]
    hist_cfg = TrainConfig(queue_size=128, batch_size=32, rng_seed=3)
    hist_a, hist_b = tmp_path / "h1.csv", tmp_path / "h2.csv"
    write_histogram_csv(hist_a, similarity_distribution(targets, teacher, hist_cfg), True)
    write_histogram_csv(hist_b, similarity_distribution(targets, teacher, hist_cfg), True)
    assert hist_a.read_bytes() == hist_b.read_bytes()

    eval_pairs = gen_cipher_corpus(cipher_spec, 100, seed=42)
    sweep_cfg = distill_config(epochs=1, queue_size=128)
    rows1 = threshold_sweep(pairs[:500], teacher, sweep_cfg, [0.7, 1.5], eval_pairs)
    rows2 = threshold_sweep(pairs[:500], teacher, sweep_cfg, [0.7, 1.5], eval_pairs)
    assert rows1 == rows2
    sweep_a, sweep_b = tmp_path / "s1.csv", tmp_path / "s2.csv"
    write_sweep_csv(sweep_a, rows1)
    write_sweep_csv(sweep_b, rows2)
    assert sweep_a.read_bytes() == sweep_b.read_bytes()

    rng = np.random.default_rng(7)
    emb_a, emb_b = tmp_path / "m1.emb", tmp_path / "m2.emb"
    write_embeddings(emb_a, rng.normal(size=(13, 5)))
    write_embeddings(emb_b, read_embeddings(emb_a))
    assert emb_a.read_bytes() == emb_b.read_bytes()

    fifo_cases = 0
    rng = np.random.default_rng(10)
    for _ in range(1000):
        capacity = int(rng.integers(1, 9))
        dim = int(rng.integers(2, 5))
        queue = NegativeQueue.empty(capacity, dim)
        oracle: list = []
        for _ in range(int(rng.integers(1, 6))):
            rows = random_units(rng, int(rng.integers(1, 7)), dim)
            queue = queue_update(queue, rows)
            oracle.extend(rows.tolist())
            oracle = oracle[-capacity:]
            assert queue.entries.tolist() == oracle
        fifo_cases += 1

    print(
        "[criterion 10] PASS — training, histogram CSV, sweep CSV, and "
        f"embedding files byte-identical across reruns; FIFO law held on "
        f"{fifo_cases} random queue histories"
    )
