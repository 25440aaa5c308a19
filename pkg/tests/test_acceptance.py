"""Acceptance gate: ten property-based criteria, one pass/fail line each.

Run with `pytest -v -s tests/test_acceptance.py` to see the per-criterion
lines; each test also asserts, so the suite fails loudly on any violation.
"""

import time

import numpy as np
import pytest

from kda_lab import (ChunkPlan, GateSequence, StateMatrix, VariantKind,
                     chunk_forward, crossover_length, dplr_chunk_forward,
                     fd_check, flops_attn, flops_kda, gen_mqar, gen_palindrome,
                     gen_stack, kda_as_dplr, kv_cache_ratio, matmul_census,
                     mqar_instance, palindrome_instance, parallel_forward,
                     random_instance, recurrent_forward, state_norm_bound,
                     wy_verify_propositions)
from kda_lab.backward import squared_loss
from kda_lab.tasks import IGNORE, replay_mqar, replay_palindrome, replay_stack
from kda_lab.train import TrainConfig, train_toy


def _report(num, desc, ok):
    print(f"criterion {num:2d} [{'PASS' if ok else 'FAIL'}] {desc}")
    assert ok, f"criterion {num} failed: {desc}"


def test_criterion_1_oracle_equivalence():
    t0 = time.time()
    Ts, Cs, ds = (16, 64, 128, 256), (4, 16, 64), (8, 32, 64, 128)
    combos = [(T, C, d) for T in Ts for C in Cs for d in ds]
    worst = 0.0
    for i in range(200):
        T, C, d = combos[i % len(combos)]
        rng = np.random.default_rng(i)
        seq, gates = random_instance(rng, T, d, d)
        s0 = StateMatrix(rng.standard_normal((d, d)))
        o_rec, s_rec = recurrent_forward(VariantKind.KDA, seq, gates, s0)
        o_chk, s_chk = chunk_forward(seq, gates, s0, ChunkPlan.for_length(T, C))
        worst = max(worst, float(np.max(np.abs(o_rec - o_chk))),
                    float(np.max(np.abs(s_rec.s - s_chk.s))))
    elapsed = time.time() - t0
    ok = worst < 1e-9 and elapsed < 120
    _report(1, f"chunkwise vs recurrent, 200 instances: max err {worst:.2e} "
               f"(<1e-9), {elapsed:.1f}s (<120s)", ok)


def test_criterion_2_three_way_agreement():
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        T = int(rng.integers(8, 65))
        seq, gates = random_instance(rng, T, 16, 16)
        o_rec, _ = recurrent_forward(VariantKind.KDA, seq, gates, None)
        o_chk, _ = chunk_forward(seq, gates, None, ChunkPlan.for_length(T, 16))
        o_par = parallel_forward(VariantKind.KDA, seq, gates)
        worst = max(worst, float(np.max(np.abs(o_rec - o_chk))),
                    float(np.max(np.abs(o_rec - o_par))))
    _report(2, f"recurrent == chunkwise == parallel, 50 seeds, T<=64: "
               f"max err {worst:.2e} (<1e-9)", worst < 1e-9)


def test_criterion_3_wy_propositions():
    worst, base_exact = 0.0, True
    for seed in range(100):
        rng = np.random.default_rng(seed)
        C = (4, 8, 16)[seed % 3]
        seq, gates = random_instance(rng, C, 8, 8)
        for r in (1, max(1, C // 2), C):
            rep = wy_verify_propositions(seq.k, seq.v, gates.beta,
                                         gates.log_alpha, r)
            if r == 1:
                base_exact &= rep["p_err"] == 0.0 and rep["h_err"] == 0.0
            else:
                worst = max(worst, rep["p_err"], rep["h_err"])
    ok = worst < 1e-10 and base_exact
    _report(3, f"compact-form propositions, 100 seeds, C<=16: max err "
               f"{worst:.2e} (<1e-10), base case r=1 exact={base_exact}", ok)


def test_criterion_4_reduction_chain():
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        T, d = int(rng.integers(8, 49)), 8
        seq, gates = random_instance(rng, T, d, d)
        s0 = StateMatrix(rng.standard_normal((d, d)))

        ones = GateSequence(log_alpha=np.zeros_like(gates.log_alpha),
                            beta=gates.beta)
        o1, _ = recurrent_forward(VariantKind.KDA, seq, ones, s0)
        o2, _ = recurrent_forward(VariantKind.DELTANET, seq, ones, s0)
        worst = max(worst, float(np.max(np.abs(o1 - o2))))

        const = GateSequence(log_alpha=np.repeat(gates.log_alpha[:, :1], d, axis=1),
                             beta=gates.beta)
        o3, _ = recurrent_forward(VariantKind.KDA, seq, const, s0)
        o4, _ = recurrent_forward(VariantKind.GDN, seq, const, s0)
        worst = max(worst, float(np.max(np.abs(o3 - o4))))

        seq2, dgates = kda_as_dplr(seq, gates)
        o5, _ = recurrent_forward(VariantKind.KDA, seq, gates, s0)
        o6, _ = recurrent_forward(VariantKind.DPLR, seq2, dgates, s0)
        worst = max(worst, float(np.max(np.abs(o5 - o6))))
    _report(4, f"reduction chain (DeltaNet/GDN/DPLR substitution), 100 seeds: "
               f"max err {worst:.2e} (<1e-12)", worst < 1e-12)


def test_criterion_5_gradient_check():
    loss, loss_grad = squared_loss()
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        T, d = int(rng.integers(4, 33)), int(rng.integers(3, 17))
        seq, gates = random_instance(rng, T, d, d)
        s0 = StateMatrix(0.2 * rng.standard_normal((d, d)))
        rep = fd_check(loss, loss_grad, seq, gates, s0, h=1e-5)
        worst = max(worst, rep["max_rel_err"])
    _report(5, f"analytic backward vs central differences, 50 instances: "
               f"max rel err {worst:.2e} (<1e-5)", worst < 1e-5)


def test_criterion_6_matmul_census():
    ok = True
    details = []
    for (T, C, d) in ((64, 16, 8), (256, 64, 16), (128, 32, 8)):
        c = matmul_census(T=T, C=C, d_k=d, d_v=d)
        diff = c["dplr_matmuls"] - c["kda_matmuls"]
        ok &= (c["dplr_score_matrices_per_chunk"] == 4
               and c["kda_score_matrices_per_chunk"] == 2
               and diff >= 3 * c["chunks"])
        details.append(f"T={T}: 4-vs-2 scores, matmul diff {diff}"
                       f">={3 * c['chunks']}")
    _report(6, "census " + "; ".join(details), ok)


def test_criterion_7_cost_model():
    checks = {
        "flops_kda(64,64,128)=8126464": flops_kda(64, 64, 128) == 8126464,
        "flops_attn(64,128)=1048576": flops_attn(64, 128) == 1048576,
        "crossover(64,128)=497": crossover_length(64, 128) == 497,
        "kv_cache_ratio(3:1)=1/4": kv_cache_ratio((3, 1)) == 0.25,
    }
    _report(7, "cost model exact: " + ", ".join(checks), all(checks.values()))


def test_criterion_8_synthetic_tasks():
    # worked examples, verbatim layouts
    ids = {c: i + 1 for i, c in enumerate("OGRSUNE")}
    pal = palindrome_instance([ids[c] for c in "OGRSUNE"], vocab=9)
    pal_ok = (pal.tokens.tolist()
              == [ids[c] for c in "OGRSUNE"] + [0] + [ids[c] for c in "ENUSRGO"]
              and pal.targets.tolist()
              == [IGNORE] * 8 + [ids[c] for c in "NUSRGO"] + [IGNORE])

    mq_ids = {s: i + 1 for i, s in enumerate("A1C3B0M8G5E4")}
    pairs = [(mq_ids[a], mq_ids[b]) for a, b in
             (("A", "1"), ("C", "3"), ("B", "0"), ("M", "8"), ("G", "5"),
              ("E", "4"))]
    mq = mqar_instance(pairs, [mq_ids["B"], mq_ids["G"]], vocab=16)
    mq_ok = (mq.targets.tolist()
             == [IGNORE] * 13 + [mq_ids["0"], mq_ids["5"]])

    # replay oracles on 10k random instances per task
    agree = True
    for seed in range(10000):
        rng = np.random.default_rng(seed)
        p = gen_palindrome(int(rng.integers(1, 17)), 32, seed)
        agree &= bool(np.array_equal(replay_palindrome(p), p.targets))
        n_pairs = int(rng.integers(1, 9))
        m = gen_mqar(n_pairs, int(rng.integers(1, n_pairs + 1)), 32, seed)
        agree &= bool(np.array_equal(replay_mqar(m), m.targets))
        s = gen_stack(4, int(rng.integers(1, 25)), 32, seed)
        agree &= bool(np.array_equal(replay_stack(s, 4), s.targets))
        if not agree:
            break
    ok = pal_ok and mq_ok and agree
    _report(8, f"worked examples verbatim (palindrome={pal_ok}, mqar={mq_ok}); "
               f"replay oracles 10k/task agree={agree}", ok)


def test_criterion_9_toy_trainability():
    t0 = time.time()
    pool = [gen_mqar(4, 2, 32, 1000 + i) for i in range(128)]
    cfg = TrainConfig(d=32, d_k=32, d_v=32, lr=1e-2, steps=800, batch_size=8,
                      seed=0, optimizer="adam", log_every=25)
    res = train_toy(pool, cfg)
    res_again = train_toy(pool, cfg)
    deterministic = res["curve"] == res_again["curve"]
    half_step = next((s for s, l, _ in res["curve"]
                      if l <= 0.5 * res["initial_loss"]), None)
    halved = half_step is not None and half_step < 5000

    inst = gen_mqar(4, 2, 32, 7)
    cfg2 = TrainConfig(d=32, d_k=32, d_v=32, lr=1e-2, steps=600, batch_size=1,
                       seed=0, optimizer="adam", log_every=25)
    res2 = train_toy([inst], cfg2)
    over_step = next((s for s, l, _ in res2["curve"] if l < 0.1), None)
    overfit = over_step is not None and over_step < 2000
    elapsed = time.time() - t0
    ok = halved and overfit and deterministic and elapsed < 300
    _report(9, f"loss halved by step {half_step} (<5000); overfit <0.1 by step "
               f"{over_step} (<2000); deterministic={deterministic}; "
               f"{elapsed:.0f}s (<300s)", ok)


def test_criterion_10_stability_bound():
    ok = True
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        T, d = int(rng.integers(4, 33)), int(rng.integers(2, 13))
        seq, gates = random_instance(rng, T, d, d)
        bound = state_norm_bound(seq, gates)
        _, _, states = recurrent_forward(VariantKind.KDA, seq, gates, None,
                                         return_states=True)
        ok &= all(np.linalg.norm(s) <= bound + 1e-10 for s in states)
        if not ok:
            break
    _report(10, "||S_t||_F <= ||S_0||_F + sum beta_t ||v_t||, 1000 normalized "
                f"instances, every step: {ok}", ok)
