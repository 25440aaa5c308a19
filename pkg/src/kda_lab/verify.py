"""Named verification suites: each returns machine-readable per-case reports.

A case dict carries an id, the instance parameters, the observed maximum
error, the threshold it was judged against, and an ok flag.  Suites are
deterministic per seed list and never mutate global state.
"""

from __future__ import annotations

import numpy as np

from . import tensor
from .chunkwise import chunk_forward, wy_factors, wy_verify_propositions, _wy_rows_reference
from .dplr import dplr_chunk_forward, matmul_census
from .errors import ContractError
from .parallel import parallel_forward, positional_form_check, rope_relative_check
from .recurrent import kda_as_dplr, recurrent_forward
from .seqs import (ChunkPlan, GateSequence, StateMatrix, VariantKind,
                   random_instance, random_dplr_gates)

SUITES = ("equivalence", "wy", "ut", "dplr", "parallel", "positional", "all")

EQ_TOL = 1e-9
RED_TOL = 1e-12
WY_TOL = 1e-10
UT_TOL = 1e-12


def _case(cid, err, tol, **params):
    return {"id": cid, "max_err": float(err), "threshold": tol,
            "ok": bool(err < tol), **params}


def _max_abs(a, b):
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def suite_equivalence(seeds, sizes=None):
    """Chunkwise == recurrent, plus the variant reduction chain."""
    sizes = sizes or [(16, 4, 8), (64, 16, 32), (128, 64, 64), (96, 16, 16)]
    cases = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        T, C, d = sizes[seed % len(sizes)]
        seq, gates = random_instance(rng, T, d, d)
        s0 = StateMatrix(rng.standard_normal((d, d)).astype(tensor.dtype()))
        plan = ChunkPlan.for_length(T, C)
        o_rec, s_rec = recurrent_forward(VariantKind.KDA, seq, gates, s0)
        o_chk, s_chk = chunk_forward(seq, gates, s0, plan)
        err = max(_max_abs(o_rec, o_chk), _max_abs(s_rec.s, s_chk.s))
        cases.append(_case(f"chunkwise-{seed}", err, EQ_TOL, T=T, C=C, d=d, seed=seed))

        # alpha == 1 collapses the gated rule onto the plain delta rule
        ones = GateSequence(log_alpha=np.zeros_like(gates.log_alpha), beta=gates.beta)
        o_kda, _ = recurrent_forward(VariantKind.KDA, seq, ones, s0)
        o_dn, _ = recurrent_forward(VariantKind.DELTANET, seq, ones, s0)
        cases.append(_case(f"deltanet-{seed}", _max_abs(o_kda, o_dn), RED_TOL,
                           T=T, d=d, seed=seed))

        # channel-constant decay collapses onto the scalar-decay delta rule
        const = GateSequence(
            log_alpha=np.repeat(gates.log_alpha[:, :1], d, axis=1), beta=gates.beta)
        o_kda, _ = recurrent_forward(VariantKind.KDA, seq, const, s0)
        o_gdn, _ = recurrent_forward(VariantKind.GDN, seq, const, s0)
        cases.append(_case(f"gdn-{seed}", _max_abs(o_kda, o_gdn), RED_TOL,
                           T=T, d=d, seed=seed))

        # the diagonal-plus-low-rank substitution reproduces the gated rule
        o_kda, s_kda = recurrent_forward(VariantKind.KDA, seq, gates, s0)
        seq2, dgates = kda_as_dplr(seq, gates)
        o_dplr, s_dplr = recurrent_forward(VariantKind.DPLR, seq2, dgates, s0)
        err = max(_max_abs(o_kda, o_dplr), _max_abs(s_kda.s, s_dplr.s))
        cases.append(_case(f"dplr-subst-{seed}", err, RED_TOL, T=T, d=d, seed=seed))
    return cases


def suite_wy(seeds, C=16, d=8):
    """Compact-form propositions against explicit cumulative products."""
    cases = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        seq, gates = random_instance(rng, C, d, d)
        for r in (1, C // 2, C):
            rep = wy_verify_propositions(seq.k, seq.v, gates.beta,
                                         gates.log_alpha, r)
            err = max(rep["p_err"], rep["h_err"])
            tol = 0.0 if r == 1 else WY_TOL  # base case must be exact
            ok = err == 0.0 if r == 1 else err < WY_TOL
            cases.append({"id": f"wy-{seed}-r{r}", "max_err": err,
                          "threshold": tol, "ok": bool(ok),
                          "r": r, "C": C, "d": d, "seed": seed,
                          "p_err": rep["p_err"], "h_err": rep["h_err"]})
    return cases


def suite_ut(seeds, C=16, d=8):
    """Triangular-inverse path: inverse correctness and row-recurrence match."""
    cases = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        seq, gates = random_instance(rng, C, d, d)
        gc = np.cumsum(gates.log_alpha, axis=0)
        w, u, m_ut = wy_factors(seq.k, seq.v, gates.beta, gc)
        w_ref, u_ref = _wy_rows_reference(seq.k, seq.v, gates.beta, gc, C)
        err = max(_max_abs(w, w_ref), _max_abs(u, u_ref))
        cases.append(_case(f"ut-rows-{seed}", err, UT_TOL, C=C, d=d, seed=seed))

        lower = np.eye(C, dtype=tensor.dtype()) + np.tril(
            rng.standard_normal((C, C)), -1).astype(tensor.dtype())
        inv = tensor.tril_inverse_unit(lower)
        err = _max_abs(lower @ inv, np.eye(C))
        cases.append(_case(f"ut-inv-{seed}", err, UT_TOL, C=C, seed=seed))
    return cases


def suite_dplr(seeds, sizes=None):
    """Chunkwise DPLR against its token-by-token reference, plus the census."""
    sizes = sizes or [(32, 8, 8), (64, 16, 16), (96, 16, 8)]
    cases = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        T, C, d = sizes[seed % len(sizes)]
        seq, _ = random_instance(rng, T, d, d)
        dgates = random_dplr_gates(rng, T, d)
        s0 = StateMatrix(rng.standard_normal((d, d)).astype(tensor.dtype()))
        plan = ChunkPlan.for_length(T, C)
        o_rec, s_rec = recurrent_forward(VariantKind.DPLR, seq, dgates, s0)
        o_chk, s_chk = dplr_chunk_forward(seq, dgates, s0, plan)
        err = max(_max_abs(o_rec, o_chk), _max_abs(s_rec.s, s_chk.s))
        cases.append(_case(f"dplr-chunk-{seed}", err, EQ_TOL, T=T, C=C, d=d, seed=seed))

    census = matmul_census(T=128, C=16, d_k=8, d_v=8)
    structural_ok = (census["dplr_score_matrices_per_chunk"] == 4
                     and census["kda_score_matrices_per_chunk"] == 2
                     and census["dplr_matmuls"] - census["kda_matmuls"]
                     >= 3 * census["chunks"])
    cases.append({"id": "dplr-census", "ok": structural_ok, "max_err": 0.0,
                  "threshold": 0.0, **census})
    return cases


def suite_parallel(seeds, T=48, d=16):
    """Three-way agreement: recurrent == chunkwise == closed matrix form."""
    cases = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        seq, gates = random_instance(rng, T, d, d)
        for kind in (VariantKind.DELTANET, VariantKind.GDN, VariantKind.KDA):
            o_rec, _ = recurrent_forward(kind, seq, gates, None)
            o_par = parallel_forward(kind, seq, gates)
            err = _max_abs(o_rec, o_par)
            if kind is VariantKind.KDA:
                o_chk, _ = chunk_forward(seq, gates, None, ChunkPlan.for_length(T, 16))
                err = max(err, _max_abs(o_rec, o_chk))
            cases.append(_case(f"parallel-{kind.name.lower()}-{seed}", err,
                               EQ_TOL, T=T, d=d, seed=seed))
    return cases


def suite_positional(seeds, T=16, d=8):
    """Cumulative-product positional form and rotation composition checks."""
    cases = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        seq, gates = random_instance(rng, T, d, d)
        for kind in (VariantKind.GDN, VariantKind.KDA):
            rep = positional_form_check(seq, gates, kind)
            cases.append(_case(f"positional-{kind.name.lower()}-{seed}",
                               rep["max_abs_err"], EQ_TOL, T=T, d=d, seed=seed))
        theta = rng.uniform(0.01, 1.5, size=4)
        rep = rope_relative_check(theta, t=9, i=2)
        err = max(rep["split_err"], rep["compose_err"])
        cases.append(_case(f"rope-{seed}", err, UT_TOL, seed=seed))
    return cases


def run_suite(name: str, seeds) -> dict:
    """Run one named suite (or all of them) and merge the case reports."""
    seeds = list(seeds)
    if name not in SUITES:
        raise ContractError(f"unknown suite {name!r}; choose from {SUITES}")
    runners = {
        "equivalence": suite_equivalence,
        "wy": suite_wy,
        "ut": suite_ut,
        "dplr": suite_dplr,
        "parallel": suite_parallel,
        "positional": suite_positional,
    }
    names = list(runners) if name == "all" else [name]
    cases = []
    for n in names:
        cases.extend(runners[n](seeds))
    cases.sort(key=lambda c: c["id"])
    return {"suite": name, "n_cases": len(cases),
            "ok": all(c["ok"] for c in cases), "cases": cases}
