import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kda_lab import (ChunkPlan, ContractError, StateMatrix, VariantKind,
                     chunk_forward, random_instance, recurrent_forward,
                     wy_factors, wy_verify_propositions)
from kda_lab.chunkwise import _wy_rows_reference


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 70), st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_chunkwise_matches_recurrent(T, C, seed):
    rng = np.random.default_rng(seed)
    seq, gates = random_instance(rng, T, 6, 5)
    s0 = StateMatrix(rng.standard_normal((6, 5)))
    plan = ChunkPlan.for_length(T, C)
    o_rec, s_rec = recurrent_forward(VariantKind.KDA, seq, gates, s0)
    o_chk, s_chk = chunk_forward(seq, gates, s0, plan)
    np.testing.assert_allclose(o_chk, o_rec, atol=1e-9)
    np.testing.assert_allclose(s_chk.s, s_rec.s, atol=1e-9)


def test_chunk_size_one_equals_recurrent():
    rng = np.random.default_rng(1)
    seq, gates = random_instance(rng, 17, 4, 4)
    plan = ChunkPlan.for_length(17, 1)
    o_rec, _ = recurrent_forward(VariantKind.KDA, seq, gates, None)
    o_chk, _ = chunk_forward(seq, gates, None, plan)
    np.testing.assert_allclose(o_chk, o_rec, atol=1e-12)


def test_padding_is_noop():
    rng = np.random.default_rng(2)
    seq, gates = random_instance(rng, 21, 8, 8)  # pads 11 tokens at C=16
    s0 = StateMatrix(rng.standard_normal((8, 8)))
    o16, s16 = chunk_forward(seq, gates, s0, ChunkPlan.for_length(21, 16))
    o7, s7 = chunk_forward(seq, gates, s0, ChunkPlan.for_length(21, 7))
    assert o16.shape == (21, 8)
    np.testing.assert_allclose(o16, o7, atol=1e-10)
    np.testing.assert_allclose(s16.s, s7.s, atol=1e-10)


def test_scratch_trace_shapes():
    rng = np.random.default_rng(3)
    seq, gates = random_instance(rng, 32, 6, 4)
    plan = ChunkPlan.for_length(32, 8)
    out, final, trace = chunk_forward(seq, gates, None, plan, keep_scratch=True)
    assert len(trace) == 4
    for sc in trace:
        assert sc.w.shape == (8, 6) and sc.u.shape == (8, 4)
        assert sc.m_ut.shape == (8, 8) and sc.gamma_cum.shape == (8, 6)


def test_wy_factors_match_row_recurrence():
    rng = np.random.default_rng(4)
    seq, gates = random_instance(rng, 16, 8, 8)
    gc = np.cumsum(gates.log_alpha, axis=0)
    w, u, _ = wy_factors(seq.k, seq.v, gates.beta, gc)
    w_ref, u_ref = _wy_rows_reference(seq.k, seq.v, gates.beta, gc, 16)
    np.testing.assert_allclose(w, w_ref, atol=1e-12)
    np.testing.assert_allclose(u, u_ref, atol=1e-12)


def test_propositions_small_chunks():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        seq, gates = random_instance(rng, 16, 8, 8)
        for r in (1, 5, 16):
            rep = wy_verify_propositions(seq.k, seq.v, gates.beta,
                                         gates.log_alpha, r)
            if r == 1:
                assert rep["p_err"] == 0.0 and rep["h_err"] == 0.0
            else:
                assert rep["p_err"] < 1e-10 and rep["h_err"] < 1e-10


def test_propositions_reject_large_chunk():
    rng = np.random.default_rng(0)
    seq, gates = random_instance(rng, 32, 4, 4)
    with pytest.raises(ContractError):
        wy_verify_propositions(seq.k, seq.v, gates.beta, gates.log_alpha, 4)


def test_plan_validation():
    with pytest.raises(ContractError):
        ChunkPlan(C=0, NT=1, pad=0)
    with pytest.raises(ContractError):
        ChunkPlan(C=4, NT=2, pad=4)
    plan = ChunkPlan.for_length(10, 4)
    assert (plan.NT, plan.pad, plan.padded_len) == (3, 2, 12)
