"""Chunkwise forward for the general diagonal-plus-low-rank transition.

The per-token transition is Diag(alpha_t) - a_t b_t^T with a plain k v^T
write.  The chunk algebra mirrors the gated-delta chunkwise path but needs
four secondary score matrices per chunk (q-k, q-a, b-a, b-k interactions)
instead of two, plus extra matrix products in the output and state updates.
That structural gap is what matmul_census measures.
"""

from __future__ import annotations

import numpy as np

from . import tensor
from .chunkwise import _decayed_gram, chunk_forward
from .errors import ContractError
from .seqs import (AttnSequence, ChunkPlan, DplrGateSequence, GateSequence,
                   StateMatrix, random_instance, random_dplr_gates)


def _pad_dplr(seq: AttnSequence, gates: DplrGateSequence, plan: ChunkPlan):
    if plan.padded_len != seq.T + plan.pad:
        raise ContractError("plan does not match sequence length")
    if plan.pad == 0:
        return seq, gates
    dt = tensor.dtype()
    zk = np.zeros((plan.pad, seq.d_k), dtype=dt)
    zv = np.zeros((plan.pad, seq.d_v), dtype=dt)
    seq_p = AttnSequence(q=np.vstack([seq.q, zk]), k=np.vstack([seq.k, zk]),
                         v=np.vstack([seq.v, zv]))
    gates_p = DplrGateSequence(
        log_alpha=np.vstack([gates.log_alpha, np.zeros_like(zk)]),
        a=np.vstack([gates.a, zk]),
        b=np.vstack([gates.b, zk]),
    )
    return seq_p, gates_p


def dplr_chunk_forward(seq: AttnSequence, gates: DplrGateSequence,
                       s0: StateMatrix | None, plan: ChunkPlan):
    """Chunkwise DPLR forward; matches the token-by-token DPLR reference.

    Per chunk, with cumulative log-decay gc (and gp = gc minus the current
    step, i.e. decay up to the previous position):

      A_qk[r,j] = q_r . (k_j * exp(gc_r - gc_j))   r >= j
      A_qa[r,j] = q_r . (a_j * exp(gc_r - gc_j))   r >= j
      S_ab[r,i] = b_r . (a_i * exp(gp_r - gc_i))   r > i
      S_ak[r,i] = b_r . (k_i * exp(gp_r - gc_i))   r > i

    W = (I+S_ab)^-1 (gp-decayed b),  U = (I+S_ab)^-1 (S_ak V); the low-rank
    correction rows are then a_i (u_i + w_i^T S)^T, decayed to the chunk end
    for the state update.  The right-hand side of the state update uses the
    chunk-entry state, never the partially updated one.
    """
    if gates.T != seq.T:
        raise ContractError("gate length does not match sequence length")
    seq_p, gates_p = _pad_dplr(seq, gates, plan)
    T_pad, d_k, d_v = seq_p.T, seq_p.d_k, seq_p.d_v
    C = plan.C

    s = np.zeros((d_k, d_v), dtype=tensor.dtype()) if s0 is None else s0.s.copy()
    out = np.zeros((T_pad, d_v), dtype=tensor.dtype())

    for n in range(plan.NT):
        sl = slice(n * C, (n + 1) * C)
        q_c, k_c, v_c = seq_p.q[sl], seq_p.k[sl], seq_p.v[sl]
        a_c, b_c = gates_p.a[sl], gates_p.b[sl]
        g_c = gates_p.log_alpha[sl]
        gc = np.cumsum(g_c, axis=0)
        gp = gc - g_c  # decay up to the previous position

        aqk = _decayed_gram(q_c, k_c, gc, gc, strict=False)
        aqa = _decayed_gram(q_c, a_c, gc, gc, strict=False)
        sab = _decayed_gram(b_c, a_c, gp, gc, strict=True)
        sak = _decayed_gram(b_c, k_c, gp, gc, strict=True)

        inv = tensor.tril_inverse_unit(np.eye(C, dtype=tensor.dtype()) + sab)
        w = tensor.matmul(inv, np.exp(gp) * b_c)
        u = tensor.matmul(inv, tensor.matmul(sak, v_c))

        pseudo = u + tensor.matmul(w, s)
        out[sl] = (tensor.matmul(q_c * np.exp(gc), s)
                   + tensor.matmul(aqk, v_c)
                   - tensor.matmul(aqa, pseudo))
        end_decay = np.exp(gc[-1] - gc)
        s = np.exp(gc[-1])[:, None] * s
        s = s + tensor.matmul((end_decay * k_c).T, v_c)
        s = s - tensor.matmul((end_decay * a_c).T, pseudo)

    return out[:seq.T], StateMatrix(s)


def matmul_census(T: int, C: int, d_k: int, d_v: int, seed: int = 0) -> dict:
    """Instrumented comparison of chunkwise DPLR vs gated-delta matmul work.

    Runs both kernels on same-size random instances and reports total matmul
    calls plus secondary score-matrix constructions per chunk.
    """
    rng = np.random.default_rng(seed)
    plan = ChunkPlan.for_length(T, C)
    seq, kda_gates = random_instance(rng, T, d_k, d_v)
    dplr_gates = random_dplr_gates(rng, T, d_k)

    tensor.reset_counters()
    dplr_chunk_forward(seq, dplr_gates, None, plan)
    dplr_counts = tensor.counter_totals()

    tensor.reset_counters()
    chunk_forward(seq, kda_gates, None, plan)
    kda_counts = tensor.counter_totals()
    tensor.reset_counters()

    return {
        "T": T, "C": C, "d_k": d_k, "d_v": d_v, "chunks": plan.NT,
        "dplr_matmuls": dplr_counts["matmul"],
        "kda_matmuls": kda_counts["matmul"],
        "dplr_score_matrices_per_chunk": dplr_counts["score_matrices"] // plan.NT,
        "kda_score_matrices_per_chunk": kda_counts["score_matrices"] // plan.NT,
    }
