"""Chunkwise-parallel forward for the fine-grained gated delta rule.

Length T is split into chunks of size C.  Within a chunk the cumulative
product of rank-1-modified transitions is compressed into a compact (WY)
form whose auxiliary row recurrences are solved in one shot by a triangular
inverse (the UT transform); across chunks a short sequential sweep carries
the state.

All within-chunk decay ratios are assembled positionwise as exp(g_i - g_j)
restricted to i >= j, which is always <= 1 for non-positive log-decays.  A
literal "divide by the cumulative decay" matrix is never formed, so the
clamped-gate regime (per-step log-decay >= -8, C <= 64) stays stable without
secondary chunking.

Two-phase contract: wy_factors for all chunks is embarrassingly parallel
(phase one); only the state sweep in chunk_forward is sequential (phase two).
Correctness does not depend on phase-one execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor
from .errors import ContractError
from .seqs import AttnSequence, ChunkPlan, GateSequence, StateMatrix, pad_for_plan


@dataclass
class ChunkScratch:
    """Per-chunk intermediates retained for verification (opt-in)."""

    gamma_cum: np.ndarray  # C x d_k cumulative log-decay within the chunk
    m_ut: np.ndarray       # C x C triangular-inverse-times-Diag(beta) matrix
    w: np.ndarray          # C x d_k auxiliary rows
    u: np.ndarray          # C x d_v auxiliary rows


def _decayed_gram(left: np.ndarray, right: np.ndarray, g_left: np.ndarray,
                  g_right: np.ndarray, strict: bool) -> np.ndarray:
    """Score matrix A[r, j] = left_r . (right_j * exp(g_left_r - g_right_j)).

    Only entries with r > j (strict) or r >= j are filled; exponents there are
    non-positive by the cumulative-decay ordering, so no overflow can occur.
    Counts as one secondary chunk score-matrix construction.
    """
    C = left.shape[0]
    out = np.zeros((C, C), dtype=tensor.dtype())
    for j in range(C):
        lo = j + 1 if strict else j
        if lo >= C:
            continue
        decayed = right[j] * np.exp(g_left[lo:] - g_right[j])
        out[lo:, j] = np.sum(decayed * left[lo:], axis=1)
    tensor.count_score_matrix()
    return out


def wy_factors(chunk_k: np.ndarray, chunk_v: np.ndarray, chunk_beta: np.ndarray,
               gamma_cum: np.ndarray):
    """Compact-form factors (W, U, M) for one chunk.

    M = (I + StrictTril(Diag(beta) (G*K)(K/G)^T))^-1 Diag(beta), where G is
    the cumulative within-chunk decay; W = M (G*K) and U = M V.  Row r of
    W/U satisfies the scalar auxiliary recurrences that the compact state
    form requires.
    """
    C = chunk_k.shape[0]
    akk = _decayed_gram(chunk_k, chunk_k, gamma_cum, gamma_cum, strict=True)
    akk = chunk_beta[:, None] * akk
    inv = tensor.tril_inverse_unit(np.eye(C, dtype=tensor.dtype()) + akk)
    m_ut = inv * chunk_beta[None, :]
    w = tensor.matmul(m_ut, np.exp(gamma_cum) * chunk_k)
    u = tensor.matmul(m_ut, chunk_v)
    return w, u, m_ut


def chunk_forward(seq: AttnSequence, gates: GateSequence,
                  s0: StateMatrix | None, plan: ChunkPlan,
                  keep_scratch: bool = False):
    """Chunkwise-parallel forward; equivalent to the recurrent reference.

    Returns (outputs, final_state) or (outputs, final_state, scratch_trace)
    when ``keep_scratch`` is set.
    """
    if gates.T != seq.T:
        raise ContractError("gate length does not match sequence length")
    seq_p, gates_p = pad_for_plan(seq, gates, plan)
    T_pad, d_k, d_v = seq_p.T, seq_p.d_k, seq_p.d_v
    C = plan.C

    s = np.zeros((d_k, d_v), dtype=tensor.dtype()) if s0 is None else s0.s.copy()
    out = np.zeros((T_pad, d_v), dtype=tensor.dtype())
    trace = [] if keep_scratch else None

    for n in range(plan.NT):
        sl = slice(n * C, (n + 1) * C)
        q_c, k_c, v_c = seq_p.q[sl], seq_p.k[sl], seq_p.v[sl]
        beta_c = gates_p.beta[sl]
        gc = np.cumsum(gates_p.log_alpha[sl], axis=0)

        w, u, m_ut = wy_factors(k_c, v_c, beta_c, gc)
        aqk = _decayed_gram(q_c, k_c, gc, gc, strict=False)

        pseudo_v = u - tensor.matmul(w, s)
        out[sl] = tensor.matmul(q_c * np.exp(gc), s) + tensor.matmul(aqk, pseudo_v)
        s = np.exp(gc[-1])[:, None] * s
        s = s + tensor.matmul((np.exp(gc[-1] - gc) * k_c).T, pseudo_v)
        if keep_scratch:
            trace.append(ChunkScratch(gamma_cum=gc, m_ut=m_ut, w=w, u=u))

    outputs = out[:seq.T]
    final = StateMatrix(s)
    if keep_scratch:
        return outputs, final, trace
    return outputs, final


def _explicit_transition_sweep(chunk_k, chunk_v, chunk_beta, log_alpha, r):
    """Brute-force cumulative product P_r and write accumulation H_r.

    Applies each step's decay and rank-1 correction literally; O(r * d_k^3)
    and only meant for small chunks.
    """
    d_k = chunk_k.shape[1]
    d_v = chunk_v.shape[1]
    p = np.eye(d_k, dtype=tensor.dtype())
    h = np.zeros((d_k, d_v), dtype=tensor.dtype())
    for j in range(r):
        k, v, beta = chunk_k[j], chunk_v[j], chunk_beta[j]
        alpha = np.exp(log_alpha[j])
        p = alpha[:, None] * p
        p = p - np.outer(k, beta * (k @ p))
        h = alpha[:, None] * h
        h = h - np.outer(k, beta * (k @ h))
        h = h + np.outer(k, beta * v)
    return p, h


def _wy_rows_reference(chunk_k, chunk_v, chunk_beta, gamma_cum, r):
    """Auxiliary rows w_i, u_i straight from their scalar recurrences."""
    d_k = chunk_k.shape[1]
    d_v = chunk_v.shape[1]
    w = np.zeros((r, d_k), dtype=tensor.dtype())
    u = np.zeros((r, d_v), dtype=tensor.dtype())
    for i in range(r):
        acc_w = np.exp(gamma_cum[i]) * chunk_k[i]
        acc_u = chunk_v[i].copy()
        for j in range(i):
            coupling = chunk_k[j] @ (np.exp(gamma_cum[i] - gamma_cum[j]) * chunk_k[i])
            acc_w = acc_w - w[j] * coupling
            acc_u = acc_u - u[j] * coupling
        w[i] = chunk_beta[i] * acc_w
        u[i] = chunk_beta[i] * acc_u
    return w, u


def wy_verify_propositions(chunk_k, chunk_v, chunk_beta, log_alpha, r: int) -> dict:
    """Compare the compact (WY) forms of P_r and H_r against explicit products.

    Report-only: returns max abs errors for the cumulative transition product
    (p_err) and the accumulated write term (h_err).  Requires r <= C <= 16
    because the explicit sweep is cubic in d_k per step.
    """
    C = chunk_k.shape[0]
    if not (1 <= r <= C <= 16):
        raise ContractError("propositions check requires 1 <= r <= C <= 16")
    gc = np.cumsum(np.asarray(log_alpha, dtype=tensor.dtype()), axis=0)
    p_ref, h_ref = _explicit_transition_sweep(chunk_k, chunk_v, chunk_beta,
                                              log_alpha, r)
    w, u = _wy_rows_reference(chunk_k, chunk_v, chunk_beta, gc, r)
    p_wy = np.diag(np.exp(gc[r - 1]))
    h_wy = np.zeros_like(h_ref)
    for i in range(r):
        decay = np.exp(gc[r - 1] - gc[i])
        p_wy = p_wy - np.outer(decay * chunk_k[i], w[i])
        h_wy = h_wy + np.outer(decay * chunk_k[i], u[i])
    return {
        "r": r,
        "p_err": float(np.max(np.abs(p_wy - p_ref))),
        "h_err": float(np.max(np.abs(h_wy - h_ref))),
    }
