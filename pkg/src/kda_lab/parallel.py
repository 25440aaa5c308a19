"""Closed-form parallel (matrix) oracles on small T, plus positional checks.

These build dense T x T score matrices, so they are restricted to short
sequences and a zero initial state.  They serve as a third, independent
route against the recurrent and chunkwise paths.
"""

from __future__ import annotations

import numpy as np

from . import tensor
from .errors import ContractError
from .recurrent import _scalar_decays, recurrent_forward
from .seqs import AttnSequence, GateSequence, StateMatrix, VariantKind

MAX_PARALLEL_T = 64


def _channelwise_scores(left: np.ndarray, right: np.ndarray, gc: np.ndarray,
                        strict: bool) -> np.ndarray:
    """A[t,j] = left_t . (right_j * exp(gc_t - gc_j)) on the causal triangle."""
    T = left.shape[0]
    out = np.zeros((T, T), dtype=tensor.dtype())
    for j in range(T):
        lo = j + 1 if strict else j
        if lo >= T:
            continue
        out[lo:, j] = np.sum(right[j] * np.exp(gc[lo:] - gc[j]) * left[lo:], axis=1)
    return out


def _scalar_decay_matrix(log_scalar: np.ndarray, strict: bool) -> np.ndarray:
    T = log_scalar.shape[0]
    gs = np.cumsum(log_scalar)
    out = np.zeros((T, T), dtype=tensor.dtype())
    for j in range(T):
        lo = j + 1 if strict else j
        if lo < T:
            out[lo:, j] = np.exp(gs[lo:] - gs[j])
    return out


def parallel_forward(kind: VariantKind, seq: AttnSequence,
                     gates: GateSequence | None) -> np.ndarray:
    """One-shot matrix-form outputs, zero initial state, T <= 64.

    The delta-rule family inverts I + (strictly masked, decayed key gram
    scaled by the write strengths); the inverse then hits the beta-scaled
    values, reproducing the recurrent outputs without any state sweep.
    """
    T = seq.T
    if T > MAX_PARALLEL_T:
        raise ContractError(f"parallel form limited to T <= {MAX_PARALLEL_T}")

    if kind is VariantKind.LA:
        return tensor.tril(seq.q @ seq.k.T) @ seq.v

    if gates is None:
        raise ContractError(f"{kind.name} parallel form requires gates")

    if kind is VariantKind.MAMBA2:
        decay = _scalar_decay_matrix(np.log(_scalar_decays(gates)), strict=False)
        score = tensor.tril(seq.q @ seq.k.T) * decay
        return score @ (gates.beta[:, None] * seq.v)

    if kind is VariantKind.GLA:
        gc = np.cumsum(gates.log_alpha, axis=0)
        return _channelwise_scores(seq.q, seq.k, gc, strict=False) @ seq.v

    if kind in (VariantKind.DELTANET, VariantKind.GDN, VariantKind.KDA):
        if kind is VariantKind.KDA:
            gc = np.cumsum(gates.log_alpha, axis=0)
            score = _channelwise_scores(seq.q, seq.k, gc, strict=False)
            gram = _channelwise_scores(seq.k, seq.k, gc, strict=True)
        elif kind is VariantKind.GDN:
            decay = _scalar_decay_matrix(np.log(_scalar_decays(gates)), strict=False)
            score = tensor.tril(seq.q @ seq.k.T) * decay
            gram = tensor.strict_tril(seq.k @ seq.k.T) * decay
        else:
            score = tensor.tril(seq.q @ seq.k.T)
            gram = tensor.strict_tril(seq.k @ seq.k.T)
        gram = gates.beta[:, None] * gram
        inv = tensor.tril_inverse_unit(np.eye(T, dtype=tensor.dtype()) + gram)
        return score @ inv @ (gates.beta[:, None] * seq.v)

    raise ContractError(f"no parallel form for variant {kind!r}")


def positional_form_check(seq: AttnSequence, gates: GateSequence,
                          kind: VariantKind = VariantKind.KDA) -> dict:
    """Evaluate outputs through explicit cumulative transition products.

    o_t = sum_i q_t^T [prod_{j=i+1..t} (I - beta_j k_j k_j^T) Diag(alpha_j)]
          (beta_i k_i) v_i^T, with each product built matrix-by-matrix.
    Reports the max deviation from the recurrent reference; this is the
    gated-delta analogue of cumulative rotation products in multiplicative
    positional encodings.
    """
    if kind not in (VariantKind.GDN, VariantKind.KDA):
        raise ContractError("positional form is defined for GDN and KDA")
    T, d_k = seq.T, seq.d_k
    if T > 32:
        raise ContractError("positional check limited to T <= 32")

    if kind is VariantKind.GDN:
        alphas = np.repeat(_scalar_decays(gates)[:, None], d_k, axis=1)
    else:
        alphas = np.exp(gates.log_alpha)

    out = np.zeros((T, seq.d_v), dtype=tensor.dtype())
    for t in range(T):
        prod = np.eye(d_k, dtype=tensor.dtype())
        # walk i downward so the product only grows by one factor at a time;
        # each source contributes through the same outer-product shape as the
        # recurrent write term, keeping the t == i base case exact
        for i in range(t, -1, -1):
            if i < t:
                j = i + 1
                step = np.diag(alphas[j]) - np.outer(gates.beta[j] * seq.k[j],
                                                     seq.k[j] * alphas[j])
                prod = prod @ step
            carried = prod @ seq.k[i]
            out[t] += np.outer(carried, gates.beta[i] * seq.v[i]).T @ seq.q[t]

    ref, _ = recurrent_forward(kind, seq, gates, None)
    return {"kind": kind.name, "max_abs_err": float(np.max(np.abs(out - ref)))}


def rotation_matrix(theta: np.ndarray, n: int) -> np.ndarray:
    """Block-diagonal rotation by n steps: one 2-D rotation per frequency."""
    theta = np.asarray(theta, dtype=tensor.dtype())
    d = 2 * theta.shape[0]
    r = np.zeros((d, d), dtype=tensor.dtype())
    c, s = np.cos(n * theta), np.sin(n * theta)
    for b in range(theta.shape[0]):
        r[2 * b:2 * b + 2, 2 * b:2 * b + 2] = [[c[b], -s[b]], [s[b], c[b]]]
    return r


def rope_relative_check(theta: np.ndarray, t: int, i: int) -> dict:
    """Verify that absolute rotations compose into the relative one.

    Checks that the relative rotation factors through the absolute ones
    (R_{t-i} == R_t R_i^T blockwise, i.e. scores depend on t - i only) and
    that composing t-i single-step rotations reproduces the closed cos/sin
    form.
    """
    if not (t >= i >= 0):
        raise ContractError("requires t >= i >= 0")
    r_rel = rotation_matrix(theta, t - i)
    r_t = rotation_matrix(theta, t)
    r_i = rotation_matrix(theta, i)
    err_split = float(np.max(np.abs(r_rel - r_t @ r_i.T)))

    step = rotation_matrix(theta, 1)
    composed = np.eye(r_rel.shape[0], dtype=tensor.dtype())
    for _ in range(t - i):
        composed = step @ composed
    err_compose = float(np.max(np.abs(r_rel - composed)))
    return {"t": t, "i": i, "split_err": err_split, "compose_err": err_compose}
