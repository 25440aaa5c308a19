"""Token-by-token reference recurrences.

These are the ground-truth oracles for every other module: each variant is a
literal transcription of its state update rule, one token at a time, with no
chunking or algebraic shortcuts.

Update rules (o_t = S_t^T q_t throughout):

  LA        S = S + k v^T
  Mamba2    S = a_t * S + beta_t k v^T           (a_t scalar, from mean log-decay)
  GLA       S = Diag(alpha_t) S + k v^T          (beta unused in the write term)
  DeltaNet  S = (I - beta k k^T) S + beta k v^T
  GDN       S = (I - beta k k^T) a_t S + beta k v^T     (a_t scalar)
  KDA       S = (I - beta k k^T) Diag(alpha_t) S + beta k v^T
  DPLR      S = (Diag(alpha_t) - a_t b_t^T) S + k v^T

Gates are stored as log-decays so cumulative products become sums.  Scalar
variants (Mamba2, GDN) take the per-token mean of the log-decay channels; for
channel-constant gates this equals the shared channel value exactly.
"""

from __future__ import annotations

import numpy as np

from . import tensor
from .errors import ContractError, NumericError
from .seqs import (AttnSequence, DplrGateSequence, GateSequence, StateMatrix,
                   VariantKind)


def _scalar_decays(gates: GateSequence) -> np.ndarray:
    return np.exp(gates.log_alpha.mean(axis=1))


def _step_kda(s, k, v, alpha, beta):
    # (I - beta k k^T) Diag(alpha) S + beta k v^T, applied as a rank-1 update
    # on the decayed state to keep the arithmetic local to each term.
    s = alpha[:, None] * s
    s = s - np.outer(k, beta * (k @ s))
    s = s + np.outer(k, beta * v)
    return s


def recurrent_forward(kind: VariantKind, seq: AttnSequence, gates,
                      s0: StateMatrix | None = None,
                      return_states: bool = False):
    """Run a variant's recurrence and return (outputs, final_state).

    ``gates`` is a GateSequence (DplrGateSequence for the DPLR variant); the
    LA variant ignores it entirely and accepts None.  With ``return_states``
    the full list [S_0, ..., S_T] is returned as a third element.
    """
    T, d_k, d_v = seq.T, seq.d_k, seq.d_v
    if kind is VariantKind.DPLR:
        if not isinstance(gates, DplrGateSequence):
            raise ContractError("DPLR variant requires DplrGateSequence gates")
    elif kind is not VariantKind.LA:
        if not isinstance(gates, GateSequence):
            raise ContractError(f"{kind.name} variant requires GateSequence gates")
        if gates.T != T:
            raise ContractError("gate length does not match sequence length")

    s = StateMatrix.zeros(d_k, d_v).s if s0 is None else s0.s.copy()
    out = np.zeros((T, d_v), dtype=tensor.dtype())
    states = [s.copy()] if return_states else None
    scalar = _scalar_decays(gates) if kind in (VariantKind.MAMBA2, VariantKind.GDN) else None

    for t in range(T):
        q, k, v = seq.q[t], seq.k[t], seq.v[t]
        if kind is VariantKind.LA:
            s = s + np.outer(k, v)
        elif kind is VariantKind.MAMBA2:
            s = scalar[t] * s + np.outer(k, gates.beta[t] * v)
        elif kind is VariantKind.GLA:
            alpha = np.exp(gates.log_alpha[t])
            s = alpha[:, None] * s + np.outer(k, v)
        elif kind is VariantKind.DELTANET:
            s = s - np.outer(k, gates.beta[t] * (k @ s))
            s = s + np.outer(k, gates.beta[t] * v)
        elif kind is VariantKind.GDN:
            s = scalar[t] * s
            s = s - np.outer(k, gates.beta[t] * (k @ s))
            s = s + np.outer(k, gates.beta[t] * v)
        elif kind is VariantKind.KDA:
            s = _step_kda(s, k, v, np.exp(gates.log_alpha[t]), gates.beta[t])
        elif kind is VariantKind.DPLR:
            alpha = np.exp(gates.log_alpha[t])
            # both D and a b^T act on the pre-update state
            low_rank = gates.b[t] @ s
            s = alpha[:, None] * s - np.outer(gates.a[t], low_rank)
            s = s + np.outer(k, v)
        else:
            raise ContractError(f"unknown variant {kind!r}")
        if tensor.is_checked() and not np.isfinite(s).all():
            raise NumericError("state became non-finite", step=t)
        out[t] = s.T @ q
        if return_states:
            states.append(s.copy())

    final = StateMatrix(s)
    if return_states:
        return out, final, states
    return out, final


def kda_as_dplr(seq: AttnSequence, gates: GateSequence):
    """Rewrite a KDA instance in DPLR form.

    The transition correspondence is D = Diag(alpha), a = beta*k,
    b = k (*) alpha; the DPLR write term carries no beta, so the write
    strength is folded into the value stream.
    """
    dplr_gates = DplrGateSequence(
        log_alpha=gates.log_alpha.copy(),
        a=gates.beta[:, None] * seq.k,
        b=seq.k * np.exp(gates.log_alpha),
    )
    seq2 = AttnSequence(q=seq.q.copy(), k=seq.k.copy(),
                        v=gates.beta[:, None] * seq.v)
    return seq2, dplr_gates


def state_norm_bound(seq: AttnSequence, gates: GateSequence,
                     s0: StateMatrix | None = None) -> float:
    """Analytic bound ||S_0||_F + sum_t beta_t ||v_t|| on the running state norm.

    Valid because with unit-norm keys, beta in [0,1] and decays in (0,1] the
    per-step transition (I - beta k k^T) Diag(alpha) is non-expansive.
    Requires normalized keys.
    """
    norms = np.linalg.norm(seq.k, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise ContractError("state_norm_bound requires unit-norm key rows")
    base = 0.0 if s0 is None else float(np.linalg.norm(s0.s))
    return base + float(np.sum(gates.beta * np.linalg.norm(seq.v, axis=1)))
