"""Hand-derived reverse-mode pass for the token-by-token gated delta rule.

Forward step (the differentiated program):

    Z_t = Diag(alpha_t) S_{t-1}
    c_t = k_t^T Z_t
    S_t = Z_t - beta_t k_t c_t^T + beta_t k_t v_t^T
    o_t = S_t^T q_t

The backward sweep carries the adjoint of the state; each input slot's
gradient falls out of the product rule on the three appearances of k_t and
the chain through Z.  Validated against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor
from .errors import NumericError
from .recurrent import recurrent_forward
from .seqs import AttnSequence, GateSequence, StateMatrix, VariantKind

RECOMPUTE_THRESHOLD = 512
SEGMENT = 64


@dataclass
class KdaGradients:
    """Gradients of <upstream, outputs> w.r.t. every forward input."""

    d_q: np.ndarray
    d_k: np.ndarray
    d_v: np.ndarray
    d_log_alpha: np.ndarray
    d_beta: np.ndarray
    d_s0: np.ndarray


def _forward_states(seq, gates, start, stop, s_start):
    """States S_start .. S_stop (inclusive) starting from s_start."""
    s = s_start.copy()
    states = [s.copy()]
    for t in range(start, stop):
        alpha = np.exp(gates.log_alpha[t])
        s = alpha[:, None] * s
        s = s - np.outer(seq.k[t], gates.beta[t] * (seq.k[t] @ s))
        s = s + np.outer(seq.k[t], gates.beta[t] * seq.v[t])
        states.append(s.copy())
    return states


def kda_backward(seq: AttnSequence, gates: GateSequence,
                 s0: StateMatrix | None, upstream: np.ndarray) -> KdaGradients:
    """Adjoint sweep for the gated-delta recurrence.

    For long sequences (T > 512) the forward states are not all cached;
    checkpoints every 64 steps are stored and each segment is recomputed
    during the reverse sweep.
    """
    T, d_k, d_v = seq.T, seq.d_k, seq.d_v
    upstream = tensor.as_matrix(upstream, rows=T, cols=d_v)
    s_init = np.zeros((d_k, d_v), dtype=tensor.dtype()) if s0 is None else s0.s.copy()

    seg = T if T <= RECOMPUTE_THRESHOLD else SEGMENT
    # checkpoint states at segment boundaries
    checkpoints = [s_init.copy()]
    s = s_init.copy()
    for b in range(0, T, seg):
        states = _forward_states(seq, gates, b, min(b + seg, T), s)
        s = states[-1]
        if b + seg < T:
            checkpoints.append(s.copy())

    g = KdaGradients(
        d_q=np.zeros((T, d_k), dtype=tensor.dtype()),
        d_k=np.zeros((T, d_k), dtype=tensor.dtype()),
        d_v=np.zeros((T, d_v), dtype=tensor.dtype()),
        d_log_alpha=np.zeros((T, d_k), dtype=tensor.dtype()),
        d_beta=np.zeros(T, dtype=tensor.dtype()),
        d_s0=np.zeros((d_k, d_v), dtype=tensor.dtype()),
    )

    ds = np.zeros((d_k, d_v), dtype=tensor.dtype())  # adjoint of S_t
    for seg_idx in range(len(checkpoints) - 1, -1, -1):
        b = seg_idx * seg
        e = min(b + seg, T)
        states = _forward_states(seq, gates, b, e, checkpoints[seg_idx])
        for t in range(e - 1, b - 1, -1):
            k, v, beta = seq.k[t], seq.v[t], gates.beta[t]
            alpha = np.exp(gates.log_alpha[t])
            s_prev = states[t - b]
            s_t = states[t - b + 1]
            z = alpha[:, None] * s_prev
            c = k @ z

            g.d_q[t] = s_t @ upstream[t]
            grad = ds + np.outer(seq.q[t], upstream[t])  # full adjoint of S_t
            kg = k @ grad
            g.d_v[t] = beta * kg
            g.d_beta[t] = kg @ (v - c)
            g.d_k[t] = grad @ (beta * (v - c)) - z @ (beta * kg)
            dz = grad - np.outer(k, beta * kg)
            g.d_log_alpha[t] = np.sum(dz * z, axis=1)
            ds = alpha[:, None] * dz
            if tensor.is_checked() and not np.isfinite(ds).all():
                raise NumericError("adjoint state became non-finite", step=t)
    g.d_s0 = ds
    return g


def linear_loss():
    """Sum of all output entries, with its gradient."""
    return (lambda o: np.sum(o),
            lambda o: np.ones_like(o))


def squared_loss():
    """Half squared Frobenius norm of the outputs, with its gradient."""
    return (lambda o: 0.5 * np.sum(o * o),
            lambda o: o.copy())


def _forward_outputs_ld(q, k, v, log_alpha, beta, s0):
    """Plain recurrence in extended precision for the difference oracle.

    Central differences at h = 1e-5 cancel ~10 decimal digits; evaluating
    the perturbed losses in longdouble keeps the numeric estimate itself
    from being the dominant error source.  The gradient under test is still
    produced by the 64-bit sweep.
    """
    T, d_v = q.shape[0], v.shape[1]
    s = s0.copy()
    out = np.zeros((T, d_v), dtype=np.longdouble)
    for t in range(T):
        alpha = np.exp(log_alpha[t])
        s = alpha[:, None] * s
        s = s - np.outer(k[t], beta[t] * (k[t] @ s))
        s = s + np.outer(k[t], beta[t] * v[t])
        out[t] = s.T @ q[t]
    return out


def fd_check(loss, loss_grad, seq: AttnSequence, gates: GateSequence,
             s0: StateMatrix | None = None, h: float = 1e-5) -> dict:
    """Central-difference check of kda_backward against a scalar loss.

    ``loss`` maps the T x d_v output matrix to a scalar and ``loss_grad``
    returns its gradient w.r.t. the outputs.  Every coordinate of every
    input slot is perturbed by +-h; the report carries per-slot max relative
    errors (relative to max(|analytic|, |numeric|, 1e-8)).
    """
    out, _ = recurrent_forward(VariantKind.KDA, seq, gates, s0)
    grads = kda_backward(seq, gates, s0, np.asarray(loss_grad(out),
                                                   dtype=tensor.dtype()))

    s0_arr = (np.zeros((seq.d_k, seq.d_v), dtype=tensor.dtype())
              if s0 is None else s0.s)
    ld = {
        "q": seq.q.astype(np.longdouble), "k": seq.k.astype(np.longdouble),
        "v": seq.v.astype(np.longdouble),
        "log_alpha": gates.log_alpha.astype(np.longdouble),
        "beta": gates.beta.astype(np.longdouble),
        "s0": s0_arr.astype(np.longdouble),
    }
    analytic = {"q": grads.d_q, "k": grads.d_k, "v": grads.d_v,
                "log_alpha": grads.d_log_alpha, "beta": grads.d_beta,
                "s0": grads.d_s0}
    h_ld = np.longdouble(h)

    report = {"h": h, "slots": {}, "max_rel_err": 0.0}
    for name, arr in ld.items():
        flat = arr.reshape(-1)
        max_err = 0.0
        for idx in range(flat.shape[0]):
            orig = flat[idx]
            flat[idx] = orig + h_ld
            up = loss(_forward_outputs_ld(**ld))
            flat[idx] = orig - h_ld
            down = loss(_forward_outputs_ld(**ld))
            flat[idx] = orig
            numeric = float((up - down) / (2.0 * h_ld))
            a = float(analytic[name].reshape(-1)[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            max_err = max(max_err, err)
        report["slots"][name] = max_err
        report["max_rel_err"] = max(report["max_rel_err"], max_err)
    return report
