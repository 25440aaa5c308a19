"""Deterministic parameterization pipeline from token features to kernel inputs.

Produces (q, k, v) streams plus the channel-wise decay and write-strength
gates from explicit weight matrices, and the gated output projection that
consumes the kernel's per-head outputs.  Everything here is a pure function
of (inputs, weights); there is no hidden state or learned buffer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor
from .errors import ContractError, ShapeError
from .seqs import AttnSequence, GateSequence

CONV_WIDTH = 4
L2_EPS = 1e-12

# decay = exp(-softplus(z + bias)); bias chosen so decay == 0.98 at z == 0
DECAY_BIAS_INIT = float(np.log(np.expm1(-np.log(0.98))))


def sigmoid(x):
    x = np.asarray(x, dtype=tensor.dtype())
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def swish(x):
    return np.asarray(x, dtype=tensor.dtype()) * sigmoid(x)


def softplus(x):
    x = np.asarray(x, dtype=tensor.dtype())
    return np.logaddexp(0.0, x)


def l2norm_rows(m: np.ndarray) -> np.ndarray:
    """Row-normalize with an epsilon floor so zero rows stay finite."""
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return m / np.maximum(norms, L2_EPS)


def rmsnorm_rows(m: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """Root-mean-square normalize each row, then scale channelwise."""
    rms = np.sqrt(np.mean(np.square(m), axis=1, keepdims=True))
    return (m / np.maximum(rms, L2_EPS)) * weight


def short_conv(x: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Causal depthwise convolution, width 4, zero left padding.

    ``kernels`` has one width-4 row per channel; kernels[:, -1] is the
    current-position tap, so output[t] depends only on x[t-3 .. t].
    """
    x = np.asarray(x, dtype=tensor.dtype())
    kernels = np.asarray(kernels, dtype=tensor.dtype())
    if kernels.shape != (x.shape[1], CONV_WIDTH):
        raise ShapeError(
            f"expected kernels of shape {(x.shape[1], CONV_WIDTH)}, got {kernels.shape}")
    T = x.shape[0]
    out = np.zeros_like(x)
    for j in range(CONV_WIDTH):
        lag = CONV_WIDTH - 1 - j  # tap j looks lag steps into the past
        if lag < T:
            out[lag:] += kernels[:, j] * x[:T - lag]
    return out


@dataclass
class ParamWeights:
    """Explicit weights for one head of the parameterization pipeline.

    Shapes (d = model width, d_k/d_v = head dims, low-rank widths r):
    w_q/w_k: d x d_k, w_v: d x d_v, conv_*: per-channel width-4 kernels,
    w_alpha_down: d x d_k and w_alpha_up: d_k x d_k (rank equals head dim),
    w_beta: d, w_gate_down: d x r_g, w_gate_up: r_g x d_v, w_out: d_v x d,
    rms_weight: d_v, decay_bias: d_k.
    """

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    conv_q: np.ndarray
    conv_k: np.ndarray
    conv_v: np.ndarray
    w_alpha_down: np.ndarray
    w_alpha_up: np.ndarray
    w_beta: np.ndarray
    w_gate_down: np.ndarray
    w_gate_up: np.ndarray
    w_out: np.ndarray
    rms_weight: np.ndarray
    decay_bias: np.ndarray

    def __post_init__(self):
        dt = tensor.dtype()
        for name in ("w_q", "w_k", "w_v", "conv_q", "conv_k", "conv_v",
                     "w_alpha_down", "w_alpha_up", "w_gate_down", "w_gate_up",
                     "w_out"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=dt))
        self.w_beta = np.asarray(self.w_beta, dtype=dt).reshape(-1)
        self.rms_weight = np.asarray(self.rms_weight, dtype=dt).reshape(-1)
        self.decay_bias = np.asarray(self.decay_bias, dtype=dt).reshape(-1)
        d, d_k = self.w_q.shape
        d_v = self.w_v.shape[1]
        if self.w_alpha_up.shape != (d_k, d_k) or self.w_alpha_down.shape != (d, d_k):
            raise ContractError("decay low-rank must have rank equal to d_k")
        for conv, dim in ((self.conv_q, d_k), (self.conv_k, d_k), (self.conv_v, d_v)):
            if conv.shape != (dim, CONV_WIDTH):
                raise ContractError(f"conv kernels must be width {CONV_WIDTH}")
        if self.w_beta.shape[0] != d or self.decay_bias.shape[0] != d_k:
            raise ShapeError("w_beta/decay_bias shapes do not match widths")
        if self.rms_weight.shape[0] != d_v or self.w_out.shape[0] != d_v:
            raise ShapeError("output-side shapes do not match d_v")

    @property
    def d(self) -> int:
        return self.w_q.shape[0]

    @property
    def d_k(self) -> int:
        return self.w_q.shape[1]

    @property
    def d_v(self) -> int:
        return self.w_v.shape[1]

    def to_dict(self) -> dict:
        """Named-array serialization (nested lists plus shapes)."""
        out = {}
        for name in ("w_q", "w_k", "w_v", "conv_q", "conv_k", "conv_v",
                     "w_alpha_down", "w_alpha_up", "w_beta", "w_gate_down",
                     "w_gate_up", "w_out", "rms_weight", "decay_bias"):
            arr = getattr(self, name)
            out[name] = {"shape": list(arr.shape), "data": arr.tolist()}
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "ParamWeights":
        kwargs = {}
        for name, entry in payload.items():
            kwargs[name] = np.asarray(entry["data"]).reshape(entry["shape"])
        return cls(**kwargs)


def random_weights(rng: np.random.Generator, d: int, d_k: int, d_v: int,
                   gate_rank: int | None = None) -> ParamWeights:
    """Seeded uniform weights in [-0.05, 0.05]; conv kernels get a unit
    current tap so the zero-weight limit is near-identity mixing."""
    gate_rank = gate_rank or max(1, d_k // 2)

    def u(*shape):
        return rng.uniform(-0.05, 0.05, size=shape)

    conv = []
    for dim in (d_k, d_k, d_v):
        kern = u(dim, CONV_WIDTH)
        kern[:, -1] += 1.0
        conv.append(kern)
    return ParamWeights(
        w_q=u(d, d_k), w_k=u(d, d_k), w_v=u(d, d_v),
        conv_q=conv[0], conv_k=conv[1], conv_v=conv[2],
        w_alpha_down=u(d, d_k), w_alpha_up=u(d_k, d_k),
        w_beta=u(d), w_gate_down=u(d, gate_rank), w_gate_up=u(gate_rank, d_v),
        w_out=u(d_v, d), rms_weight=np.ones(d_v), decay_bias=np.full(d_k, DECAY_BIAS_INIT),
    )


def featurize(x: np.ndarray, w: ParamWeights):
    """Token features -> (AttnSequence, GateSequence) for one head.

    q and k pass through projection, short convolution, Swish and row
    L2 normalization; v skips the normalization.  beta is a per-token
    sigmoid; the channel-wise decay is exp(-softplus(low-rank + bias)),
    guaranteed inside (0, 1).
    """
    x = tensor.as_matrix(x, cols=w.d)
    q = l2norm_rows(swish(short_conv(x @ w.w_q, w.conv_q)))
    k = l2norm_rows(swish(short_conv(x @ w.w_k, w.conv_k)))
    v = swish(short_conv(x @ w.w_v, w.conv_v))
    beta = sigmoid(x @ w.w_beta)
    z = (x @ w.w_alpha_down) @ w.w_alpha_up
    log_alpha = -softplus(z + w.decay_bias)
    # degenerate all-zero rows survive the epsilon floor as zero rows; only
    # claim the unit-norm invariant when it actually holds
    unit = bool(np.all(np.abs(np.linalg.norm(q, axis=1) - 1.0) < 1e-6)
                and np.all(np.abs(np.linalg.norm(k, axis=1) - 1.0) < 1e-6))
    seq = AttnSequence(q=q, k=k, v=v, normalized=unit)
    gates = GateSequence(log_alpha=log_alpha, beta=beta)
    return seq, gates


def output_gate(core_out: np.ndarray, x: np.ndarray, w: ParamWeights) -> np.ndarray:
    """Gated output projection: Wo(Sigmoid(low-rank gate) * RMSNorm(core))."""
    core_out = tensor.as_matrix(core_out, cols=w.d_v)
    x = tensor.as_matrix(x, rows=core_out.shape[0], cols=w.d)
    gate = sigmoid((x @ w.w_gate_down) @ w.w_gate_up)
    normed = rmsnorm_rows(core_out, w.rms_weight)
    return (gate * normed) @ w.w_out
