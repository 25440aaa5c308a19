"""Domain types for attention streams, gates, states and chunk plans.

All arrays are plain numpy in the active precision.  The random instance
generators clamp per-step log-decays to [-8, 0]; this keeps within-chunk
decay ratios representable for chunk sizes up to 64 and is a generator
contract, not a kernel-side check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import tensor
from .errors import ContractError, ShapeError

LOG_ALPHA_MIN = -8.0


class VariantKind(Enum):
    LA = "la"
    MAMBA2 = "mamba2"
    GLA = "gla"
    DELTANET = "deltanet"
    GDN = "gdn"
    KDA = "kda"
    DPLR = "dplr"


@dataclass
class AttnSequence:
    """Per-head q/k/v streams of length T.

    In normalized mode every row of q and k has unit Euclidean norm
    (checked to 1e-6 at construction).
    """

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.q = tensor.as_matrix(self.q)
        self.k = tensor.as_matrix(self.k, rows=self.q.shape[0], cols=self.q.shape[1])
        self.v = tensor.as_matrix(self.v, rows=self.q.shape[0])
        if self.normalized and tensor.is_checked():
            for name, m in (("q", self.q), ("k", self.k)):
                norms = np.linalg.norm(m, axis=1)
                if np.any(np.abs(norms - 1.0) > 1e-6):
                    raise ContractError(f"{name} rows are not unit-norm")

    @property
    def T(self) -> int:
        return self.q.shape[0]

    @property
    def d_k(self) -> int:
        return self.q.shape[1]

    @property
    def d_v(self) -> int:
        return self.v.shape[1]


@dataclass
class GateSequence:
    """Per-token channel-wise log-decay vectors and scalar write strengths."""

    log_alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.log_alpha = tensor.as_matrix(self.log_alpha)
        self.beta = np.asarray(self.beta, dtype=tensor.dtype()).reshape(-1)
        if self.beta.shape[0] != self.log_alpha.shape[0]:
            raise ShapeError("beta length must match log_alpha rows")
        if tensor.is_checked():
            if np.any(self.log_alpha > 0):
                raise ContractError("log_alpha entries must be <= 0")
            if np.any((self.beta < 0) | (self.beta > 1)):
                raise ContractError("beta entries must lie in [0, 1]")

    @property
    def T(self) -> int:
        return self.log_alpha.shape[0]


@dataclass
class DplrGateSequence:
    """Diagonal-plus-low-rank transition data: log-decays and a/b factors."""

    log_alpha: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.log_alpha = tensor.as_matrix(self.log_alpha)
        self.a = tensor.as_matrix(self.a, rows=self.log_alpha.shape[0],
                                  cols=self.log_alpha.shape[1])
        self.b = tensor.as_matrix(self.b, rows=self.log_alpha.shape[0],
                                  cols=self.log_alpha.shape[1])
        if tensor.is_checked() and np.any(self.log_alpha > 0):
            raise ContractError("log_alpha entries must be <= 0")

    @property
    def T(self) -> int:
        return self.log_alpha.shape[0]


@dataclass
class StateMatrix:
    """The d_k x d_v fast-weight memory."""

    s: np.ndarray

    def __post_init__(self):
        self.s = tensor.as_matrix(self.s)

    @classmethod
    def zeros(cls, d_k: int, d_v: int) -> "StateMatrix":
        return cls(np.zeros((d_k, d_v), dtype=tensor.dtype()))

    def copy(self) -> "StateMatrix":
        return StateMatrix(self.s.copy())


@dataclass
class ChunkPlan:
    """Chunking layout: chunk size, chunk count and appended no-op padding.

    Padded tokens carry beta=0 and log_alpha=0, which makes the padded step
    an exact identity under the update rule.
    """

    C: int
    NT: int
    pad: int

    def __post_init__(self):
        if self.C < 1:
            raise ContractError("chunk size must be >= 1")
        if not (0 <= self.pad < self.C):
            raise ContractError("pad must satisfy 0 <= pad < C")

    @property
    def padded_len(self) -> int:
        return self.NT * self.C

    @classmethod
    def for_length(cls, T: int, C: int) -> "ChunkPlan":
        pad = (-T) % C
        return cls(C=C, NT=(T + pad) // C, pad=pad)


def pad_for_plan(seq: AttnSequence, gates: GateSequence, plan: ChunkPlan):
    """Append ``plan.pad`` exact no-op tokens (beta=0, log_alpha=0)."""
    if plan.padded_len != seq.T + plan.pad:
        raise ContractError("plan does not match sequence length")
    if plan.pad == 0:
        return seq, gates
    dt = tensor.dtype()
    zq = np.zeros((plan.pad, seq.d_k), dtype=dt)
    zv = np.zeros((plan.pad, seq.d_v), dtype=dt)
    seq_p = AttnSequence(
        q=np.vstack([seq.q, zq]), k=np.vstack([seq.k, zq]), v=np.vstack([seq.v, zv])
    )
    gates_p = GateSequence(
        log_alpha=np.vstack([gates.log_alpha, np.zeros((plan.pad, seq.d_k), dtype=dt)]),
        beta=np.concatenate([gates.beta, np.zeros(plan.pad, dtype=dt)]),
    )
    return seq_p, gates_p


def _unit_rows(m: np.ndarray) -> np.ndarray:
    norms = np.maximum(np.linalg.norm(m, axis=1, keepdims=True), 1e-12)
    return m / norms


def random_instance(rng: np.random.Generator, T: int, d_k: int, d_v: int,
                    normalized: bool = True, log_alpha_min: float = LOG_ALPHA_MIN):
    """Seeded (AttnSequence, GateSequence) pair with clamped gates."""
    dt = tensor.dtype()
    q = rng.standard_normal((T, d_k)).astype(dt)
    k = rng.standard_normal((T, d_k)).astype(dt)
    v = rng.standard_normal((T, d_v)).astype(dt)
    if normalized:
        q, k = _unit_rows(q), _unit_rows(k)
    log_alpha = rng.uniform(log_alpha_min, 0.0, size=(T, d_k)).astype(dt)
    beta = rng.uniform(0.0, 1.0, size=T).astype(dt)
    seq = AttnSequence(q=q, k=k, v=v, normalized=normalized)
    gates = GateSequence(log_alpha=log_alpha, beta=beta)
    return seq, gates


def random_dplr_gates(rng: np.random.Generator, T: int, d_k: int,
                      log_alpha_min: float = LOG_ALPHA_MIN,
                      scale: float = 0.5) -> DplrGateSequence:
    """Seeded DPLR gates; a/b are kept small so transitions stay contractive."""
    dt = tensor.dtype()
    log_alpha = rng.uniform(log_alpha_min, 0.0, size=(T, d_k)).astype(dt)
    a = (scale * _unit_rows(rng.standard_normal((T, d_k)))).astype(dt)
    b = (scale * _unit_rows(rng.standard_normal((T, d_k)))).astype(dt)
    return DplrGateSequence(log_alpha=log_alpha, a=a, b=b)
