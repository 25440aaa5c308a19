"""Toy trainer: embedding -> one gated-delta head -> linear readout.

The head consumes q/k (row-normalized linear projections of the embedded
tokens), v, a channel-wise decay gate and a scalar write gate, all produced
by per-channel projections of the same embeddings; the loss is masked
cross-entropy over the supervised positions.  Gradients flow through the
hand-derived kernel backward plus explicit chain rules for the projections.
Deterministic per (seed, config) in 64-bit mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor
from .backward import kda_backward
from .errors import ContractError, NumericError
from .neural import sigmoid, softplus
from .recurrent import recurrent_forward
from .seqs import AttnSequence, GateSequence, VariantKind
from .tasks import IGNORE, TaskInstance

L2_EPS = 1e-12


@dataclass
class TrainConfig:
    d: int = 32
    d_k: int = 32
    d_v: int = 32
    lr: float = 1e-2
    steps: int = 2000
    batch_size: int = 4
    seed: int = 0
    optimizer: str = "adam"
    log_every: int = 50

    def __post_init__(self):
        if min(self.d, self.d_k, self.d_v) < 1 or self.steps < 1 or self.batch_size < 1:
            raise ContractError("dims, steps and batch size must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise ContractError("optimizer must be 'sgd' or 'adam'")


@dataclass
class ToyModel:
    """Parameter bundle; arrays are updated in place by the optimizer."""

    embed: np.ndarray      # vocab x d
    w_q: np.ndarray        # d x d_k
    w_k: np.ndarray        # d x d_k
    w_v: np.ndarray        # d x d_v
    w_alpha: np.ndarray    # d x d_k
    alpha_bias: np.ndarray  # d_k
    w_beta: np.ndarray     # d
    readout: np.ndarray    # d_v x vocab

    def params(self) -> dict:
        return {name: getattr(self, name) for name in (
            "embed", "w_q", "w_k", "w_v", "w_alpha", "alpha_bias",
            "w_beta", "readout")}


def init_model(vocab: int, cfg: TrainConfig, rng: np.random.Generator) -> ToyModel:
    dt = tensor.dtype()

    def g(*shape, scale):
        return (scale * rng.standard_normal(shape)).astype(dt)

    return ToyModel(
        embed=g(vocab, cfg.d, scale=0.5),
        w_q=g(cfg.d, cfg.d_k, scale=0.3),
        w_k=g(cfg.d, cfg.d_k, scale=0.3),
        w_v=g(cfg.d, cfg.d_v, scale=0.3),
        w_alpha=g(cfg.d, cfg.d_k, scale=0.1),
        alpha_bias=np.full(cfg.d_k, float(np.log(np.expm1(-np.log(0.98)))), dtype=dt),
        w_beta=g(cfg.d, scale=0.3),
        readout=g(cfg.d_v, vocab, scale=0.3),
    )


def _normalize_rows(pre):
    norms = np.maximum(np.linalg.norm(pre, axis=1, keepdims=True), L2_EPS)
    return pre / norms, norms


def _loss_and_grads(model: ToyModel, inst: TaskInstance):
    """Forward + backward on one instance.

    Returns (loss, n_correct, n_supervised, grads-by-name).
    """
    tokens, targets = inst.tokens, inst.targets
    T = tokens.shape[0]
    x = model.embed[tokens]

    q_pre, k_pre = x @ model.w_q, x @ model.w_k
    q, q_norm = _normalize_rows(q_pre)
    k, k_norm = _normalize_rows(k_pre)
    v = x @ model.w_v
    z_pre = x @ model.w_alpha + model.alpha_bias
    log_alpha = -softplus(z_pre)
    b_pre = x @ model.w_beta
    beta = sigmoid(b_pre)

    seq = AttnSequence(q=q, k=k, v=v)
    gates = GateSequence(log_alpha=log_alpha, beta=beta)
    out, _ = recurrent_forward(VariantKind.KDA, seq, gates, None)

    logits = out @ model.readout
    mask = targets != IGNORE
    n_sup = int(np.count_nonzero(mask))
    if n_sup == 0:
        raise ContractError("instance has no supervised positions")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    picked = log_probs[mask, targets[mask]]
    loss = float(-np.mean(picked))
    n_correct = int(np.count_nonzero(
        np.argmax(logits[mask], axis=1) == targets[mask]))

    d_logits = np.zeros_like(logits)
    probs = np.exp(log_probs[mask])
    probs[np.arange(n_sup), targets[mask]] -= 1.0
    d_logits[mask] = probs / n_sup

    grads = {name: np.zeros_like(arr) for name, arr in model.params().items()}
    grads["readout"] = out.T @ d_logits
    d_out = d_logits @ model.readout.T

    kg = kda_backward(seq, gates, None, d_out)
    d_x = np.zeros_like(x)

    # q = pre/||pre||: d_pre = (d_q - q (q . d_q)) / ||pre||
    for pre_name, pre, unit, norm, d_unit in (
            ("w_q", q_pre, q, q_norm, kg.d_q), ("w_k", k_pre, k, k_norm, kg.d_k)):
        inner = np.sum(unit * d_unit, axis=1, keepdims=True)
        d_pre = (d_unit - unit * inner) / norm
        grads[pre_name] = x.T @ d_pre
        d_x += d_pre @ getattr(model, pre_name).T

    grads["w_v"] = x.T @ kg.d_v
    d_x += kg.d_v @ model.w_v.T

    d_zpre = -sigmoid(z_pre) * kg.d_log_alpha
    grads["w_alpha"] = x.T @ d_zpre
    grads["alpha_bias"] = d_zpre.sum(axis=0)
    d_x += d_zpre @ model.w_alpha.T

    d_bpre = kg.d_beta * beta * (1.0 - beta)
    grads["w_beta"] = x.T @ d_bpre
    d_x += np.outer(d_bpre, model.w_beta)

    np.add.at(grads["embed"], tokens, d_x)
    return loss, n_correct, n_sup, grads


@dataclass
class _AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def _apply_update(model, grads, cfg, adam: _AdamState | None):
    if cfg.optimizer == "sgd":
        for name, p in model.params().items():
            p -= cfg.lr * grads[name]
        return
    adam.t += 1
    b1, b2, eps = 0.9, 0.999, 1e-8
    for name, p in model.params().items():
        g = grads[name]
        adam.m[name] = b1 * adam.m.get(name, 0.0) + (1 - b1) * g
        adam.v[name] = b2 * adam.v.get(name, 0.0) + (1 - b2) * g * g
        m_hat = adam.m[name] / (1 - b1 ** adam.t)
        v_hat = adam.v[name] / (1 - b2 ** adam.t)
        p -= cfg.lr * m_hat / (np.sqrt(v_hat) + eps)


def train_toy(instances, cfg: TrainConfig, model: ToyModel | None = None) -> dict:
    """Train on a fixed pool of instances; returns the loss curve and stats.

    The curve rows are (step, loss, masked_accuracy) sampled every
    ``cfg.log_every`` steps plus the first and last step.  Deterministic per
    seed/config: all sampling uses one seeded generator.
    """
    instances = list(instances)
    if not instances:
        raise ContractError("need at least one training instance")
    vocab = instances[0].vocab_size
    rng = np.random.default_rng(cfg.seed)
    if model is None:
        model = init_model(vocab, cfg, rng)
    adam = _AdamState() if cfg.optimizer == "adam" else None

    curve = []
    for step in range(cfg.steps):
        total_loss, total_correct, total_sup = 0.0, 0, 0
        acc_grads = None
        for _ in range(cfg.batch_size):
            inst = instances[int(rng.integers(0, len(instances)))]
            loss, n_c, n_s, grads = _loss_and_grads(model, inst)
            total_loss += loss
            total_correct += n_c
            total_sup += n_s
            if acc_grads is None:
                acc_grads = grads
            else:
                for name in acc_grads:
                    acc_grads[name] += grads[name]
        mean_loss = total_loss / cfg.batch_size
        if not np.isfinite(mean_loss):
            raise NumericError("loss became non-finite", step=step)
        for name in acc_grads:
            acc_grads[name] /= cfg.batch_size
        _apply_update(model, acc_grads, cfg, adam)
        if step % cfg.log_every == 0 or step == cfg.steps - 1:
            curve.append((step, mean_loss, total_correct / total_sup))

    return {
        "curve": curve,
        "initial_loss": curve[0][1],
        "final_loss": curve[-1][1],
        "final_accuracy": curve[-1][2],
        "model": model,
    }


def write_curve_csv(curve, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,loss,masked_accuracy\n")
        for step, loss, acc in curve:
            fh.write(f"{step},{loss:.10g},{acc:.6g}\n")
