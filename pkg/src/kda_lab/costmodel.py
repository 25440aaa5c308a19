"""Analytic FLOPs / cache cost model and instrumented microbenchmarks.

The closed-form counts treat the per-head chunkwise kernel cost as
6*T*d^2 + 3*T*C*d + T*C^2 against full attention's dominant 2*T^2*d; the
cache ratio models a hybrid stack where only the full-attention layers keep
a per-token cache (the linear state is O(1) per layer and amortizes away).
Wall-clock rows are reported but never asserted; only structural counts are.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import tensor
from .chunkwise import chunk_forward
from .dplr import dplr_chunk_forward
from .errors import ContractError
from .recurrent import recurrent_forward
from .seqs import (ChunkPlan, VariantKind, random_dplr_gates, random_instance)


def _check_positive(**kwargs):
    for name, val in kwargs.items():
        if val <= 0:
            raise ContractError(f"{name} must be positive, got {val}")


def flops_kda(T: int, C: int, d_h: int) -> int:
    """Per-head chunkwise kernel cost 6*T*d^2 + 3*T*C*d + T*C^2 (exact int)."""
    _check_positive(T=T, d_h=d_h)
    if C < 0:
        raise ContractError("C must be non-negative")
    T, C, d_h = int(T), int(C), int(d_h)
    return 6 * T * d_h * d_h + 3 * T * C * d_h + T * C * C


def flops_attn(T: int, d_h: int) -> int:
    """Full attention's dominant per-head cost 2*T^2*d."""
    _check_positive(T=T, d_h=d_h)
    T, d_h = int(T), int(d_h)
    return 2 * T * T * d_h


def crossover_length(C: int, d_h: int) -> int:
    """Smallest T where full attention strictly exceeds the chunkwise cost.

    Both formulas are linear/quadratic in T, so T* = floor of the cost ratio
    per unit T plus one; verified by direct evaluation at T*-1 and T*.
    """
    _check_positive(C=C, d_h=d_h)
    C, d_h = int(C), int(d_h)
    t_star = (6 * d_h * d_h + 3 * C * d_h + C * C) // (2 * d_h) + 1
    if not (flops_attn(t_star, d_h) > flops_kda(t_star, C, d_h)):
        raise AssertionError("crossover formula disagrees with direct evaluation")
    if t_star > 1 and flops_attn(t_star - 1, d_h) > flops_kda(t_star - 1, C, d_h):
        raise AssertionError("crossover formula overshoots")
    return t_star


@dataclass
class CostScenario:
    """Hybrid-stack cache scenario: a linear layers per b full-attention ones."""

    T: int
    C: int
    d_h: int
    n_layers: int
    linear_per_full: tuple  # (a, b)
    full_cache_bytes_per_token: int = 0
    linear_state_bytes_per_layer: int = 0

    def __post_init__(self):
        a, b = self.linear_per_full
        _check_positive(T=self.T, C=self.C, d_h=self.d_h, n_layers=self.n_layers)
        if a < 0 or b <= 0:
            raise ContractError("hybrid ratio needs a >= 0 linear, b > 0 full")
        if self.n_layers % (a + b) != 0:
            raise ContractError("a + b must divide n_layers for an exact layout")


def kv_cache_ratio(linear_per_full) -> Fraction:
    """Asymptotic per-token cache of the hybrid over the all-full baseline.

    Only full-attention layers grow their cache with T, so the ratio is the
    exact fraction b / (a + b).
    """
    a, b = linear_per_full
    if a < 0 or b <= 0:
        raise ContractError("hybrid ratio needs a >= 0 linear, b > 0 full")
    return Fraction(b, a + b)


def tpot_projection(scenario: CostScenario, bandwidth_bytes_per_s: float) -> dict:
    """Analytic decode time-per-output-token from cache traffic alone.

    Caller supplies the memory bandwidth; no hardware constants are shipped.
    The hybrid reads the full-attention caches (scaled by the cache ratio)
    plus a constant per-layer linear state.
    """
    _check_positive(bandwidth_bytes_per_s=bandwidth_bytes_per_s)
    a, b = scenario.linear_per_full
    full_layers = scenario.n_layers * b // (a + b)
    linear_layers = scenario.n_layers - full_layers
    base_bytes = scenario.n_layers * scenario.T * scenario.full_cache_bytes_per_token
    hybrid_bytes = (full_layers * scenario.T * scenario.full_cache_bytes_per_token
                    + linear_layers * scenario.linear_state_bytes_per_layer)
    return {
        "cache_ratio": float(kv_cache_ratio(scenario.linear_per_full)),
        "baseline_tpot_s": base_bytes / bandwidth_bytes_per_s,
        "hybrid_tpot_s": hybrid_bytes / bandwidth_bytes_per_s,
        "speedup": (base_bytes / hybrid_bytes) if hybrid_bytes else float("inf"),
    }


BENCH_HEADER = "variant,T,C,dh,dv,repeats,mean_ns,p50_ns,matmul_count,score_matrices_per_chunk"


def _bench_one(variant: str, T: int, C: int, d_h: int, d_v: int,
               repeats: int, seed: int):
    rng = np.random.default_rng(seed)
    plan = ChunkPlan.for_length(T, C)
    seq, gates = random_instance(rng, T, d_h, d_v)
    if variant == "dplr":
        dgates = random_dplr_gates(rng, T, d_h)
        run = lambda: dplr_chunk_forward(seq, dgates, None, plan)
    elif variant == "kda":
        run = lambda: chunk_forward(seq, gates, None, plan)
    elif variant == "kda_recurrent":
        run = lambda: recurrent_forward(VariantKind.KDA, seq, gates, None)
    else:
        raise ContractError(f"unknown bench variant {variant!r}")

    times = []
    tensor.reset_counters()
    run()
    counts = tensor.counter_totals()
    tensor.reset_counters()
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        run()
        times.append(time.perf_counter_ns() - t0)
    per_chunk = counts["score_matrices"] // plan.NT if plan.NT else 0
    return {
        "variant": variant, "T": T, "C": C, "dh": d_h, "dv": d_v,
        "repeats": repeats,
        "mean_ns": int(np.mean(times)), "p50_ns": int(np.median(times)),
        "matmul_count": counts["matmul"],
        "score_matrices_per_chunk": per_chunk,
    }


def bench_kernels(variants, Ts, Cs, d_h: int, d_v: int,
                  repeats: int = 3, seed: int = 0):
    """Grid benchmark; returns rows matching BENCH_HEADER.

    Runs in 32-bit unchecked mode (the benchmark configuration); structural
    counts are deterministic, timings are informational only.
    """
    if repeats < 1:
        raise ContractError("repeats must be >= 1")
    rows = []
    with tensor.precision("f32"), tensor.checked(False):
        for variant in variants:
            for T in Ts:
                for C in Cs:
                    rows.append(_bench_one(variant, T, C, d_h, d_v, repeats, seed))
    return rows


def bench_rows_to_csv(rows) -> str:
    lines = [BENCH_HEADER]
    for r in rows:
        lines.append(",".join(str(r[k]) for k in BENCH_HEADER.split(",")))
    return "\n".join(lines) + "\n"
