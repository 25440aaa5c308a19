"""Verification-first laboratory for gated delta-rule linear attention.

Token-by-token reference recurrences, a chunkwise-parallel kernel with
compact (WY) within-chunk factors, the general diagonal-plus-low-rank
variant, closed-form parallel oracles, a hand-derived backward pass, an
analytic cost model, synthetic tasks, and a toy trainer — all cross-checked
against each other.
"""

from .backward import KdaGradients, fd_check, kda_backward
from .chunkwise import ChunkScratch, chunk_forward, wy_factors, wy_verify_propositions
from .costmodel import (CostScenario, bench_kernels, crossover_length,
                        flops_attn, flops_kda, kv_cache_ratio, tpot_projection)
from .dplr import dplr_chunk_forward, matmul_census
from .errors import ContractError, NumericError, ShapeError
from .neural import ParamWeights, featurize, output_gate, random_weights, short_conv
from .parallel import parallel_forward, positional_form_check, rope_relative_check
from .recurrent import kda_as_dplr, recurrent_forward, state_norm_bound
from .seqs import (AttnSequence, ChunkPlan, DplrGateSequence, GateSequence,
                   StateMatrix, VariantKind, random_dplr_gates, random_instance)
from .tasks import (IGNORE, TaskInstance, gen_mqar, gen_palindrome, gen_stack,
                    mqar_instance, oracle_targets, palindrome_instance,
                    read_jsonl, stack_instance, write_jsonl)
from .train import ToyModel, TrainConfig, train_toy
from .verify import run_suite

__version__ = "0.1.0"

__all__ = [
    "AttnSequence", "ChunkPlan", "ChunkScratch", "ContractError",
    "CostScenario", "DplrGateSequence", "GateSequence", "IGNORE",
    "KdaGradients", "NumericError", "ParamWeights", "ShapeError",
    "StateMatrix", "TaskInstance", "ToyModel", "TrainConfig", "VariantKind",
    "bench_kernels", "chunk_forward", "crossover_length", "dplr_chunk_forward",
    "fd_check", "featurize", "flops_attn", "flops_kda", "gen_mqar",
    "gen_palindrome", "gen_stack", "kda_as_dplr", "kda_backward",
    "kv_cache_ratio", "matmul_census", "mqar_instance", "oracle_targets",
    "output_gate", "palindrome_instance", "parallel_forward",
    "positional_form_check", "random_dplr_gates", "random_instance",
    "random_weights", "read_jsonl", "recurrent_forward", "rope_relative_check",
    "run_suite", "short_conv", "stack_instance", "state_norm_bound",
    "tpot_projection", "train_toy", "write_jsonl", "wy_factors",
    "wy_verify_propositions",
]
