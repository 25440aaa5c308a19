from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kda_lab import (ContractError, CostScenario, bench_kernels,
                     crossover_length, flops_attn, flops_kda, kv_cache_ratio,
                     tpot_projection)
from kda_lab.costmodel import bench_rows_to_csv, BENCH_HEADER


def test_closed_form_values():
    assert flops_kda(64, 64, 128) == 8126464
    assert flops_attn(64, 128) == 1048576
    assert crossover_length(64, 128) == 497
    assert kv_cache_ratio((3, 1)) == Fraction(1, 4)


def test_scaling_shapes():
    assert flops_kda(128, 64, 128) == 2 * flops_kda(64, 64, 128)
    assert flops_attn(128, 128) == 4 * flops_attn(64, 128)
    assert flops_attn(64, 256) == 2 * flops_attn(64, 128)
    assert flops_kda(64, 0, 128) == 6 * 64 * 128 * 128


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10**6), st.integers(1, 4096), st.integers(1, 4096))
def test_formulas_term_by_term(T, C, d):
    assert flops_kda(T, C, d) == 6 * T * d * d + 3 * T * C * d + T * C * C
    assert flops_attn(T, d) == 2 * T * T * d


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 256), st.integers(1, 256))
def test_crossover_exactness(C, d):
    t_star = crossover_length(C, d)
    assert flops_attn(t_star, d) > flops_kda(t_star, C, d)
    if t_star > 1:
        assert flops_attn(t_star - 1, d) <= flops_kda(t_star - 1, C, d)


def test_crossover_small_by_scan():
    t_star = crossover_length(1, 1)
    scan = next(T for T in range(1, 100)
                if flops_attn(T, 1) > flops_kda(T, 1, 1))
    assert t_star == scan


def test_cache_ratio_cases():
    assert kv_cache_ratio((0, 1)) == 1
    assert kv_cache_ratio((1, 1)) == Fraction(1, 2)
    with pytest.raises(ContractError):
        kv_cache_ratio((3, 0))


def test_scenario_and_tpot():
    sc = CostScenario(T=1024, C=64, d_h=128, n_layers=8, linear_per_full=(3, 1),
                      full_cache_bytes_per_token=1024,
                      linear_state_bytes_per_layer=64 * 1024)
    rep = tpot_projection(sc, bandwidth_bytes_per_s=1e9)
    assert rep["cache_ratio"] == 0.25
    assert rep["hybrid_tpot_s"] < rep["baseline_tpot_s"]
    with pytest.raises(ContractError):
        CostScenario(T=8, C=4, d_h=8, n_layers=7, linear_per_full=(3, 1))


def test_bench_rows_schema_and_census():
    rows = bench_kernels(["kda", "dplr"], [128], [16], 8, 8, repeats=2, seed=0)
    assert len(rows) == 2
    by_variant = {r["variant"]: r for r in rows}
    assert by_variant["kda"]["matmul_count"] < by_variant["dplr"]["matmul_count"]
    assert by_variant["kda"]["score_matrices_per_chunk"] == 2
    assert by_variant["dplr"]["score_matrices_per_chunk"] == 4
    csv = bench_rows_to_csv(rows)
    assert csv.splitlines()[0] == BENCH_HEADER
    assert len(csv.strip().splitlines()) == 3


def test_bench_census_deterministic_across_repeats():
    a = bench_kernels(["kda"], [64], [16], 8, 8, repeats=1, seed=0)[0]
    b = bench_kernels(["kda"], [64], [16], 8, 8, repeats=10, seed=0)[0]
    assert a["matmul_count"] == b["matmul_count"]
    assert a["score_matrices_per_chunk"] == b["score_matrices_per_chunk"]


def test_bench_validation():
    with pytest.raises(ContractError):
        bench_kernels(["kda"], [64], [16], 8, 8, repeats=0)
    with pytest.raises(ContractError):
        bench_kernels(["bogus"], [64], [16], 8, 8, repeats=1)
