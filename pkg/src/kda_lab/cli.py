"""Command-line entry point: verification, benchmarks, costs, data, training.

Exit codes: 0 success, 1 runtime/IO failure, 2 usage error, 3 verification
failure.  Every command is deterministic under a fixed --seed; file outputs
are UTF-8 and report figures render to files next to the delimited output.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import tensor
from .backward import fd_check, squared_loss
from .costmodel import (bench_kernels, bench_rows_to_csv, crossover_length,
                        flops_attn, flops_kda, kv_cache_ratio)
from .errors import ContractError
from .seqs import StateMatrix, random_instance
from .tasks import gen_mqar, gen_palindrome, gen_stack, write_jsonl
from .train import TrainConfig, train_toy, write_curve_csv
from .verify import SUITES, run_suite


@click.group()
@click.option("--precision", type=click.Choice(["f32", "f64"]), default=None,
              help="Override the working precision for this invocation.")
def main(precision):
    """Verification-first laboratory for gated delta-rule attention kernels."""
    if precision:
        tensor.set_precision(precision)


@main.command()
@click.argument("suite", type=click.Choice(SUITES))
@click.option("--seeds", default=10, show_default=True, help="Number of seeds.")
@click.option("--json-out", type=click.Path(dir_okay=False), default=None,
              help="Write the full JSON report to this file.")
def verify(suite, seeds, json_out):
    """Run a named invariant suite; exit 3 on any violation."""
    if seeds < 1:
        raise click.UsageError("--seeds must be >= 1")
    report = run_suite(suite, range(seeds))
    payload = json.dumps(report, indent=1)
    if json_out:
        with open(json_out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    worst = max(report["cases"], key=lambda c: c["max_err"])
    click.echo(f"suite={report['suite']} cases={report['n_cases']} "
               f"ok={report['ok']} worst={worst['id']}:{worst['max_err']:.3e}")
    if not report["ok"]:
        for case in report["cases"]:
            if not case["ok"]:
                click.echo(f"FAIL {case['id']} err={case['max_err']:.3e} "
                           f"tol={case['threshold']:.1e}", err=True)
        sys.exit(3)


@main.command()
@click.option("--variants", default="kda,dplr", show_default=True)
@click.option("--t", "ts", default="256,1024", show_default=True,
              help="Comma-separated sequence lengths.")
@click.option("--c", "cs", default="64", show_default=True,
              help="Comma-separated chunk sizes.")
@click.option("--dh", default=32, show_default=True)
@click.option("--dv", default=32, show_default=True)
@click.option("--repeats", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write CSV here instead of stdout.")
@click.option("--plot", type=click.Path(dir_okay=False), default=None,
              help="Render the census figure to this file.")
def bench(variants, ts, cs, dh, dv, repeats, seed, out, plot):
    """Microbenchmark the kernels and emit the census CSV."""
    if repeats < 1:
        raise click.UsageError("--repeats must be >= 1")
    try:
        variant_list = [v.strip() for v in variants.split(",") if v.strip()]
        t_list = [int(x) for x in ts.split(",")]
        c_list = [int(x) for x in cs.split(",")]
        rows = bench_kernels(variant_list, t_list, c_list, dh, dv,
                             repeats=repeats, seed=seed)
    except ContractError as exc:
        raise click.UsageError(str(exc))
    csv = bench_rows_to_csv(rows)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(csv)
        click.echo(f"wrote {len(rows)} rows to {out}")
    else:
        click.echo(csv, nl=False)
    if plot:
        from .report import plot_bench
        click.echo(f"figure: {plot_bench(rows, plot)}")


@main.command()
@click.option("--c", "chunk", default=64, show_default=True)
@click.option("--dh", default=128, show_default=True)
@click.option("--t", "t_len", default=None, type=int,
              help="Evaluate both formulas at this length.")
@click.option("--crossover", is_flag=True, help="Print the crossover length.")
@click.option("--ratio", default=None, help="Hybrid ratio a:b for the cache model.")
@click.option("--plot", type=click.Path(dir_okay=False), default=None,
              help="Render the cost-curve figure to this file.")
def flops(chunk, dh, t_len, crossover, ratio, plot):
    """Evaluate the analytic FLOPs / cache cost model."""
    if t_len is not None:
        click.echo(f"flops_kda={flops_kda(t_len, chunk, dh)}")
        click.echo(f"flops_attn={flops_attn(t_len, dh)}")
    if crossover:
        click.echo(f"crossover={crossover_length(chunk, dh)}")
    if ratio:
        try:
            a, b = (int(x) for x in ratio.split(":"))
            frac = kv_cache_ratio((a, b))
        except (ValueError, ContractError) as exc:
            raise click.UsageError(f"bad --ratio {ratio!r}: {exc}")
        click.echo(f"kv_cache_ratio={frac} ({float(frac):.4f})")
    if plot:
        from .report import plot_flops
        t_max = max(t_len or 0, 2 * crossover_length(chunk, dh))
        click.echo(f"figure: {plot_flops(chunk, dh, t_max, plot)}")
    if t_len is None and not crossover and not ratio and not plot:
        raise click.UsageError("nothing to do: pass --t, --crossover, --ratio or --plot")


@main.command()
@click.argument("task", type=click.Choice(["palindrome", "mqar", "stack"]))
@click.option("--n", default=10, show_default=True, help="Instances to generate.")
@click.option("--seed", default=0, show_default=True)
@click.option("--vocab", default=32, show_default=True)
@click.option("--tokens", default=8, show_default=True, help="Palindrome length.")
@click.option("--pairs", default=4, show_default=True, help="MQAR pair count.")
@click.option("--queries", default=2, show_default=True, help="MQAR query count.")
@click.option("--stacks", default=4, show_default=True, help="Stack count.")
@click.option("--ops", default=20, show_default=True, help="Stack op count.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write JSONL here instead of stdout.")
def gen(task, n, seed, vocab, tokens, pairs, queries, stacks, ops, out):
    """Generate synthetic-task datasets as JSONL."""
    if n < 1:
        raise click.UsageError("--n must be >= 1")
    try:
        instances = []
        for i in range(n):
            s = seed + i
            if task == "palindrome":
                instances.append(gen_palindrome(tokens, vocab, s))
            elif task == "mqar":
                instances.append(gen_mqar(pairs, queries, vocab, s))
            else:
                instances.append(gen_stack(stacks, ops, vocab, s))
    except ContractError as exc:
        raise click.UsageError(str(exc))
    if out:
        write_jsonl(instances, out)
        click.echo(f"wrote {n} instances to {out}")
    else:
        for inst in instances:
            click.echo(json.dumps({"tokens": inst.tokens.tolist(),
                                   "targets": inst.targets.tolist(),
                                   "vocab_size": inst.vocab_size}))


@main.command()
@click.option("--pairs", default=4, show_default=True)
@click.option("--queries", default=2, show_default=True)
@click.option("--vocab", default=32, show_default=True)
@click.option("--pool", default=128, show_default=True,
              help="Number of training instances.")
@click.option("--d", default=32, show_default=True)
@click.option("--dk", default=32, show_default=True)
@click.option("--dv", default=32, show_default=True)
@click.option("--steps", default=1000, show_default=True)
@click.option("--lr", default=1e-2, show_default=True)
@click.option("--batch", default=4, show_default=True)
@click.option("--optimizer", type=click.Choice(["sgd", "adam"]), default="adam",
              show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--curve-out", type=click.Path(dir_okay=False), default=None,
              help="Write the loss curve CSV here.")
@click.option("--plot", type=click.Path(dir_okay=False), default=None,
              help="Render the loss-curve figure to this file.")
def train(pairs, queries, vocab, pool, d, dk, dv, steps, lr, batch, optimizer,
          seed, curve_out, plot):
    """Train the toy associative-recall model and report the loss curve."""
    try:
        cfg = TrainConfig(d=d, d_k=dk, d_v=dv, lr=lr, steps=steps,
                          batch_size=batch, seed=seed, optimizer=optimizer)
        instances = [gen_mqar(pairs, queries, vocab, seed + 1000 + i)
                     for i in range(pool)]
    except ContractError as exc:
        raise click.UsageError(str(exc))
    result = train_toy(instances, cfg)
    click.echo(f"initial_loss={result['initial_loss']:.4f} "
               f"final_loss={result['final_loss']:.4f} "
               f"final_accuracy={result['final_accuracy']:.3f}")
    if curve_out:
        write_curve_csv(result["curve"], curve_out)
        click.echo(f"curve: {curve_out}")
    if plot:
        from .report import plot_curve
        click.echo(f"figure: {plot_curve(result['curve'], plot)}")


@main.command()
@click.option("--t", "t_len", default=24, show_default=True)
@click.option("--d", default=8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--h", default=1e-5, show_default=True)
@click.option("--tol", default=1e-5, show_default=True)
def gradcheck(t_len, d, seed, h, tol):
    """Finite-difference check of the hand-derived backward pass."""
    rng = np.random.default_rng(seed)
    seq, gates = random_instance(rng, t_len, d, d)
    s0 = StateMatrix(0.1 * rng.standard_normal((d, d)).astype(tensor.dtype()))
    loss, loss_grad = squared_loss()
    report = fd_check(loss, loss_grad, seq, gates, s0, h=h)
    for name, err in sorted(report["slots"].items()):
        click.echo(f"{name}: max_rel_err={err:.3e}")
    click.echo(f"max_rel_err={report['max_rel_err']:.3e}")
    if not report["max_rel_err"] < tol:
        sys.exit(3)


if __name__ == "__main__":
    main()
