import json

import numpy as np
from click.testing import CliRunner

from kda_lab.cli import main


def run(*args):
    return CliRunner().invoke(main, list(args))


def test_verify_ok_exit_zero():
    res = run("verify", "wy", "--seeds", "3")
    assert res.exit_code == 0
    assert "ok=True" in res.output


def test_verify_unknown_suite_usage_error():
    res = run("verify", "bogus")
    assert res.exit_code == 2


def test_verify_json_report(tmp_path):
    path = tmp_path / "report.json"
    res = run("verify", "ut", "--seeds", "2", "--json-out", str(path))
    assert res.exit_code == 0
    report = json.loads(path.read_text())
    assert report["ok"] is True and report["n_cases"] == 4


def test_bench_two_rows_and_plot(tmp_path):
    fig = tmp_path / "bench.png"
    res = run("bench", "--variants", "kda,dplr", "--t", "256", "--c", "64",
              "--repeats", "1", "--plot", str(fig))
    assert res.exit_code == 0
    lines = [l for l in res.output.splitlines() if l and not l.startswith("figure")]
    assert lines[0].startswith("variant,")
    assert len(lines) == 3
    assert fig.exists() and fig.stat().st_size > 0


def test_bench_zero_repeats_usage_error():
    assert run("bench", "--repeats", "0").exit_code == 2


def test_flops_outputs_and_figure(tmp_path):
    fig = tmp_path / "flops.png"
    res = run("flops", "--c", "64", "--dh", "128", "--crossover",
              "--ratio", "3:1", "--t", "64", "--plot", str(fig))
    assert res.exit_code == 0
    assert "crossover=497" in res.output
    assert "flops_kda=8126464" in res.output
    assert "flops_attn=1048576" in res.output
    assert "kv_cache_ratio=1/4" in res.output
    assert fig.exists() and fig.stat().st_size > 0


def test_flops_no_action_is_usage_error():
    assert run("flops").exit_code == 2


def test_gen_jsonl_deterministic(tmp_path):
    out1 = tmp_path / "a.jsonl"
    out2 = tmp_path / "b.jsonl"
    assert run("gen", "mqar", "--n", "5", "--seed", "3", "--out", str(out1)).exit_code == 0
    assert run("gen", "mqar", "--n", "5", "--seed", "3", "--out", str(out2)).exit_code == 0
    assert out1.read_text() == out2.read_text()
    rows = [json.loads(l) for l in out1.read_text().splitlines()]
    assert len(rows) == 5 and all(r["vocab_size"] == 32 for r in rows)


def test_gen_replay_clean():
    from kda_lab.tasks import TaskInstance, replay_mqar
    res = run("gen", "mqar", "--pairs", "4", "--queries", "2", "--n", "20",
              "--seed", "1")
    assert res.exit_code == 0
    for line in res.output.strip().splitlines():
        obj = json.loads(line)
        inst = TaskInstance(np.array(obj["tokens"]), np.array(obj["targets"]),
                            obj["vocab_size"])
        np.testing.assert_array_equal(replay_mqar(inst), inst.targets)


def test_train_command_with_outputs(tmp_path):
    curve = tmp_path / "curve.csv"
    fig = tmp_path / "loss.png"
    res = run("train", "--steps", "60", "--pool", "8", "--d", "8", "--dk", "8",
              "--dv", "8", "--batch", "2", "--curve-out", str(curve),
              "--plot", str(fig))
    assert res.exit_code == 0
    assert "final_loss=" in res.output
    assert curve.read_text().startswith("step,loss,masked_accuracy")
    assert fig.exists() and fig.stat().st_size > 0


def test_gradcheck_exit_zero():
    res = run("gradcheck", "--t", "8", "--d", "5")
    assert res.exit_code == 0
    assert "max_rel_err=" in res.output
