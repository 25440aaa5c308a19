"""Figure rendering for the report-producing CLI paths (file output only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .costmodel import crossover_length, flops_attn, flops_kda  # noqa: E402


def plot_bench(rows, path) -> str:
    """Matmul census vs sequence length, one line per variant."""
    fig, ax = plt.subplots(figsize=(6, 4))
    variants = sorted({r["variant"] for r in rows})
    for variant in variants:
        pts = sorted((r["T"], r["matmul_count"]) for r in rows
                     if r["variant"] == variant)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=variant)
    ax.set_xlabel("sequence length T")
    ax.set_ylabel("matmul invocations")
    ax.set_title("Matmul census by kernel")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_flops(C: int, d_h: int, T_max: int, path) -> str:
    """Analytic cost curves with the crossover length marked."""
    Ts = list(range(16, max(T_max, 32) + 1, 16))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(Ts, [flops_kda(T, C, d_h) for T in Ts], label="chunkwise kernel")
    ax.plot(Ts, [flops_attn(T, d_h) for T in Ts], label="full attention")
    t_star = crossover_length(C, d_h)
    if t_star <= max(Ts):
        ax.axvline(t_star, color="gray", linestyle="--",
                   label=f"crossover T*={t_star}")
    ax.set_xlabel("sequence length T")
    ax.set_ylabel("FLOPs per head")
    ax.set_title(f"Analytic cost model (C={C}, d_h={d_h})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_curve(curve, path) -> str:
    """Training loss and masked accuracy against step count."""
    steps = [c[0] for c in curve]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(steps, [c[1] for c in curve], color="tab:blue", label="loss")
    ax.set_xlabel("step")
    ax.set_ylabel("masked cross-entropy", color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(steps, [c[2] for c in curve], color="tab:orange", label="accuracy")
    ax2.set_ylabel("masked accuracy", color="tab:orange")
    ax2.set_ylim(-0.02, 1.02)
    ax.set_title("Toy training curve")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
