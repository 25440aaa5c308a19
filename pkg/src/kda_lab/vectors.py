"""Flat JSON test-vector format shared by all modules.

Top-level object: integers T, C, dk, dv; row-major 64-bit decimal arrays
q, k, v, log_alpha, beta, s0; optional expected_o / expected_s computed by
the recurrent reference.  One vector per file keeps goldens diffable.
"""

from __future__ import annotations

import json

import numpy as np

from . import tensor
from .errors import ContractError
from .recurrent import recurrent_forward
from .seqs import AttnSequence, ChunkPlan, GateSequence, StateMatrix, VariantKind


def vector_dict(seq: AttnSequence, gates: GateSequence, s0: StateMatrix,
                C: int, with_expected: bool = True) -> dict:
    obj = {
        "T": seq.T, "C": int(C), "dk": seq.d_k, "dv": seq.d_v,
        "q": seq.q.tolist(), "k": seq.k.tolist(), "v": seq.v.tolist(),
        "log_alpha": gates.log_alpha.tolist(), "beta": gates.beta.tolist(),
        "s0": s0.s.tolist(),
    }
    if with_expected:
        out, final = recurrent_forward(VariantKind.KDA, seq, gates, s0)
        obj["expected_o"] = out.tolist()
        obj["expected_s"] = final.s.tolist()
    return obj


def parse_vector(obj: dict):
    """Returns (seq, gates, s0, plan, expected_o, expected_s)."""
    for key in ("T", "C", "dk", "dv", "q", "k", "v", "log_alpha", "beta", "s0"):
        if key not in obj:
            raise ContractError(f"vector missing required field {key!r}")
    dt = tensor.dtype()
    seq = AttnSequence(q=np.asarray(obj["q"], dtype=dt),
                       k=np.asarray(obj["k"], dtype=dt),
                       v=np.asarray(obj["v"], dtype=dt))
    gates = GateSequence(log_alpha=np.asarray(obj["log_alpha"], dtype=dt),
                         beta=np.asarray(obj["beta"], dtype=dt))
    if seq.T != obj["T"] or seq.d_k != obj["dk"] or seq.d_v != obj["dv"]:
        raise ContractError("vector header disagrees with array shapes")
    s0 = StateMatrix(np.asarray(obj["s0"], dtype=dt))
    plan = ChunkPlan.for_length(obj["T"], obj["C"])
    exp_o = np.asarray(obj["expected_o"], dtype=dt) if "expected_o" in obj else None
    exp_s = np.asarray(obj["expected_s"], dtype=dt) if "expected_s" in obj else None
    return seq, gates, s0, plan, exp_o, exp_s


def save_vector(obj: dict, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def load_vector(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
