import json
from pathlib import Path

import numpy as np
import pytest

from kda_lab import (ContractError, StateMatrix, VariantKind, chunk_forward,
                     random_instance, recurrent_forward)
from kda_lab.vectors import load_vector, parse_vector, save_vector, vector_dict

GOLDEN = Path(__file__).parent / "data" / "golden_kda_T24_C8.json"


def test_golden_vector_regression():
    """Frozen expectations: both forward paths must reproduce the stored
    outputs of this instance bit-for-bit at tolerance."""
    seq, gates, s0, plan, exp_o, exp_s = parse_vector(load_vector(GOLDEN))
    o_rec, s_rec = recurrent_forward(VariantKind.KDA, seq, gates, s0)
    np.testing.assert_array_equal(o_rec, exp_o)
    np.testing.assert_array_equal(s_rec.s, exp_s)
    o_chk, s_chk = chunk_forward(seq, gates, s0, plan)
    np.testing.assert_allclose(o_chk, exp_o, atol=1e-10)
    np.testing.assert_allclose(s_chk.s, exp_s, atol=1e-10)


def test_vector_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    seq, gates = random_instance(rng, 10, 4, 3)
    s0 = StateMatrix(rng.standard_normal((4, 3)))
    obj = vector_dict(seq, gates, s0, C=4)
    path = tmp_path / "vec.json"
    save_vector(obj, path)
    seq2, gates2, s02, plan, exp_o, exp_s = parse_vector(load_vector(path))
    np.testing.assert_array_equal(seq.q, seq2.q)
    np.testing.assert_array_equal(gates.beta, gates2.beta)
    assert plan.C == 4 and exp_o.shape == (10, 3)


def test_vector_schema_validation(tmp_path):
    obj = json.loads(GOLDEN.read_text())
    del obj["beta"]
    with pytest.raises(ContractError):
        parse_vector(obj)
    obj2 = json.loads(GOLDEN.read_text())
    obj2["T"] = 99
    with pytest.raises(ContractError):
        parse_vector(obj2)
