import numpy as np
import pytest

from kda_lab import (AttnSequence, ContractError, GateSequence, StateMatrix,
                     VariantKind, kda_as_dplr, random_instance,
                     recurrent_forward, state_norm_bound)


def _hand_kda(seq, gates, s0=None):
    """Independent dense-matrix transcription of the update rule."""
    d_k, d_v = seq.d_k, seq.d_v
    s = np.zeros((d_k, d_v)) if s0 is None else s0.s.copy()
    outs = []
    for t in range(seq.T):
        k = seq.k[t][:, None]
        trans = (np.eye(d_k) - gates.beta[t] * (k @ k.T)) @ np.diag(
            np.exp(gates.log_alpha[t]))
        s = trans @ s + gates.beta[t] * (k @ seq.v[t][None, :])
        outs.append(s.T @ seq.q[t])
    return np.array(outs)


def test_kda_matches_dense_transcription():
    rng = np.random.default_rng(3)
    seq, gates = random_instance(rng, 20, 6, 5)
    s0 = StateMatrix(rng.standard_normal((6, 5)))
    out, _ = recurrent_forward(VariantKind.KDA, seq, gates, s0)
    np.testing.assert_allclose(out, _hand_kda(seq, gates, s0), atol=1e-12)


def test_la_two_steps_by_hand():
    q = np.array([[1.0, 0.0], [0.0, 1.0]])
    k = np.array([[1.0, 1.0], [2.0, 0.0]])
    v = np.array([[3.0], [5.0]])
    seq = AttnSequence(q=q, k=k, v=v)
    out, final = recurrent_forward(VariantKind.LA, seq, None)
    # S1 = k1 v1^T; o1 = S1^T q1 = 3.  S2 adds k2 v2^T; o2 = S2^T q2 = 3.
    assert out[0, 0] == pytest.approx(3.0)
    assert out[1, 0] == pytest.approx(3.0)
    np.testing.assert_allclose(final.s, np.outer(k[0], v[0]) + np.outer(k[1], v[1]))


def test_variant_reductions():
    rng = np.random.default_rng(11)
    seq, gates = random_instance(rng, 24, 8, 8)
    s0 = StateMatrix(rng.standard_normal((8, 8)))

    ones = GateSequence(log_alpha=np.zeros_like(gates.log_alpha), beta=gates.beta)
    o1, _ = recurrent_forward(VariantKind.KDA, seq, ones, s0)
    o2, _ = recurrent_forward(VariantKind.DELTANET, seq, ones, s0)
    np.testing.assert_array_equal(o1, o2)

    const = GateSequence(log_alpha=np.repeat(gates.log_alpha[:, :1], 8, axis=1),
                         beta=gates.beta)
    o3, _ = recurrent_forward(VariantKind.KDA, seq, const, s0)
    o4, _ = recurrent_forward(VariantKind.GDN, seq, const, s0)
    np.testing.assert_allclose(o3, o4, atol=1e-13)

    # beta folded into values makes the low-rank form reproduce the gated rule
    seq2, dgates = kda_as_dplr(seq, gates)
    o5, _ = recurrent_forward(VariantKind.KDA, seq, gates, s0)
    o6, _ = recurrent_forward(VariantKind.DPLR, seq2, dgates, s0)
    np.testing.assert_allclose(o5, o6, atol=1e-13)


def test_gla_ignores_beta():
    rng = np.random.default_rng(5)
    seq, gates = random_instance(rng, 10, 4, 4)
    other = GateSequence(log_alpha=gates.log_alpha, beta=np.ones(10))
    o1, _ = recurrent_forward(VariantKind.GLA, seq, gates)
    o2, _ = recurrent_forward(VariantKind.GLA, seq, other)
    np.testing.assert_array_equal(o1, o2)


def test_gate_type_mismatch():
    rng = np.random.default_rng(0)
    seq, gates = random_instance(rng, 4, 3, 3)
    with pytest.raises(ContractError):
        recurrent_forward(VariantKind.DPLR, seq, gates)
    with pytest.raises(ContractError):
        recurrent_forward(VariantKind.KDA, seq, None)


def test_return_states_and_norm_bound():
    rng = np.random.default_rng(9)
    seq, gates = random_instance(rng, 32, 8, 8)
    out, final, states = recurrent_forward(VariantKind.KDA, seq, gates, None,
                                           return_states=True)
    assert len(states) == 33
    np.testing.assert_array_equal(states[-1], final.s)
    bound = state_norm_bound(seq, gates)
    for s in states:
        assert np.linalg.norm(s) <= bound + 1e-12


def test_norm_bound_requires_unit_keys():
    rng = np.random.default_rng(2)
    seq, gates = random_instance(rng, 8, 4, 4, normalized=False)
    with pytest.raises(ContractError):
        state_norm_bound(seq, gates)
