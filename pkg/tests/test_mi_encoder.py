"""Multiple-instance encoder: invariances, attention, gradient flow."""

import numpy as np
import pytest

from control_studio.autodiff import Value, backward, sum_all
from control_studio.models import ModelConfig, MiEncoder, positional_encoding
from control_studio.models.mi_encoder import LatentGaussian
from control_studio.autodiff.gradcheck import grad_check_params
from control_studio.paf import DrivingSet, DrivingSetError, DrivingValue


@pytest.fixture()
def cfg():
    return ModelConfig.build("micvae", phone_vocab=12, speaker_count=4, style_count=2)


@pytest.fixture()
def encoder(cfg):
    return MiEncoder(np.random.default_rng(42), cfg)


def bag(*triples):
    return DrivingSet([DrivingValue(p, s, v) for p, s, v in triples])


def test_positional_encoding_basics():
    enc = positional_encoding(0, 8)
    np.testing.assert_allclose(enc, [0, 1] * 4, atol=1e-15)
    enc1 = positional_encoding(1, 8)
    assert enc1[0] == pytest.approx(np.sin(1.0))  # 0.8414709848
    assert np.all(np.abs(positional_encoding(123, 8)) <= 1.0)
    with pytest.raises(ValueError):
        positional_encoding(1, 7)


def test_feature_encoding_rows_distinct_and_stable(encoder):
    rows = encoder.stream_enc.data
    assert rows.shape[0] == 3
    assert not np.allclose(rows[0], rows[1])
    assert not np.allclose(rows[1], rows[2])
    np.testing.assert_array_equal(rows[0], encoder.stream_enc.data[0])


def test_embed_instance_nonnegative_and_stream_sensitive(encoder):
    h1, _ = encoder.embed_instances(bag((2, "f0", 0.5)), 8)
    h2, _ = encoder.embed_instances(bag((2, "energy", 0.5)), 8)
    assert (h1.data >= 0).all()
    assert not np.allclose(h1.data, h2.data)


def test_embed_instance_zero_projection_gives_zero(encoder):
    encoder.instance_proj.w.value.data = np.zeros_like(encoder.instance_proj.w.data)
    h, _ = encoder.embed_instances(bag((0, "f0", 1.0)), 4)
    np.testing.assert_array_equal(h.data, np.zeros_like(h.data))


def test_position_outside_sentence_rejected(encoder):
    with pytest.raises(DrivingSetError):
        encoder.encode(bag((9, "f0", 0.1)), 5)


def test_duplicate_slot_rejected():
    with pytest.raises(DrivingSetError):
        bag((1, "f0", 0.1), (1, "f0", 0.4))


def test_gated_score_zero_instance(encoder):
    # h = 0 -> tanh(0) * sigm(0) = 0 -> score 0 for every instance
    h = Value(np.zeros((3, encoder.cfg.instance_dim)))
    weights, pooled = encoder.attend(h)
    np.testing.assert_allclose(weights.data, np.full(3, 1 / 3), atol=1e-12)
    np.testing.assert_allclose(pooled.data, np.zeros_like(pooled.data), atol=1e-15)


def test_attention_weights_properties(encoder):
    ds = bag((0, "f0", 0.3), (1, "energy", -0.2), (2, "duration", 1.1), (3, "f0", 0.0))
    _, weights = encoder.encode(ds, 6)
    assert weights.shape == (4,)
    assert (weights >= 0).all() and (weights <= 1).all()
    assert weights.sum() == pytest.approx(1.0, abs=1e-9)


def test_single_instance_gets_weight_one(encoder):
    lg, weights = encoder.encode(bag((2, "energy", 0.7)), 5)
    np.testing.assert_allclose(weights, [1.0])


def test_equal_scores_average_values(encoder):
    # identical instances -> identical scores -> uniform weights
    h = Value(np.tile(np.random.default_rng(0).normal(size=encoder.cfg.instance_dim), (4, 1)))
    weights, pooled = encoder.attend(h)
    np.testing.assert_allclose(weights.data, np.full(4, 0.25), atol=1e-12)


def test_permutation_invariance(encoder):
    rng = np.random.default_rng(0)
    for trial in range(20):
        t = int(rng.integers(4, 12))
        k = int(rng.integers(1, 3 * t))
        slots = rng.choice(3 * t, size=k, replace=False)
        values = [DrivingValue(int(i // 3), ("f0", "energy", "duration")[i % 3],
                               float(rng.normal())) for i in slots]
        base_lg, _ = encoder.encode(DrivingSet(values), t)
        for _ in range(5):
            perm = [values[i] for i in rng.permutation(k)]
            lg, _ = encoder.encode(DrivingSet(perm), t)
            np.testing.assert_array_equal(lg.mu, base_lg.mu)
            np.testing.assert_array_equal(lg.sigma, base_lg.sigma)


def test_cardinality_invariance_and_nondegeneracy(encoder):
    t = 8
    rng = np.random.default_rng(1)
    previous = None
    for k in (0, 1, 4, 3 * t):
        slots = [(int(i // 3), int(i % 3)) for i in rng.choice(3 * t, size=k, replace=False)]
        ds = DrivingSet([DrivingValue(p, ("f0", "energy", "duration")[s], float(rng.normal()))
                         for p, s in slots])
        lg, weights = encoder.encode(ds, t)
        assert lg.mu.shape == (encoder.cfg.latent_dim,)
        assert (lg.sigma > 0).all()
        if previous is not None:
            assert not np.allclose(lg.mu, previous.mu)
        previous = lg


def test_empty_bag_is_shared_learned_latent(encoder):
    lg1, w1 = encoder.encode(DrivingSet(), 5)
    lg2, _ = encoder.encode(DrivingSet(), 17)
    np.testing.assert_array_equal(lg1.mu, lg2.mu)  # same for every sentence
    assert len(w1) == 0
    expected_mu = encoder.empty_bag.data @ encoder.mu_proj.w.data
    np.testing.assert_allclose(lg1.mu, expected_mu, atol=1e-12)


def test_gradient_flows_only_to_driven_stream_rows(encoder):
    ds = bag((0, "f0", 0.4), (2, "f0", -0.1))
    mu, logvar, _ = encoder.encode_values(ds, 4)
    backward(sum_all(mu))
    grad = encoder.stream_enc.grad
    assert np.abs(grad[0]).max() > 0  # f0 row updated
    np.testing.assert_array_equal(grad[1], np.zeros_like(grad[1]))
    np.testing.assert_array_equal(grad[2], np.zeros_like(grad[2]))
    encoder.stream_enc.zero_grad()


def test_end_to_end_grad_check(encoder):
    ds = bag((0, "f0", 0.4), (1, "energy", -0.8), (3, "duration", 0.2))

    def loss():
        mu, logvar, _ = encoder.encode_values(ds, 5)
        return sum_all(mu) + sum_all(logvar)

    err = grad_check_params(loss, list(encoder.named_params().values()))
    assert err < 1e-5


def test_per_dimension_score_variant(cfg):
    from dataclasses import replace
    enc = MiEncoder(np.random.default_rng(3), replace(cfg, per_dim_scores=True))
    ds = bag((0, "f0", 0.4), (1, "energy", -0.8), (3, "duration", 0.2))
    lg, weights = enc.encode(ds, 5)
    assert weights.shape == (3, cfg.value_dim)
    np.testing.assert_allclose(weights.sum(axis=0), np.ones(cfg.value_dim), atol=1e-9)
    assert (lg.sigma > 0).all()

    base, _ = enc.encode(ds, 5)
    perm, _ = enc.encode(DrivingSet(list(reversed(ds.values))), 5)
    np.testing.assert_array_equal(base.mu, perm.mu)


def test_latent_gaussian_invariants():
    with pytest.raises(ValueError):
        LatentGaussian(np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        LatentGaussian(np.array([np.nan, 0.0]), np.ones(2))
