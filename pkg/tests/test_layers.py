"""Tests for modules, spectral normalisation and the attention block."""

import numpy as np
import pytest

from app.errors import ContractError, DimensionError
from app.nn import Conv1d, IndexEmbedding, Linear, MainBlock, SelfAttention1D
from app.tensor import Tensor, backward, make_rng, no_grad, ops


def test_spectral_norm_bounds_top_singular_value(rng):
    """With enough power iterations the normalised weight has σ₁ ≈ 1."""
    conv = Conv1d(6, 5, 3, rng, spectral=True)
    conv.weight.data *= 7.0

    weight = conv.effective_weight(iterations=100).data
    sigma = np.linalg.svd(weight.reshape(5, -1).astype(np.float64), compute_uv=False)[0]

    assert sigma == pytest.approx(1.0, abs=1e-3)


def test_spectral_state_frozen_at_inference(rng):
    """The power-iteration vector only advances while gradients are recorded."""
    layer = Linear(4, 3, rng, spectral=True)
    before = layer.sn.u.copy()
    with no_grad():
        layer(Tensor(np.ones((2, 4))))
    np.testing.assert_array_equal(layer.sn.u, before)

    layer(Tensor(np.ones((2, 4))))
    assert not np.array_equal(layer.sn.u, before)


def test_state_dict_roundtrip_and_names(rng):
    """Parameters and SN buffers are named by attribute path and reload exactly."""
    block = MainBlock(8, rng)
    state = block.state_dict()

    assert "conv.weight" in state
    assert "conv.sn_u" in state
    assert "attention.gamma" in state
    other = MainBlock(8, make_rng(99, "other"))
    other.load_state_dict(state)
    for name, value in other.state_dict().items():
        np.testing.assert_array_equal(value, state[name])


def test_load_state_dict_rejects_mismatch(rng):
    """Missing keys and wrong shapes are refused."""
    conv = Conv1d(2, 3, 1, rng)
    with pytest.raises(ContractError):
        conv.load_state_dict({"weight": np.zeros((3, 2, 1))})
    with pytest.raises(DimensionError):
        conv.load_state_dict({"weight": np.zeros((3, 2, 2)), "bias": np.zeros(3)})


def test_freeze_stops_gradients(rng):
    """Frozen modules produce results outside the graph."""
    layer = Linear(3, 2, rng)
    layer.freeze()

    out = layer(Tensor(np.ones((1, 3))))

    assert not out.requires_grad


def test_embedding_scatters_gradient(rng):
    """Only looked-up rows receive an adjoint."""
    embedding = IndexEmbedding(5, 3, rng)

    backward(ops.sum(embedding([1, 1, 3])))

    np.testing.assert_allclose(embedding.table.grad[1], 2.0)
    np.testing.assert_allclose(embedding.table.grad[3], 1.0)
    np.testing.assert_allclose(embedding.table.grad[[0, 2, 4]], 0.0)


def test_main_block_is_identity_extension_at_zero_gamma(rng):
    """gamma starts at 0, so m(x) equals f(x) at initialisation."""
    block = MainBlock(8, rng)
    x = Tensor(rng.normal(size=(2, 8, 16)))

    with no_grad():
        np.testing.assert_allclose(block(x).data, block.f(x).data, rtol=1e-6)


def test_gamma_receives_gradient_at_zero(rng):
    """The attention branch stays in the graph while gamma is zero."""
    block = MainBlock(8, rng)
    x = Tensor(rng.normal(size=(2, 8, 16)))

    backward(ops.sum(block(x) * block(x)))

    assert block.attention.gamma.grad is not None
    assert float(block.attention.gamma.grad) != 0.0


def test_block_without_attention_has_no_gamma(rng):
    """Self-attention can be switched off."""
    block = MainBlock(8, rng, self_attention=False)

    assert block.attention is None
    assert all("gamma" not in name for name, _ in block.named_parameters())


def test_attention_map_is_row_stochastic(rng):
    """Each query distributes unit weight over the time steps."""
    attention = SelfAttention1D(16, rng)
    with no_grad():
        weights = attention.attention_map(Tensor(rng.normal(size=(2, 16, 12)))).data

    assert weights.shape == (2, 12, 12)
    np.testing.assert_allclose(weights.sum(axis=-1), 1.0, rtol=1e-5)


def test_main_block_checks_channels(rng):
    """Inputs with the wrong channel count are rejected."""
    block = MainBlock(8, rng)
    with pytest.raises(DimensionError):
        block(Tensor(np.ones((1, 4, 8))))
