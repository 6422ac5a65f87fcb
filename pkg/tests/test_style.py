import math

import numpy as np
import pytest
import torch

from attredit.networks import AttrEditModel, compact_config
from attredit.style import (
    StyleConfig,
    StyleControllers,
    mutual_information_loss,
    sample_style_controllers,
)
from attredit.training import TrainConfig, report_line, train_loop
from helpers import small_dataset

LN3 = 1.0986122886681098
HAND_MI = 0.6161861394238171  # -ln 0.9 - ln 0.6

NAMES = ("Eyeglasses", "Bangs", "Pale_Skin", "Mouth_Open")


def test_single_style_is_degenerate():
    config = StyleConfig((1, 1, 1))
    draws = sample_style_controllers(config, 64, seed=0)
    assert not draws.indices.any()


def test_uniform_category_frequencies():
    config = StyleConfig((3,))
    draws = sample_style_controllers(config, 30_000, seed=1)
    freqs = np.bincount(draws.indices[:, 0], minlength=3) / 30_000
    assert ((freqs >= 0.32) & (freqs <= 0.35)).all()


def test_sampling_deterministic_under_seed():
    config = StyleConfig((3, 1, 2))
    a = sample_style_controllers(config, 100, seed=9)
    b = sample_style_controllers(config, 100, seed=9)
    assert np.array_equal(a.indices, b.indices)


def test_invalid_configs_rejected():
    with pytest.raises(ValueError):
        StyleConfig((0,))
    config = StyleConfig((2,))
    with pytest.raises(ValueError):
        StyleControllers(np.array([[2]]), config)  # out of range
    with pytest.raises(ValueError):
        StyleControllers(np.array([[0, 0]]), config)  # wrong width


def test_onehot_layout():
    config = StyleConfig((3, 2))
    controllers = StyleControllers(np.array([[2, 0], [1, 1]]), config)
    onehot = controllers.onehot()
    assert onehot.shape == (2, 5)
    assert onehot.tolist() == [
        [0.0, 0.0, 1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 1.0],
    ]


def test_decoder_channel_arithmetic_includes_styles():
    counts = (3, 1, 1, 1)
    config = compact_config(32, 4, base=8, style_counts=counts)
    assert config.decoder_in_channels()[0] == config.bottleneck_channels + 4 + 6
    model = AttrEditModel(config, NAMES, init_seed=0)
    assert model.decoder.layers[0][0].in_channels == config.decoder_in_channels()[0]


def test_decode_with_style_matches_contracts():
    counts = (3, 1, 1, 1)
    config = compact_config(32, 4, base=8, style_counts=counts)
    model = AttrEditModel(config, NAMES, init_seed=0)
    model.eval()
    x = torch.randn(2, 3, 32, 32).clamp(-1, 1)
    attrs = torch.rand(2, 4)
    controllers = sample_style_controllers(StyleConfig(counts), 2, seed=0)
    with torch.no_grad():
        z = model.encode(x)
        out = model.decode_with_style(z, controllers, attrs)
    assert out.shape == x.shape
    assert out.abs().max().item() < 1.0
    with torch.no_grad():
        again = model.decode_with_style(z, controllers, attrs)
    assert torch.equal(out, again)


def test_degenerate_styles_still_decode():
    config = compact_config(32, 4, base=8, style_counts=(1, 1, 1, 1))
    model = AttrEditModel(config, NAMES, init_seed=1)
    controllers = sample_style_controllers(StyleConfig((1, 1, 1, 1)), 2, seed=0)
    out = model.decode_with_style(
        model.encode(torch.randn(2, 3, 32, 32)), controllers, torch.rand(2, 4)
    )
    assert out.shape == (2, 3, 32, 32)
    assert model.critic.style_head is None  # no learnable styles anywhere


def test_style_free_model_rejects_styles():
    config = compact_config(32, 4, base=8)
    model = AttrEditModel(config, NAMES, init_seed=0)
    controllers = sample_style_controllers(StyleConfig((2, 1, 1, 1)), 2, seed=0)
    with pytest.raises(ValueError):
        model.decode_with_style(
            model.encode(torch.randn(2, 3, 32, 32)), controllers, torch.rand(2, 4)
        )
    with pytest.raises(ValueError):
        model.predict_style(torch.randn(2, 3, 32, 32))


def test_style_model_requires_styles():
    config = compact_config(32, 4, base=8, style_counts=(2, 1, 1, 1))
    model = AttrEditModel(config, NAMES, init_seed=0)
    with pytest.raises(ValueError):
        model.edit(torch.randn(2, 3, 32, 32), torch.rand(2, 4))


def test_zero_weight_style_head_is_uniform():
    counts = (3, 1, 2, 1)
    config = compact_config(32, 4, base=8, style_counts=counts)
    model = AttrEditModel(config, NAMES, init_seed=2)
    final = model.critic.style_head[-1]
    with torch.no_grad():
        final.weight.zero_()
        final.bias.zero_()
        preds = model.predict_style(torch.randn(2, 3, 32, 32))
    assert len(preds) == 4
    assert torch.allclose(preds[0], torch.full((2, 3), 1.0 / 3.0))
    assert torch.allclose(preds[2], torch.full((2, 2), 0.5))
    for p in preds:
        assert torch.allclose(p.sum(dim=1), torch.ones(2), atol=1e-5)


def test_mutual_information_reference_values():
    config = StyleConfig((3,))
    controllers = StyleControllers(np.array([[0], [1]]), config)
    uniform = [torch.full((2, 3), 1.0 / 3.0)]
    assert mutual_information_loss(uniform, controllers).item() == pytest.approx(
        LN3, abs=1e-6
    )
    saturated = [torch.tensor([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])]
    assert mutual_information_loss(saturated, controllers).item() < 1e-5

    config2 = StyleConfig((2, 2))
    controllers2 = StyleControllers(np.array([[0, 1]]), config2)
    preds2 = [torch.tensor([[0.9, 0.1]]), torch.tensor([[0.4, 0.6]])]
    assert mutual_information_loss(preds2, controllers2).item() == pytest.approx(
        HAND_MI, abs=1e-6
    )


def test_mutual_information_masking_and_bounds():
    config = StyleConfig((3, 2))
    controllers = sample_style_controllers(config, 16, seed=3)
    rng = torch.Generator().manual_seed(0)
    logits = [torch.randn(16, 3, generator=rng), torch.randn(16, 2, generator=rng)]
    preds = [torch.softmax(l, dim=1) for l in logits]
    full = mutual_information_loss(preds, controllers)
    assert full.item() >= 0.0
    active = torch.zeros(16, 2)
    masked = mutual_information_loss(preds, controllers, active=active)
    assert masked.item() == 0.0
    some = torch.ones(16, 2)
    assert mutual_information_loss(preds, controllers, active=some).item() == (
        pytest.approx(full.item())
    )
    with pytest.raises(ValueError):
        mutual_information_loss(preds[:1], controllers)


def test_style_training_runs_and_reports_mi(small_synthetic):
    arch = compact_config(32, 4, base=8, style_counts=(3, 1, 1, 1))
    # batch 32 matches the regime where the [0, sum ln n_i] band is claimed;
    # tiny batches can transiently exceed it through sampling noise alone
    config = TrainConfig(max_steps=12, batch_size=32, seed=4, checkpoint_every=0)
    state = train_loop(config, small_synthetic, arch)
    g_reports = [r for _, p, r in state.reports if p == "g"]
    dc_reports = [r for _, p, r in state.reports if p == "dc"]
    assert all("mi" in r.extras for r in g_reports)
    assert all("mi" in r.extras for r in dc_reports)
    bound = StyleConfig((3, 1, 1, 1)).max_nll
    for r in g_reports + dc_reports:
        assert 0.0 <= r.extras["mi"] <= bound + 1e-6


def test_base_training_is_unchanged_by_style_machinery(small_synthetic):
    # with the extension off no style randomness is drawn and no report
    # mentions styling; two runs agree bit for bit
    arch = compact_config(32, 4, base=8)
    config = TrainConfig(max_steps=12, batch_size=4, seed=5, checkpoint_every=0)
    runs = [train_loop(config, small_synthetic, arch) for _ in range(2)]
    lines = [
        [report_line(s, p, r) for s, p, r in run.reports] for run in runs
    ]
    assert lines[0] == lines[1]
    assert all("mi" not in r.extras for _, _, r in runs[0].reports)
    before = runs[0].rng.style.bit_generator.state
    assert before == runs[1].rng.style.bit_generator.state  # stream untouched
