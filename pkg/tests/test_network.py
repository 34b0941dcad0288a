import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from gradcheck import check_instance
from unpaired_vsn.core import FormatError, FrameFeatureSequence, SummaryFeatureSequence, ValidationError
from unpaired_vsn.network import (
    KeyframeSelector,
    NetworkConfig,
    SummaryDiscriminator,
    discriminator_forward,
    fan_in,
    init_params,
    load_networks,
    module_arrays,
    num_keyframes,
    read_checkpoint,
    select_keyframes,
    selector_forward,
    write_checkpoint,
)


def zero_(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


def probs_to_scores(p):
    p = np.asarray(p, dtype=np.float64)
    return np.stack([np.zeros_like(p), np.log(p) - np.log1p(-p)], axis=1)


def test_zero_params_give_uniform_scores_and_first_indices():
    sel = zero_(KeyframeSelector(NetworkConfig(D=4)))
    v = FrameFeatureSequence("v", np.random.default_rng(0).standard_normal((8, 4)))
    scores, summary = selector_forward(sel, v, 3)
    assert np.all(scores == 0)
    assert summary.selected_indices.tolist() == [0, 1, 2]


def test_shape_contract():
    sel, _ = init_params(NetworkConfig(D=16), 0)
    v = FrameFeatureSequence("v", np.random.default_rng(1).standard_normal((32, 16)))
    scores, summary = selector_forward(sel, v, 4)
    assert scores.shape == (32, 2)
    assert summary.features.shape == (4, 16)


def test_select_top_two():
    assert select_keyframes(probs_to_scores([0.9, 0.1, 0.8, 0.7]), 2).tolist() == [0, 2]


def test_select_ties_go_to_smaller_index():
    assert select_keyframes(np.zeros((6, 2)), 3).tolist() == [0, 1, 2]


@given(st.lists(st.integers(-3, 3), min_size=1, max_size=25), st.data())
def test_select_matches_sort_oracle(levels, data):
    T = len(levels)
    k = data.draw(st.integers(1, T))
    scores = np.stack([np.zeros(T), np.array(levels, dtype=float)], axis=1)
    ranked = sorted(range(T), key=lambda i: (-levels[i], i))
    assert select_keyframes(scores, k).tolist() == sorted(ranked[:k])


def test_select_rejects_bad_k():
    with pytest.raises(ValidationError):
        select_keyframes(np.zeros((4, 2)), 5)


@pytest.mark.parametrize("T,ratio,k", [(1, 0.15, 1), (10, 0.15, 2), (20, 0.15, 3), (100, 0.15, 15), (7, 1.0, 7)])
def test_num_keyframes(T, ratio, k):
    assert num_keyframes(T, ratio) == k


def test_zero_discriminator_is_one_half():
    disc = zero_(SummaryDiscriminator(NetworkConfig(D=4)))
    assert discriminator_forward(disc, np.random.default_rng(0).standard_normal((5, 4))) == 0.5


@given(st.integers(0, 1000), st.integers(1, 20), st.sampled_from([1.0, 3.0, 1e3, 1e6]))
def test_discriminator_output_in_open_interval(seed, k, scale):
    _, disc = init_params(NetworkConfig(D=4), seed)
    x = np.random.default_rng(seed).standard_normal((k, 4)) * scale
    assert 0.0 < discriminator_forward(disc, x) < 1.0


def test_final_bias_is_monotone():
    _, disc = init_params(NetworkConfig(D=4), 3)
    s = np.random.default_rng(0).standard_normal((6, 4))
    before = discriminator_forward(disc, s)
    with torch.no_grad():
        disc.fc.bias += 1.0
    assert discriminator_forward(disc, s) > before


def test_discriminator_accepts_short_summaries():
    _, disc = init_params(NetworkConfig(D=4), 0)
    assert 0 < discriminator_forward(disc, np.ones((1, 4))) < 1


def test_init_is_seeded():
    cfg = NetworkConfig(D=8)
    a1, d1 = init_params(cfg, 5)
    a2, d2 = init_params(cfg, 5)
    a3, _ = init_params(cfg, 6)
    for m1, m2 in ((a1, a2), (d1, d2)):
        for (n, x), (_, y) in zip(module_arrays("m", m1).items(), module_arrays("m", m2).items()):
            assert x.tobytes() == y.tobytes(), n
    assert any(
        x.tobytes() != y.tobytes() for x, y in zip(module_arrays("m", a1).values(), module_arrays("m", a3).values())
    )


def test_init_std_matches_fan_in_scheme():
    cfg = NetworkConfig(D=64, encoder_channels=(64, 64, 128, 128))
    sel, disc = init_params(cfg, 0)
    pooled = []
    for net in (sel, disc):
        for m in net.modules():
            if isinstance(m, (torch.nn.Conv1d, torch.nn.ConvTranspose1d, torch.nn.Linear)):
                w = m.weight.detach().numpy().ravel()
                target = np.sqrt(2.0 / fan_in(m))
                if w.size >= 10_000:
                    assert abs(w.std() / target - 1) < 0.2
                pooled.append(w / target)
                assert np.all(m.bias.detach().numpy() == 0)
    pooled = np.concatenate(pooled)
    assert pooled.size >= 10_000
    assert abs(pooled.std() - 1) < 0.2


def test_interior_scores_shift_with_input():
    cfg = NetworkConfig(D=6)
    sel, _ = init_params(cfg, 1, dtype=torch.float64)
    stride = 2**cfg.encoder_depth
    x = torch.tensor(np.random.default_rng(2).standard_normal((192 + stride, 6)))
    with torch.no_grad():
        s1, _ = sel.decode(x[:192])
        s2, _ = sel.decode(x[stride:])
    margin = 64
    a = s1[margin + stride : 192 - margin]
    b = s2[margin : 192 - margin - stride]
    assert torch.allclose(a, b, atol=1e-10)


@given(st.integers(1, 70), st.integers(0, 50))
def test_selector_indices_are_valid(T, seed):
    sel, _ = init_params(NetworkConfig(D=3), seed)
    v = FrameFeatureSequence("v", np.random.default_rng(seed).standard_normal((T, 3)))
    _, s = selector_forward(sel, v)
    assert isinstance(s, SummaryFeatureSequence)
    assert s.k == num_keyframes(T, 0.15)
    assert s.selected_indices.max() < T


def test_selector_is_deterministic():
    sel, _ = init_params(NetworkConfig(D=5), 0)
    v = FrameFeatureSequence("v", np.random.default_rng(0).standard_normal((40, 5)))
    a, sa = selector_forward(sel, v)
    b, sb = selector_forward(sel, v)
    assert a.tobytes() == b.tobytes() and sa.features.tobytes() == sb.features.tobytes()


def test_wrong_dimension_rejected():
    sel, _ = init_params(NetworkConfig(D=5), 0)
    with pytest.raises(ValidationError):
        selector_forward(sel, FrameFeatureSequence("v", np.zeros((10, 4))))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_total_loss_gradients(seed):
    worst, checked, skipped = check_instance(seed)
    assert checked > 0 and skipped <= 0.2 * (checked + skipped)
    assert worst.max() < 1e-4


# high-curvature instances where the step-1e-3 difference is slightly above
# 1e-4; the error must fall as h^2, which rules out a wrong analytic gradient
@pytest.mark.parametrize("seed", [27, 74, 97])
def test_large_fd_errors_are_truncation(seed):
    coarse = check_instance(seed, 1e-3)[0].max()
    fine = check_instance(seed, 1e-4)[0].max()
    assert fine < coarse / 50
    assert fine < 1e-5


def test_config_validation():
    with pytest.raises(ValidationError):
        NetworkConfig(kernel_size=4)
    with pytest.raises(ValidationError):
        NetworkConfig(encoder_channels=(8, 8), encoder_depth=3)
    with pytest.raises(ValidationError):
        NetworkConfig(k_ratio=0)


def test_checkpoint_round_trip(tmp_path):
    cfg = NetworkConfig(D=4, encoder_channels=(4, 8), encoder_depth=2)
    sel, disc = init_params(cfg, 0)
    arrays = {**module_arrays("selector", sel), **module_arrays("discriminator", disc)}
    p = tmp_path / "c.uvsc"
    write_checkpoint(p, {"network": cfg.to_dict()}, arrays)
    meta, back = read_checkpoint(p)
    assert meta["network"]["encoder_channels"] == [4, 8]
    assert all(back[k].tobytes() == v.tobytes() for k, v in arrays.items())
    sel2, _, _ = load_networks(p)
    x = FrameFeatureSequence("v", np.ones((9, 4)))
    assert selector_forward(sel, x)[0].tobytes() == selector_forward(sel2, x)[0].tobytes()


def test_checkpoint_corruption(tmp_path):
    cfg = NetworkConfig(D=4)
    sel, disc = init_params(cfg, 0)
    p = tmp_path / "c.uvsc"
    write_checkpoint(p, {"network": cfg.to_dict()}, module_arrays("selector", sel))
    data = p.read_bytes()
    p.write_bytes(data[:-3])
    with pytest.raises(FormatError):
        read_checkpoint(p)
    p.write_bytes(b"NOPE" + data[4:])
    with pytest.raises(FormatError):
        read_checkpoint(p)


def test_checkpoint_rejects_non_finite(tmp_path):
    with pytest.raises(ValidationError):
        write_checkpoint(tmp_path / "c.uvsc", {}, {"w": np.array([np.inf], dtype=np.float32)})
