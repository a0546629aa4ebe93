import math

import numpy as np
import pytest

import selfhdr


def test_linearize_example():
    out = selfhdr.linearize(np.full((2, 2, 3), 0.5), ev=-2.0)
    assert out[0, 0, 0] == pytest.approx(0.5**2.2 * 4.0, abs=1e-12)


def test_tonemap_endpoints():
    out = selfhdr.tonemap(np.array([[[0.0, 1.0, 0.5]]]))
    assert out[0, 0, 0] == 0.0
    assert out[0, 0, 1] == pytest.approx(1.0, abs=1e-15)
    assert out[0, 0, 2] == pytest.approx(math.log1p(2500.0) / math.log1p(5000.0))


def test_fusion_weights_sum_to_one():
    rng = np.random.default_rng(0)
    a1, a2, a3 = selfhdr.fusion_weights(rng.random((8, 8, 3)))
    np.testing.assert_allclose(a1 + a2 + a3, 1.0, atol=1e-12)


def test_static_scene_color_component_matches_ground_truth():
    scene = selfhdr.synthesize_scene("none", size=32, seed=4)
    sup = selfhdr.build_supervision(scene["frames"], scene["evs"])
    assert sup["y_color"].shape == (32, 32, 3)
    assert selfhdr.psnr_u(sup["y_color"], scene["ground_truth"]) > 30.0


def test_flow_recovers_shift():
    scene = selfhdr.synthesize_scene("none", size=64, seed=12)
    ref = scene["frames"][1]
    moved = selfhdr.warp(ref, np.stack([np.full((64, 64), -3.0), np.zeros((64, 64))], axis=-1))
    flow = selfhdr.estimate_flow(ref, moved)
    assert np.abs(flow[8:-8, 8:-8, 0] - 3.0).mean() < 0.5


def test_model_infer_and_roundtrip(tmp_path):
    scene = selfhdr.synthesize_scene("rect", size=32, seed=1)
    model = selfhdr.build_model(seed=3)
    out = model.infer(scene["frames"], scene["evs"])
    assert out.shape == (32, 32, 3)
    assert out.min() >= 0.0 and out.max() <= 1.0
    path = tmp_path / "model.bin"
    model.save(path)
    assert selfhdr.Model.load(path).parameter_hash() == model.parameter_hash()


def test_rgbe_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.random((4, 5, 3))
    selfhdr.write_rgbe(tmp_path / "x.hdr", img)
    back = selfhdr.read_rgbe(tmp_path / "x.hdr")
    # One shared exponent per pixel: error is bounded by the largest channel.
    bound = img.max(axis=-1, keepdims=True) / 128.0
    assert np.all(np.abs(back - img) <= bound)


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        selfhdr.warp(np.zeros((4, 4, 3)), np.zeros((4, 5, 2)))
