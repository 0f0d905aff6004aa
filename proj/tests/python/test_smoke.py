"""Smoke tests for the python module: imports, core ops, tiny end-to-end run."""

import math
import os

import numpy as np
import pytest

import posellm


def test_version_and_vocab():
    assert posellm.__version__
    assert posellm.vocab_size() == 50
    ids = posellm.tokenize("x=0.500")
    assert len(ids) == 7
    assert posellm.detokenize(ids) == "x=0.500"


def test_catalog_and_prompts():
    names = posellm.keypoint_names()
    assert len(names) == 17
    assert names[0] == "nose"
    assert posellm.keypoint_index("left wrist") == 9
    prompt = posellm.build_prompt(0)
    assert "Where is the nose of this person? Answer:" in prompt


def test_coordinate_codec():
    assert posellm.serialize_coords(0.5, 0.25) == "x=0.500,y=0.250"
    assert posellm.parse_coords("x=0.500,y=0.250") == (0.5, 0.25)
    assert posellm.parse_coords("x=0.5") is None
    with pytest.raises(ValueError):
        posellm.tokenize("ZEBRA")


def test_gelu_matches_erf_reference():
    x = np.linspace(-4.0, 4.0, 101)
    got = posellm.gelu(x)
    ref = np.array([0.5 * v * (1.0 + math.erf(v / math.sqrt(2.0))) for v in x])
    assert np.max(np.abs(got - ref)) < 1e-12
    assert posellm.gelu(np.zeros(3)).tolist() == [0.0, 0.0, 0.0]


def test_generate_sample_is_deterministic():
    a = posellm.generate_sample(7, image_size=32)
    b = posellm.generate_sample(7, image_size=32)
    assert a["image"].shape == (32, 32)
    assert a["keypoints"].shape == (17, 2)
    assert np.array_equal(a["image"], b["image"])
    assert np.array_equal(a["keypoints"], b["keypoints"])
    assert a["head_size"] > 0


def test_connector_shapes_and_zero_path():
    conn = posellm.Connector(d_vis=8, d_hid=16, d_out=8, mode="mlp", seed=3)
    out = conn(np.zeros((5, 8)))
    assert out.shape == (5, 8)
    assert np.all(out == 0.0)  # zero input, zero biases

    batch = conn(np.random.default_rng(0).normal(size=(2, 5, 8)))
    assert batch.shape == (2, 5, 8)

    linear = posellm.Connector(d_vis=8, d_out=8, mode="linear", seed=3)
    assert set(linear.weights().keys()) == {"conn.w", "conn.b"}


def test_vision_encoder_tokens():
    enc = posellm.VisionEncoder(image_size=32, patch_size=8, depth=1, d_vis=16, heads=4, seed=1)
    tokens = enc(np.zeros((32, 32)))
    assert tokens.shape == (16, 16)
    names = [n for n, _ in enc.parameters()]
    assert any("block0.attn.wq" in n for n in names)


def test_micro_pipeline(tmp_path):
    overrides = {
        "generator.image_size": "16",
        "data.count": "4",
        "data.split_ratio": "0.75",
        "encoder.patch_size": "4",
        "encoder.depth": "1",
        "encoder.d_vis": "16",
        "encoder.mlp_ratio": "2",
        "decoder.d_model": "16",
        "decoder.depth": "1",
        "decoder.mlp_ratio": "2",
        "train.epochs": "1",
        "train.micro_batch": "2",
        "train.accumulation_steps": "1",
        "train.lora_r": "2",
        "train.lora_alpha": "2",
        "metrics.medium_min": "16",
        "metrics.medium_max": "150",
    }
    data = posellm.generate(str(tmp_path / "data"), seed=0, overrides=overrides)
    assert data["train_count"] == 3
    assert data["val_count"] == 1
    samples = posellm.read_dataset(data["train_path"])
    assert len(samples) == 3

    run = posellm.train(data["train_path"], str(tmp_path / "run"), overrides=overrides)
    assert os.path.exists(run["checkpoint"])
    assert run["steps"] >= 1

    report = posellm.evaluate(run["checkpoint"], data["val_path"], str(tmp_path / "eval"),
                              overrides=overrides)
    assert 0.0 <= report["AP"] <= 100.0
    assert report["queries"] == 17
    assert os.path.exists(report["predictions_path"])


def test_expressivity_ablation_quick():
    r = posellm.expressivity_ablation(d=6, d_hid=24, n_tokens=256, steps=400, seed=5)
    assert r["linear_mse"] > 0
    assert r["mlp_mse"] > 0
