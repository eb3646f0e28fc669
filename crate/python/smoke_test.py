"""Smoke test for the custnetgc_py extension module.

Build the module and place it next to this script first:

    cargo build --release -p custnetgc-python
    cp target/release/libcustnetgc_py.so python/custnetgc_py.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import custnetgc_py as cg


def check_features():
    sr = 8000
    tone = [0.5 * math.sin(2 * math.pi * 440 * i / sr) for i in range(sr)]
    clip = cg.preprocess_audio(tone, sr)
    assert len(clip) == 3 * sr
    assert abs(max(abs(v) for v in clip) - 0.99) < 1e-9

    assert abs(cg.mel_to_hz(cg.hz_to_mel(1000.0)) - 1000.0) < 1e-9

    mag = cg.stft_magnitude(clip, sr, n_fft=256, hop=128)
    assert len(mag) == 129
    peak = max(range(len(mag)), key=lambda k: mag[k][10])
    assert abs(peak * sr / 256 - 440) < sr / 256

    h, p = cg.hpss(clip, sr, n_fft=256, hop=128, h_kernel=9, p_kernel=9)
    for k in range(len(mag)):
        for t in range(len(mag[0])):
            assert abs(h[k][t] + p[k][t] - mag[k][t]) < 1e-9

    lm = cg.log_mel(clip, sr, n_mels=40)
    assert len(lm) == 40


def check_metrics():
    m = cg.confusion_metrics(80, 78, 4, 0)
    assert m["recall"] == 1.0
    assert abs(m["accuracy"] - 158 / 162) < 1e-12
    assert cg.roc_auc([0.9, 0.8, 0.3, 0.1], ["PD", "PD", "HC", "HC"]) == 1.0
    try:
        cg.roc_auc([0.5], ["PD"])
    except ValueError:
        pass
    else:
        raise AssertionError("single-class AUC should raise")


def check_pipeline():
    with tempfile.TemporaryDirectory() as tmp:
        manifest = cg.write_synthetic_dataset(os.path.join(tmp, "data"), n_clips=12, seed=3)
        cfg = cg.RunConfig.from_toml(
            'schema = "custnetgc.run/1"\n'
            "[image]\nsize = [32, 32]\n"
            "[net]\nnum_middle_blocks = 1\nwidth_divisor = 8\n"
            "[net.train]\nepochs = 2\n"
            "[boost]\nn_rounds = 5\n"
            "[split]\ntrain_fraction = 0.67\n"
        )
        cfg.manifest = manifest
        cfg.out_dir = os.path.join(tmp, "out")
        assert cg.RunConfig.from_toml(cfg.to_toml()).config_hash() == cfg.config_hash()

        metrics = json.loads(cg.run_all(cfg))
        assert metrics["tp"] + metrics["tn"] + metrics["fp"] + metrics["fn"] == 4
        assert 0.0 <= metrics["accuracy"] <= 1.0

        image = os.path.join(cfg.out_dir, "features", "syn_0000.slope.png")
        net = cg.Network.load(os.path.join(cfg.out_dir, "model", "custnet.ckpt"))
        probs = net.predict(image)
        assert len(probs) == 2 and abs(sum(probs) - 1.0) < 1e-9
        cam = net.gradcam(image, "PD")
        assert cam and min(min(row) for row in cam) >= 0.0

        boost = cg.BoostModel.load(os.path.join(cfg.out_dir, "model", "boost.json"))
        p = boost.predict_proba(net.embedding(image))
        assert 0.0 <= p <= 1.0

        assert cg.run_stage(cfg, "explain") == []
        assert os.path.exists(image.replace(".png", ".gradcam.png"))


if __name__ == "__main__":
    check_features()
    check_metrics()
    check_pipeline()
    print("smoke test ok")
