"""Smoke test for the pap_enhance_py extension.

Build and install first:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/pap_enhance-*.whl
"""

import json
import math
import os
import random
import sys
import tempfile

import pap_enhance_py as pe

HERE = os.path.dirname(os.path.abspath(__file__))
FIXTURES = os.path.join(HERE, "..", "crates", "core", "fixtures")


def check(cond, what):
    if not cond:
        print(f"FAIL {what}")
        sys.exit(1)
    print(f"ok   {what}")


def main():
    check(abs(pe.diffusion_coefficient(20.0, 20.0) - math.exp(-1)) < 1e-12, "diffusion coefficient")

    flat = pe.pmd_filter([0.0, 100.0, 0.0], 3, 1, pe.PmdParams(iterations=1, kappa=1e6))
    check(all(abs(a - b) < 1e-6 for a, b in zip(flat, [25.0, 50.0, 25.0])), "one linear diffusion step")
    try:
        pe.PmdParams(lambda_=0.3)
        check(False, "lambda above 0.25 rejected")
    except ValueError:
        check(True, "lambda above 0.25 rejected")

    const = pe.clahe_apply([77.0] * (32 * 32), 32, 32)
    check(len(set(const)) == 1, "CLAHE keeps a constant plane constant")

    rng = random.Random(3)
    w, h = 48, 40
    data = bytes(min(255, max(0, int(rng.gauss(120, 6)))) for _ in range(w * h * 3))
    img = pe.Image(w, h, 3, data)
    check(pe.enhance(img, mode="original") == img, "original mode is the identity")
    hybrid = pe.enhance(img, mode="hybrid")
    check((hybrid.width, hybrid.height, hybrid.channels) == (w, h, 3), "hybrid keeps shape")

    before = pe.ceiq_features(img)
    after = pe.ceiq_features(pe.enhance(img, mode="clahe", clahe=pe.ClaheParams(grid_cols=4, grid_rows=4)))
    check(set(before) == {"ssim_he", "entropy", "entropy_he", "cross_entropy", "cross_entropy_rev"}, "feature names")
    check(after["entropy"] > before["entropy"], "CLAHE raises entropy of a low-contrast image")

    m = pe.compute_metrics([[5, 5], [0, 10]])
    check(abs(m["accuracy"] - 75.0) < 1e-9, "metrics from a confusion matrix")

    with tempfile.TemporaryDirectory() as root:
        for cls in ("a", "b"):
            os.makedirs(os.path.join(root, cls))
            for i in range(10):
                hybrid.save(os.path.join(root, cls, f"{i}.png"))
        manifest = json.loads(pe.split_dataset(root))
        splits = [e["split"] for e in manifest["entries"] if e["class"] == 0]
        check(sorted(splits) == ["test"] + ["train"] * 8 + ["val"], "split 10 images 8/1/1")
        check(pe.Image.load(os.path.join(root, "a", "0.png")) == hybrid, "PNG round trip")

    report = json.loads(
        pe.compare_metrics_files(
            [os.path.join(FIXTURES, "table1_original.json")],
            [os.path.join(FIXTURES, "table4_hybrid.json")],
        )
    )
    acc = next(x for x in report["maxima"] if x["metric"] == "accuracy")
    check(acc["architecture"] == "ResNet50" and abs(acc["delta"] - 13.62) < 0.01, "compare table fixtures")

    try:
        pe.Image.load("/nonexistent/image.png")
        check(False, "missing file raises FileNotFoundError")
    except FileNotFoundError:
        check(True, "missing file raises FileNotFoundError")

    print(f"pap_enhance_py {pe.__version__}: all checks passed")


if __name__ == "__main__":
    main()
