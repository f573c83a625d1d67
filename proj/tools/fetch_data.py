#!/usr/bin/env python3
"""Fetch MNIST and FashionMNIST into IDX files.

Both datasets are pulled from the npm registry, which is the only package
source reachable from the build sandbox:

  mnist-data     ships the original MNIST IDX files verbatim.
  fashion-mnist  ships the 70k FashionMNIST images as per-class JSON arrays
                 of 0..255 bytes (plus two empty records, which are dropped).
                 The original train/test order is not preserved, so the
                 samples are shuffled with a fixed seed and split
                 60000 / 10000.

Usage: tools/fetch_data.py [--out DIR]   (default: ./data)
"""
import argparse
import gzip
import json
import random
import shutil
import struct
import subprocess
import tarfile
import tempfile
from pathlib import Path


def npm_pack(name, workdir):
    out = subprocess.run(["npm", "pack", name], cwd=workdir, check=True,
                         capture_output=True, text=True).stdout.strip().splitlines()[-1]
    with tarfile.open(Path(workdir) / out) as tar:
        tar.extractall(Path(workdir) / name)
    return Path(workdir) / name / "package"


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(bytes(labels))


def fetch_mnist(out, tmp):
    pkg = npm_pack("mnist-data", tmp)
    dst = out / "mnist"
    dst.mkdir(parents=True, exist_ok=True)
    for name in ["train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                 "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]:
        src = pkg / "data" / name
        if src.exists():
            shutil.copy(src, dst / name)
        else:
            with gzip.open(str(src) + ".gz") as g, open(dst / name, "wb") as f:
                shutil.copyfileobj(g, f)


def fetch_fmnist(out, tmp):
    pkg = npm_pack("fashion-mnist", tmp)
    samples = []
    for label in range(10):
        rows = json.load(open(pkg / "src" / "clothes" / f"{label}.json"))["data"]
        # The package carries a couple of empty records; keep full images only.
        samples.extend((row, label) for row in rows if len(row) == 28 * 28)
    random.Random(0).shuffle(samples)
    train, test = samples[:60000], samples[60000:]
    dst = out / "fmnist"
    dst.mkdir(parents=True, exist_ok=True)
    write_idx_images(dst / "train-images-idx3-ubyte", [s[0] for s in train])
    write_idx_labels(dst / "train-labels-idx1-ubyte", [s[1] for s in train])
    write_idx_images(dst / "t10k-images-idx3-ubyte", [s[0] for s in test])
    write_idx_labels(dst / "t10k-labels-idx1-ubyte", [s[1] for s in test])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data")
    args = ap.parse_args()
    out = Path(args.out).resolve()
    with tempfile.TemporaryDirectory() as tmp:
        fetch_mnist(out, tmp)
        fetch_fmnist(out, tmp)
    print(f"datasets written under {out}")


if __name__ == "__main__":
    main()
