#!/usr/bin/env python3
"""Convert the digit JSON files shipped with the `mnist` npm package into IDX files.

The package stores 10000 MNIST digits as pixel intensities rounded to three
decimals. Since 1/255 > 0.001 the original bytes are recovered exactly by
rounding v * 255. The digits are split into a stratified 6000-image training
set (600 per class) and a 4000-image held-out set.

usage: npm_mnist_to_idx.py <package/src/digits> <out_dir>
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path

PER_CLASS_TRAIN = 600


def write_idx(out_dir, prefix, images, labels):
    with gzip.GzipFile(out_dir / f"{prefix}-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with gzip.GzipFile(out_dir / f"{prefix}-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    src, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for digit in range(10):
        raw = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(raw) % 784 == 0
        for k in range(len(raw) // 784):
            px = [int(round(v * 255)) for v in raw[k * 784:(k + 1) * 784]]
            assert all(abs(b / 255 - v) < 6e-4 for b, v in zip(px, raw[k * 784:(k + 1) * 784]))
            (train if k < PER_CLASS_TRAIN else test).append((px, digit))
    rng = random.Random(0)
    rng.shuffle(train)
    rng.shuffle(test)
    write_idx(out_dir, "train", [p for p, _ in train], [l for _, l in train])
    write_idx(out_dir, "t10k", [p for p, _ in test], [l for _, l in test])
    print(f"train={len(train)} test={len(test)}")


if __name__ == "__main__":
    main()
