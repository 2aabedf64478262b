#!/usr/bin/env python3
"""Convert the digits bundled in the npm `mnist` package into gzipped IDX files.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/mnist_from_npm.py package/src/digits data/mnist

The package ships 10,000 MNIST digits as JSON arrays of 784 floats in [0, 1]
(rounded to three decimals). They are rescaled to 0..255, shuffled with a fixed
seed and written in the standard big-endian IDX layout.
"""
import gzip
import json
import os
import random
import struct
import sys


def main(src, dst):
    items = []
    for digit in range(10):
        with open(os.path.join(src, f"{digit}.json")) as fh:
            flat = json.load(fh)["data"]
        for i in range(len(flat) // 784):
            pix = bytes(min(255, max(0, round(v * 255))) for v in flat[i * 784:(i + 1) * 784])
            items.append((pix, digit))
    random.Random(0).shuffle(items)
    os.makedirs(dst, exist_ok=True)
    with gzip.GzipFile(os.path.join(dst, "digits10k-images-idx3-ubyte.gz"), "wb", mtime=0) as fh:
        fh.write(struct.pack(">IIII", 0x803, len(items), 28, 28))
        for pix, _ in items:
            fh.write(pix)
    with gzip.GzipFile(os.path.join(dst, "digits10k-labels-idx1-ubyte.gz"), "wb", mtime=0) as fh:
        fh.write(struct.pack(">II", 0x801, len(items)))
        fh.write(bytes(label for _, label in items))
    print(f"wrote {len(items)} digits to {dst}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
