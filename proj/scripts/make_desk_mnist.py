#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Build the small MNIST subset in data/mnist-desk/ from the npm `mnist` package.

The npm package (https://www.npmjs.com/package/mnist) ships 10000 MNIST digits
as JSON arrays of round(byte / 255, 3). Every one of the 256 byte levels maps to
a distinct rounded value, so round(v * 255) recovers the original bytes.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 scripts/make_desk_mnist.py package/src/digits data/mnist-desk
"""
import argparse
import gzip
import json
import pathlib
import random
import struct


def load_digits(digits_dir):
    samples = []
    for label in range(10):
        flat = json.loads((digits_dir / f"{label}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        for k in range(len(flat) // 784):
            pixels = bytes(round(v * 255) for v in flat[784 * k:784 * (k + 1)])
            samples.append((pixels, label))
    return samples


def write_idx(path, samples):
    # gzip mtime pinned so reruns are byte-identical.
    with open(path.with_name(path.name + "-images-idx3-ubyte.gz"), "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
            f.write(struct.pack(">IIII", 0x00000803, len(samples), 28, 28))
            for pixels, _ in samples:
                f.write(pixels)
    with open(path.with_name(path.name + "-labels-idx1-ubyte.gz"), "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
            f.write(struct.pack(">II", 0x00000801, len(samples)))
            f.write(bytes(label for _, label in samples))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir", type=pathlib.Path)
    ap.add_argument("out_dir", type=pathlib.Path)
    ap.add_argument("--train", type=int, default=2000)
    ap.add_argument("--test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=20191)
    args = ap.parse_args()

    samples = load_digits(args.digits_dir)
    random.Random(args.seed).shuffle(samples)
    assert args.train + args.test <= len(samples)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write_idx(args.out_dir / "train", samples[:args.train])
    write_idx(args.out_dir / "t10k", samples[args.train:args.train + args.test])


if __name__ == "__main__":
    main()
