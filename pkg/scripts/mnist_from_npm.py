"""Rebuild src/daic/_data/mnist10k-*.gz from the digit JSON files shipped in the npm ``mnist`` package.

The npm package (https://registry.npmjs.org/mnist/-/mnist-1.1.0.tgz) carries
10,000 MNIST digits as pixel intensities divided by 255 and rounded to three
decimals.  Rounding error stays below half a grey level, so ``round(v * 255)``
recovers the original bytes exactly.

Usage::

    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python scripts/mnist_from_npm.py package/src/digits src/daic/_data/
"""

import argparse
import gzip
import json
import struct
from pathlib import Path

import numpy as np


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("digits_dir", type=Path)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--seed", type=int, default=20230101)
    args = parser.parse_args()

    images, labels = [], []
    for digit in range(10):
        flat = np.asarray(json.loads((args.digits_dir / f"{digit}.json").read_text())["data"])
        block = np.rint(flat * 255).astype(np.uint8).reshape(-1, 784)
        images.append(block)
        labels.append(np.full(len(block), digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(args.seed).permutation(len(labels))
    images, labels = images[order], labels[order]

    args.out_dir.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(args.out_dir / "mnist10k-images-idx3-ubyte.gz", "wb", mtime=0) as fh:
        fh.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        fh.write(images.tobytes())
    with gzip.GzipFile(args.out_dir / "mnist10k-labels-idx1-ubyte.gz", "wb", mtime=0) as fh:
        fh.write(struct.pack(">II", 0x00000801, len(labels)))
        fh.write(labels.tobytes())
    print(f"wrote {len(labels)} examples to {args.out_dir}")


if __name__ == "__main__":
    main()
