"""Rebuild IDX files from the digit JSON shipped in the npm ``mnist`` package.

That package stores 10 000 MNIST digits as intensities rounded to three
decimals; ``round(v * 255)`` recovers the original bytes exactly.  The
digits are shuffled with a fixed seed and written as gzipped IDX:
9000 to ``train-*`` and 1000 to ``t10k-*``.

    npm pack mnist && tar xzf mnist-*.tgz
    python tools/npm_digits_to_idx.py package/src/digits data/mnist-desk
"""

import argparse
import gzip
import json
import os

import numpy as np

from bcpnn.mnist import idx_bytes


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("digits_dir")
    parser.add_argument("out_dir")
    parser.add_argument("--n-test", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=20200130)
    args = parser.parse_args()

    images, labels = [], []
    for digit in range(10):
        with open(os.path.join(args.digits_dir, f"{digit}.json")) as f:
            values = np.asarray(json.load(f)["data"], dtype=np.float64)
        pixels = np.rint(values.reshape(-1, 784) * 255.0)
        assert np.abs(pixels / 255.0 - values.reshape(-1, 784)).max() < 5e-4
        images.append(pixels.astype(np.uint8))
        labels.append(np.full(len(pixels), digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(args.seed).permutation(len(labels))
    images, labels = images[order], labels[order]

    os.makedirs(args.out_dir, exist_ok=True)
    n_train = len(labels) - args.n_test
    parts = {
        "train": (images[:n_train], labels[:n_train]),
        "t10k": (images[n_train:], labels[n_train:]),
    }
    for prefix, (imgs, labs) in parts.items():
        for kind, array in (("images-idx3", imgs.reshape(-1, 28, 28)),
                            ("labels-idx1", labs)):
            path = os.path.join(args.out_dir, f"{prefix}-{kind}-ubyte.gz")
            with gzip.GzipFile(path, "wb", mtime=0) as f:
                f.write(idx_bytes(array))
            print(path, array.shape)


if __name__ == "__main__":
    main()
