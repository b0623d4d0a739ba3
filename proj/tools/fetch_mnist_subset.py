#!/usr/bin/env python3
# Copyright 2026 The Novelty Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds an IDX-format MNIST subset from the `mnist` npm package.

The package ships roughly 10k real MNIST digits as JSON arrays of floats in
[0, 1]. They are quantized back to 8 bits and split per class into a
pseudo-train (3/4) and pseudo-test (1/4) part, then written with the usual
MNIST file names so the regular IDX loader can read them. Use this only when
the official files are not reachable.
"""

import argparse
import json
import pathlib
import struct
import subprocess
import tarfile
import tempfile

import numpy as np


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/mnist")
    parser.add_argument("--tarball", help="pre-downloaded mnist-1.1.0.tgz")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tarball = args.tarball
        if tarball is None:
            subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=tmp, check=True,
                           stdout=subprocess.DEVNULL)
            tarball = pathlib.Path(tmp) / "mnist-1.1.0.tgz"
        with tarfile.open(tarball) as tar:
            tar.extractall(tmp)
        digits = pathlib.Path(tmp) / "package" / "src" / "digits"

        train_x, train_y, test_x, test_y = [], [], [], []
        for digit in range(10):
            raw = json.loads((digits / f"{digit}.json").read_text())["data"]
            pixels = np.rint(np.asarray(raw, dtype=np.float64) * 255.0)
            pixels = np.clip(pixels, 0, 255).reshape(-1, 28 * 28)
            is_test = (np.arange(len(pixels)) % 4) == 3
            train_x.append(pixels[~is_test])
            train_y.append(np.full((~is_test).sum(), digit))
            test_x.append(pixels[is_test])
            test_y.append(np.full(is_test.sum(), digit))

    rng = np.random.default_rng(args.seed)
    for name, xs, ys in (("train", train_x, train_y), ("t10k", test_x, test_y)):
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        order = rng.permutation(len(y))
        write_idx_images(out / f"{name}-images-idx3-ubyte", x[order])
        write_idx_labels(out / f"{name}-labels-idx1-ubyte", y[order])
        print(f"{name}: {len(y)} images, per class {np.bincount(y).tolist()}")


if __name__ == "__main__":
    main()
