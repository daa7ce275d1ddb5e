#!/usr/bin/env python3
# Copyright 2026 The capsbench Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the 5,000-digit MNIST sample bundled with mlxtend as IDX files.

The sample holds 500 digits per class. The first 400 of each class become
the desk training split, the remaining 100 the desk test split.

    pip download --no-deps -d /tmp/whl mlxtend
    python3 tools/make_mnist_desk.py /tmp/whl/mlxtend-*.whl data/mnist-desk
"""
import gzip
import io
import os
import struct
import sys
import zipfile

import numpy as np


def write_idx(path, array, magic):
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        for extent in array.shape:
            f.write(struct.pack(">I", extent))
        f.write(array.astype(np.uint8).tobytes())


def main(wheel, out_dir):
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    table = np.loadtxt(io.StringIO(raw.decode()), delimiter=",").astype(np.uint8)
    pixels, labels = table[:, :-1].reshape(-1, 28, 28), table[:, -1]

    train, test = [], []
    for digit in range(10):
        idx = np.flatnonzero(labels == digit)
        train.append(idx[:400])
        test.append(idx[400:])
    # interleave classes so natural order is 0,1,...,9,0,1,...
    train = np.stack(train, axis=1).reshape(-1)
    test = np.stack(test, axis=1).reshape(-1)

    os.makedirs(out_dir, exist_ok=True)
    write_idx(os.path.join(out_dir, "train-images-idx3-ubyte"), pixels[train], 0x803)
    write_idx(os.path.join(out_dir, "train-labels-idx1-ubyte"), labels[train], 0x801)
    write_idx(os.path.join(out_dir, "t10k-images-idx3-ubyte"), pixels[test], 0x803)
    write_idx(os.path.join(out_dir, "t10k-labels-idx1-ubyte"), labels[test], 0x801)


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
