#!/usr/bin/env python3
"""Write the 5000-sample MNIST subset bundled with mlxtend as gzipped IDX files.

The sandbox used for development has no route to the official MNIST mirrors,
but the mlxtend wheel ships 5000 MNIST digits (500 per class). This script
shuffles them with a fixed seed and splits them 4000/1000 into the standard
train/t10k IDX file names so the C++ loaders read them unchanged.

Usage: make_mnist_subset.py [OUT_DIR]   (needs `pip download mlxtend`)
"""
import glob
import gzip
import io
import os
import struct
import subprocess
import sys
import tempfile
import zipfile

import numpy as np


def fetch_csv() -> bytes:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps",
                        "mlxtend", "-d", tmp], check=True,
                       stdout=subprocess.DEVNULL)
        wheel = glob.glob(os.path.join(tmp, "*.whl"))[0]
        with zipfile.ZipFile(wheel) as z:
            return gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))


def write_idx(path, array, magic):
    header = struct.pack(">I", magic) + b"".join(
        struct.pack(">I", d) for d in array.shape)
    # mtime=0 keeps the output byte-identical across runs
    with open(path, "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as f:
            f.write(header + array.astype(np.uint8).tobytes())


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "data", "mnist")
    os.makedirs(out, exist_ok=True)
    table = np.loadtxt(io.BytesIO(fetch_csv()), delimiter=",")
    pixels = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)
    order = np.random.RandomState(0).permutation(len(labels))
    pixels, labels = pixels[order], labels[order]
    split = 4000
    write_idx(os.path.join(out, "train-images-idx3-ubyte.gz"), pixels[:split], 0x803)
    write_idx(os.path.join(out, "train-labels-idx1-ubyte.gz"), labels[:split], 0x801)
    write_idx(os.path.join(out, "t10k-images-idx3-ubyte.gz"), pixels[split:], 0x803)
    write_idx(os.path.join(out, "t10k-labels-idx1-ubyte.gz"), labels[split:], 0x801)
    print("train histogram", np.bincount(labels[:split], minlength=10).tolist())
    print("test histogram", np.bincount(labels[split:], minlength=10).tolist())


if __name__ == "__main__":
    main()
