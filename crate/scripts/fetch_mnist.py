#!/usr/bin/env python3
"""Fetch MNIST training images/labels as IDX files into data/mnist/.

Tries the usual gzip mirrors of the official IDX files first. When none is
reachable, falls back to the `mnist` npm package (10,000 official digits
stored as JSON arrays of byte/255 values) and re-encodes them as IDX.

Usage: python3 scripts/fetch_mnist.py [--out data/mnist]
"""
import argparse
import gzip
import io
import json
import os
import struct
import subprocess
import tarfile
import tempfile
import urllib.request

MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
    "http://yann.lecun.com/exdb/mnist/",
]
FILES = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte"]


def try_mirrors(out):
    for base in MIRRORS:
        try:
            for name in FILES:
                with urllib.request.urlopen(base + name + ".gz", timeout=20) as r:
                    raw = gzip.decompress(r.read())
                with open(os.path.join(out, name), "wb") as f:
                    f.write(raw)
            print(f"downloaded official files from {base}")
            return True
        except Exception as e:  # noqa: BLE001
            print(f"mirror {base} failed: {e}")
    return False


def from_npm(out):
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(["npm", "pack", "--silent", "mnist@1.1.0"], cwd=tmp, check=True,
                       stdout=subprocess.DEVNULL)
        tgz = next(p for p in os.listdir(tmp) if p.endswith(".tgz"))
        images, labels = bytearray(), bytearray()
        with tarfile.open(os.path.join(tmp, tgz)) as tar:
            for digit in range(10):
                member = tar.extractfile(f"package/src/digits/{digit}.json")
                values = json.load(io.TextIOWrapper(member))["data"]
                assert len(values) % 784 == 0
                images.extend(round(v * 255) for v in values)
                labels.extend([digit] * (len(values) // 784))
    count = len(labels)
    with open(os.path.join(out, FILES[0]), "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, count, 28, 28))
        f.write(images)
    with open(os.path.join(out, FILES[1]), "wb") as f:
        f.write(struct.pack(">II", 0x00000801, count))
        f.write(labels)
    print(f"wrote {count} images converted from the npm mnist package")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "mnist"))
    parser.add_argument("--offline-subset", action="store_true",
                        help="skip the mirrors and use the npm 10k subset")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    if args.offline_subset or not try_mirrors(args.out):
        from_npm(args.out)


if __name__ == "__main__":
    main()
