"""Build a 4000/1000 MNIST IDX subset from the 5000-image sample bundled with mlxtend.

The mlxtend wheel ships ``mlxtend/data/data/mnist_5k.csv.gz`` (784 pixel
columns followed by the label).  Usage::

    pip download --no-deps -d /tmp/wheels mlxtend
    python scripts/build_mnist5k.py /tmp/wheels/mlxtend-*.whl data/mnist5k
"""
import argparse
import gzip
import io
import zipfile
from pathlib import Path

import numpy as np

from tabudrop.data import Dataset, write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_source(path):
    path = Path(path)
    if path.suffix == ".whl":
        raw = zipfile.ZipFile(path).read(MEMBER)
    else:
        raw = path.read_bytes()
    table = np.loadtxt(io.StringIO(gzip.decompress(raw).decode()), delimiter=",", dtype=np.int64)
    return table[:, :-1], table[:, -1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", help="mlxtend wheel or mnist_5k.csv.gz")
    ap.add_argument("out_dir")
    ap.add_argument("--n-test", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    pixels, labels = read_source(args.source)
    perm = np.random.default_rng(args.seed).permutation(len(labels))
    pixels, labels = pixels[perm], labels[perm]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cut = len(labels) - args.n_test
    for split, sl in (("train", slice(0, cut)), ("test", slice(cut, None))):
        ds = Dataset(pixels[sl] / 255.0, labels[sl], 10)
        write_idx(ds, out / f"{split}-images-idx3-ubyte.gz", out / f"{split}-labels-idx1-ubyte.gz",
                  shape=(28, 28))
        print(f"{split}: {len(ds)} images, class counts {np.bincount(ds.labels, minlength=10).tolist()}")


if __name__ == "__main__":
    main()
