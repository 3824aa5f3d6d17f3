#!/usr/bin/env python3
"""Write a 5000-sample MNIST subset as IDX files.

The samples come from the mnist_5k.csv.gz file shipped in the mlxtend wheel
(784 pixel columns followed by the label). If mlxtend is not importable the
wheel is fetched with `pip download` and read directly.
"""

import argparse
import gzip
import io
import struct
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

CSV_MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def load_csv_bytes() -> bytes:
    try:
        import mlxtend  # noqa: F401
        path = Path(mlxtend.__file__).parent / "data" / "data" / "mnist_5k.csv.gz"
        return path.read_bytes()
    except ImportError:
        pass
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "mlxtend", "--no-deps", "-q", "-d", tmp],
            check=True,
        )
        wheel = next(Path(tmp).glob("mlxtend-*.whl"))
        with zipfile.ZipFile(wheel) as z:
            return z.read(CSV_MEMBER)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--limit", type=int, default=0, help="keep only the first N samples")
    args = ap.parse_args()

    images = args.out_dir / "mnist5k-images-idx3-ubyte"
    labels = args.out_dir / "mnist5k-labels-idx1-ubyte"
    if images.exists() and labels.exists():
        print(f"{images} already present")
        return 0

    text = gzip.decompress(load_csv_bytes()).decode()
    pixels = bytearray()
    tags = bytearray()
    for line in io.StringIO(text):
        fields = line.strip().split(",")
        if len(fields) != 785:
            continue
        pixels.extend(int(float(v)) for v in fields[:784])
        tags.append(int(float(fields[784])))
        if args.limit and len(tags) == args.limit:
            break

    n = len(tags)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    images.write_bytes(struct.pack(">IIII", 0x803, n, 28, 28) + bytes(pixels))
    labels.write_bytes(struct.pack(">II", 0x801, n) + bytes(tags))
    print(f"wrote {n} samples to {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
