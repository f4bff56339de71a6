#!/usr/bin/env python3
"""Assemble data/adult.csv (UCI Adult, train + test, 48,842 rows).

The raw UCI files are taken from the `responsibly` wheel on PyPI, which ships
them verbatim. Pass --wheel to use an already downloaded wheel.
"""
import argparse
import csv
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

HEADER = [
    "age", "workclass", "fnlwgt", "education", "education_num",
    "marital_status", "occupation", "relationship", "race", "sex",
    "capital_gain", "capital_loss", "hours_per_week", "native_country",
    "income",
]


def rows(text):
    for line in io.StringIO(text):
        line = line.strip()
        if not line or line.startswith("|"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(HEADER):
            continue
        cells[-1] = cells[-1].rstrip(".")
        yield cells


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wheel")
    ap.add_argument("--out", default=str(pathlib.Path(__file__).parent.parent / "data" / "adult.csv"))
    args = ap.parse_args()

    wheel = args.wheel
    if wheel is None:
        tmp = tempfile.mkdtemp()
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps",
                        "responsibly==0.1.2", "-d", tmp], check=True)
        wheel = str(next(pathlib.Path(tmp).glob("responsibly-*.whl")))

    z = zipfile.ZipFile(wheel)
    base = "responsibly/dataset/adult/"
    out = pathlib.Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with out.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(HEADER)
        for name in ("adult.data", "adult.test"):
            for r in rows(z.read(base + name).decode("utf-8")):
                w.writerow(r)
                n += 1
    print(f"wrote {n} rows to {out}")


if __name__ == "__main__":
    main()
