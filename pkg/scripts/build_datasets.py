"""Rebuild the UCI CSV files under data/ from KEEL copies shipped on PyPI.

The UCI archive is not always reachable, but two PyPI wheels bundle KEEL
exports of the same data:

* ``imbalanced_databases`` ships several one-vs-rest binarizations of Ecoli.
  Every row keeps its original UCI position, so the 8 original classes are
  recovered from each row's membership signature across the binarizations
  plus the UCI row order (the file is sorted by class).
* ``keel_ds`` ships Ionosphere (the constant second attribute dropped).

Usage::

    pip download --no-deps -d /tmp/w imbalanced-databases keel-ds
    python scripts/build_datasets.py /tmp/w data/
"""

import collections
import csv
import glob
import io
import os
import sys
import zipfile

ECOLI_FEATURES = ["mcg", "gvh", "lip", "chg", "aac", "alm1", "alm2"]
# UCI ecoli.data is sorted by class; sizes in file order.
ECOLI_ORDER = [("cp", 143), ("im", 77), ("imS", 2), ("imL", 2), ("imU", 35),
               ("om", 20), ("omL", 5), ("pp", 52)]


def _keel_rows(text):
    rows = []
    for line in io.StringIO(text):
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        parts = [p.strip() for p in line.split(",")]
        rows.append((parts[:-1], parts[-1]))
    return rows


def _wheel(wheel_dir, prefix):
    hits = glob.glob(os.path.join(wheel_dir, prefix + "*.whl"))
    if not hits:
        sys.exit(f"no {prefix} wheel in {wheel_dir}")
    return zipfile.ZipFile(hits[0])


def build_ecoli(wheel_dir):
    zf = _wheel(wheel_dir, "imbalanced_databases")
    files = {}
    for name in zf.namelist():
        base = os.path.basename(name)
        if base.startswith("ecoli") and base.endswith(".dat"):
            rows = _keel_rows(zf.read(name).decode())
            files[base] = {tuple(float(v) for v in f): c for f, c in rows}
    base_rows = _keel_rows(zf.read("imbalanced_databases/data/ecoli1/ecoli1.dat").decode())
    feats = [tuple(float(v) for v in f) for f, _ in base_rows]
    keys = sorted(files)
    sig = [tuple(files[k].get(f, "-") for k in keys) for f in feats]

    # Runs of identical signatures must line up with the UCI class blocks.
    labels = []
    pos = 0
    for cls, size in ECOLI_ORDER:
        block = sig[pos:pos + size]
        if len(set(block)) != 1:
            sys.exit(f"class block {cls} is not homogeneous")
        labels.extend([cls] * size)
        pos += size
    if pos != len(feats):
        sys.exit("row count mismatch")
    counts = collections.Counter(labels)
    assert counts == dict(ECOLI_ORDER)
    return ECOLI_FEATURES, [list(f) for f in feats], labels


def build_ionosphere(wheel_dir):
    zf = _wheel(wheel_dir, "keel_ds")
    rows = _keel_rows(zf.read("keel_ds/data/balanced/raw/ionosphere.dat").decode())
    header = [f"a{i}" for i in range(len(rows[0][0]))]
    return header, [[float(v) for v in f] for f, _ in rows], [c for _, c in rows]


def write(path, header, feats, labels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header + ["class"])
        for f, c in zip(feats, labels):
            w.writerow([repr(v) for v in f] + [c])


def main():
    wheel_dir, out_dir = sys.argv[1], sys.argv[2]
    write(os.path.join(out_dir, "ecoli.csv"), *build_ecoli(wheel_dir))
    write(os.path.join(out_dir, "ionosphere.csv"), *build_ionosphere(wheel_dir))


if __name__ == "__main__":
    main()
