#!/usr/bin/env python3
"""Convert public benchmark files into the triplet and feature formats read by mtp.

MovieLens-100k:
    prepare_data.py movielens <ml-100k.inter | u.data | recbole wheel> [--out data]
Yeast (mulan ARFF, 103 features followed by 14 labels):
    prepare_data.py yeast <yeast.arff> [--out data]
"""
import argparse
import io
import pathlib
import sys
import zipfile

INTER_IN_WHEEL = "recbole/dataset_example/ml-100k/ml-100k.inter"


def read_ratings(path):
    path = pathlib.Path(path)
    if path.suffix == ".whl":
        with zipfile.ZipFile(path) as z:
            text = z.read(INTER_IN_WHEEL).decode("utf-8")
    else:
        text = path.read_text()
    rows = []
    for line in io.StringIO(text):
        fields = line.split()
        if not fields or not fields[0].isdigit():
            continue
        rows.append((int(fields[0]), int(fields[1]), int(float(fields[2]))))
    return rows


def movielens(src, out):
    rows = read_ratings(src)
    users = sorted({u for u, _, _ in rows})
    items = sorted({i for _, i, _ in rows})
    uid = {u: k for k, u in enumerate(users)}
    iid = {i: k for k, i in enumerate(items)}
    dest = out / "movielens100k"
    dest.mkdir(parents=True, exist_ok=True)
    with open(dest / "ratings.csv", "w") as f:
        f.write(f"#n={len(users)}\n#m={len(items)}\n")
        for u, i, r in rows:
            f.write(f"{uid[u]},{iid[i]},{r}\n")
    print(f"movielens100k: {len(users)} users, {len(items)} items, {len(rows)} ratings")


def yeast(src, out, n_labels=14):
    data = False
    rows = []
    for line in pathlib.Path(src).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        if line.lower().startswith("@data"):
            data = True
            continue
        if data:
            rows.append([float(v) for v in line.split(",")])
    n_features = len(rows[0]) - n_labels
    dest = out / "yeast"
    dest.mkdir(parents=True, exist_ok=True)
    with open(dest / "features.csv", "w") as f:
        f.write("id," + ",".join(f"f{k}" for k in range(n_features)) + "\n")
        for i, r in enumerate(rows):
            f.write(f"{i}," + ",".join(repr(v) for v in r[:n_features]) + "\n")
    with open(dest / "triplets.csv", "w") as f:
        f.write(f"#n={len(rows)}\n#m={n_labels}\n")
        for i, r in enumerate(rows):
            for j, v in enumerate(r[n_features:]):
                f.write(f"{i},{j},{int(v)}\n")
    print(f"yeast: {len(rows)} instances, {n_features} features, {n_labels} targets")


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("dataset", choices=["movielens", "yeast"])
    p.add_argument("source")
    p.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    a = p.parse_args()
    out = pathlib.Path(a.out)
    if a.dataset == "movielens":
        movielens(a.source, out)
    else:
        yeast(a.source, out)


if __name__ == "__main__":
    sys.exit(main())
