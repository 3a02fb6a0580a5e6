#!/usr/bin/env python3
"""Build the COMPAS and Adult CSVs under data/ from their public raw releases.

The raw files are taken from the `responsibly` wheel on PyPI, which vendors
ProPublica's compas-scores-two-years.csv and the UCI adult.data/adult.test.

    python3 scripts/prepare_datasets.py            # download wheel with pip
    python3 scripts/prepare_datasets.py --wheel X  # use a local wheel

COMPAS output mirrors the categorical encoding used by the CORELS COMPAS
dataset (age buckets, juvenile counts, priors buckets, charge degree).
Adult output keeps the continuous columns raw; they are discretized by
`fairlist mine --mdlp-fraction`.
"""

import argparse
import csv
import glob
import io
import os
import subprocess
import sys
import tempfile
import zipfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
COMPAS_MEMBER = "responsibly/dataset/compas/compas-scores-two-years.csv"
ADULT_MEMBERS = ["responsibly/dataset/adult/adult.data", "responsibly/dataset/adult/adult.test"]


def fetch_wheel(dest):
    subprocess.check_call(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-d", dest, "responsibly==0.1.2"]
    )
    return glob.glob(os.path.join(dest, "responsibly-*.whl"))[0]


def age_bucket(age):
    if age <= 20:
        return "18-20"
    if age <= 22:
        return "21-22"
    if age <= 25:
        return "23-25"
    if age <= 45:
        return "26-45"
    return ">45"


def priors_bucket(n):
    if n == 0:
        return "0"
    if n == 1:
        return "1"
    if n <= 3:
        return "2-3"
    return ">3"


def prepare_compas(raw, out_path):
    rows = list(csv.reader(io.StringIO(raw)))
    header, body = rows[0], rows[1:]
    # the raw header repeats some names; first occurrence wins
    col = {}
    for i, name in enumerate(header):
        col.setdefault(name, i)
    out = []
    for r in body:
        days = r[col["days_b_screening_arrest"]]
        if days == "" or abs(int(days)) > 30:
            continue
        if r[col["is_recid"]] == "-1" or r[col["c_charge_degree"]] == "O":
            continue
        if r[col["score_text"]] == "N/A":
            continue
        if r[col["race"]] not in ("African-American", "Caucasian"):
            continue
        juv = lambda name: "0" if int(r[col[name]]) == 0 else ">0"
        out.append(
            [
                r[col["sex"]],
                age_bucket(int(r[col["age"]])),
                juv("juv_fel_count"),
                juv("juv_misd_count"),
                juv("juv_other_count"),
                priors_bucket(int(r[col["priors_count"]])),
                "felony" if r[col["c_charge_degree"]] == "F" else "misdemeanor",
                "1" if r[col["race"]] == "African-American" else "0",
                r[col["two_year_recid"]],
            ]
        )
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(
            ["sex", "age", "juvenile_felonies", "juvenile_misdemeanors", "juvenile_other",
             "priors", "charge_degree", "african_american", "two_year_recid"]
        )
        w.writerows(out)
    print(f"{out_path}: {len(out)} rows")


ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num", "marital_status",
    "occupation", "relationship", "race", "sex", "capital_gain", "capital_loss",
    "hours_per_week", "native_country", "income",
]
ADULT_KEEP = [
    "age", "workclass", "education", "marital_status", "occupation", "relationship",
    "race", "capital_gain", "capital_loss", "hours_per_week",
]


def prepare_adult(raws, out_path):
    out = []
    for raw in raws:
        for r in csv.reader(io.StringIO(raw), skipinitialspace=True):
            if len(r) != len(ADULT_COLUMNS):
                continue  # blank lines and the "|1x3 Cross validator" banner
            rec = dict(zip(ADULT_COLUMNS, (c.strip() for c in r)))
            if any(v == "?" for v in rec.values()):
                continue
            label = "1" if rec["income"].rstrip(".") == ">50K" else "0"
            female = "1" if rec["sex"] == "Female" else "0"
            out.append([rec[c] for c in ADULT_KEEP] + [female, label])
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ADULT_KEEP + ["female", "income_over_50k"])
        w.writerows(out)
    print(f"{out_path}: {len(out)} rows")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wheel", help="path to a responsibly wheel")
    ap.add_argument("--out-dir", default=os.path.join(ROOT, "data"))
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or fetch_wheel(tmp)
        z = zipfile.ZipFile(wheel)
        prepare_compas(z.read(COMPAS_MEMBER).decode("utf-8"), os.path.join(args.out_dir, "compas.csv"))
        prepare_adult(
            [z.read(m).decode("utf-8") for m in ADULT_MEMBERS], os.path.join(args.out_dir, "adult.csv")
        )


if __name__ == "__main__":
    main()
