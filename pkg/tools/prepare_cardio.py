"""Convert the Kaggle cardiovascular-disease CSV for the test suite.

Usage: python3 tools/prepare_cardio.py <downloaded cardio_train.csv>

The download uses ';' separators, an id column, and age in days. The
converted file drops the id, turns age into years, and lands at
tests/data/cardio.csv. Tests that need it skip when the file is absent.
"""
import csv
import sys
from pathlib import Path


def main(src: str) -> None:
    out_path = Path(__file__).resolve().parents[1] / "tests" / "data" / "cardio.csv"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(src, newline="") as fh:
        rows = list(csv.reader(fh, delimiter=";"))
    header = rows[0]
    if "age" not in header or "cardio" not in header:
        raise SystemExit(f"{src}: expected the Kaggle cardio_train.csv layout")
    keep = [i for i, name in enumerate(header) if name != "id"]
    age_i = header.index("age")
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([header[i] for i in keep])
        for row in rows[1:]:
            row = list(row)
            row[age_i] = repr(float(row[age_i]) / 365.25)
            w.writerow([row[i] for i in keep])
    print(f"wrote {out_path} ({len(rows) - 1} rows)")


if __name__ == "__main__":
    if len(sys.argv) != 2:
        raise SystemExit(__doc__)
    main(sys.argv[1])
