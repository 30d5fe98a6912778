"""One-time fixture generation. Writes tests/data/breast_cancer.csv.

This is the only place scikit-learn is allowed; the package itself
never imports it.
"""
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_breast_cancer

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from riskcard.data import Dataset, TaskKind, write_csv  # noqa: E402


def main() -> None:
    raw = load_breast_cancer()
    names = [n.replace(" ", "_") for n in raw.feature_names]
    # target: 1 = malignant (the risk outcome), sklearn encodes benign as 1
    target = 1.0 - raw.target.astype(np.float64)
    d = Dataset(feature_names=names,
                values=raw.data.astype(np.float64),
                target=target,
                task=TaskKind.CLASSIFICATION)
    out = Path(__file__).resolve().parents[1] / "tests" / "data"
    out.mkdir(parents=True, exist_ok=True)
    write_csv(d, out / "breast_cancer.csv")
    print(f"wrote {out / 'breast_cancer.csv'} ({d.n} rows, {d.p} features)")


if __name__ == "__main__":
    main()
