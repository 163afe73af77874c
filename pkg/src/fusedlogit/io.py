"""CSV/JSON persistence for datasets, instances and coefficient matrices.

Dataset CSVs carry a header ``x1..xd,y1..yt``; the intercept column is not
stored and is re-added on load. Model CSVs have no header and hold the
``(1 + d) x t`` coefficient matrix with intercepts in row 0.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .datagen import BenchmarkInstance, CaseSpec
from .model import TaskDataset

FLOAT_FMT = "%.17g"
SPLITS = {"train": "train.csv", "validation": "val.csv", "test": "test.csv"}


def save_dataset_csv(data: TaskDataset, path) -> None:
    header = [f"x{i}" for i in range(1, data.d + 1)] + [f"y{j}" for j in range(1, data.t + 1)]
    table = np.hstack([data.X[:, 1:], data.Y])
    np.savetxt(path, table, delimiter=",", header=",".join(header), comments="", fmt=FLOAT_FMT)


def load_dataset_csv(path) -> TaskDataset:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    xcols = [i for i, name in enumerate(header) if name.startswith("x")]
    ycols = [i for i, name in enumerate(header) if name.startswith("y")]
    if not xcols or not ycols or len(xcols) + len(ycols) != len(header):
        raise ValueError(f"{path}: header must be x1..xd,y1..yt")
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return TaskDataset.from_features(table[:, xcols], table[:, ycols])


def save_matrix_csv(B: np.ndarray, path) -> None:
    np.savetxt(path, np.atleast_2d(B), delimiter=",", fmt=FLOAT_FMT)


def load_matrix_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _seed_to_json(seed):
    if isinstance(seed, (list, tuple)):
        return [int(s) for s in seed]
    return int(seed)


def save_instance(inst: BenchmarkInstance, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "spec": inst.spec.to_dict(),
        "seed": _seed_to_json(inst.seed),
        "sizes": {"train": inst.train.n, "validation": inst.validation.n, "test": inst.test.n},
        "B_true": np.asarray(inst.B_true).tolist(),
        "files": SPLITS,
    }
    for split, fname in SPLITS.items():
        save_dataset_csv(getattr(inst, split), directory / fname)
    path = directory / "instance.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def load_instance(directory) -> BenchmarkInstance:
    directory = Path(directory)
    manifest = json.loads((directory / "instance.json").read_text())
    splits = {split: load_dataset_csv(directory / fname) for split, fname in SPLITS.items()}
    return BenchmarkInstance(
        B_true=np.array(manifest["B_true"], dtype=float),
        train=splits["train"], validation=splits["validation"], test=splits["test"],
        seed=manifest["seed"], spec=CaseSpec(**manifest["spec"]),
    )
