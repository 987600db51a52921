"""Nearest-neighbour classification experiments on feature vectors.

Each repeat draws a stratified split with ``R`` training samples per
class, labels every test sample by its nearest training sample and records
the accuracy.  Distances are computed once for all pairs and reused.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NORMS",
    "ExperimentConfig",
    "ExperimentResult",
    "LabeledFeatureSet",
    "knn1",
    "pairwise_distances",
    "run_experiment",
    "stratified_split",
    "write_accuracy_csv",
    "write_confusion_csv",
    "write_distmap_csv",
]

NORMS = ("l1", "l2", "linf")


def _norm_name(norm):
    name = str(norm).lower()
    if name not in NORMS:
        raise ValueError(f"norm must be one of {NORMS}, got {norm!r}")
    return name


def _distances_to(X, q, norm):
    diff = np.abs(X - q)
    if norm == "l1":
        return diff.sum(axis=1)
    if norm == "l2":
        return np.sqrt((diff * diff).sum(axis=1))
    return diff.max(axis=1)


@dataclass(frozen=True)
class LabeledFeatureSet:
    labels: np.ndarray
    vectors: np.ndarray
    sample_ids: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.vectors, dtype=float)
        if X.ndim != 2:
            raise ValueError("vectors must form a 2D array")
        labels = np.asarray(self.labels)
        ids = np.asarray(self.sample_ids)
        if labels.shape != (X.shape[0],) or ids.shape != (X.shape[0],):
            raise ValueError("labels, vectors and sample_ids must have the same length")
        if len(set(ids.tolist())) != ids.size:
            raise ValueError("sample ids must be unique")
        object.__setattr__(self, "vectors", X)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_ids", ids)

    @classmethod
    def from_lists(cls, labels, vectors, sample_ids=None):
        n = len(labels)
        ids = np.arange(n) if sample_ids is None else sample_ids
        return cls(np.asarray(labels), np.asarray(vectors, dtype=float), np.asarray(ids))

    def __len__(self) -> int:
        return self.vectors.shape[0]

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def subset(self, idx) -> "LabeledFeatureSet":
        idx = np.asarray(idx)
        return LabeledFeatureSet(self.labels[idx], self.vectors[idx], self.sample_ids[idx])


def _nearest(dist, ids):
    # lowest sample id among exact ties
    best = np.flatnonzero(dist == dist.min())
    if best.size == 1:
        return int(best[0])
    return int(best[np.argsort(ids[best], kind="stable")[0]])


def knn1(train: LabeledFeatureSet, query, norm="l2"):
    """Label of the training sample nearest to ``query``."""
    if len(train) == 0:
        raise ValueError("training set is empty")
    q = np.asarray(query, dtype=float).reshape(-1)
    if q.size != train.vectors.shape[1]:
        raise ValueError(f"query has length {q.size}, features have {train.vectors.shape[1]}")
    dist = _distances_to(train.vectors, q, _norm_name(norm))
    return train.labels[_nearest(dist, train.sample_ids)]


def pairwise_distances(X, norm="l2") -> np.ndarray:
    """Full distance matrix, one row at a time."""
    X = np.asarray(X, dtype=float)
    norm = _norm_name(norm)
    return np.array([_distances_to(X, x, norm) for x in X]).reshape(X.shape[0], X.shape[0])


@dataclass(frozen=True)
class ExperimentConfig:
    R: int
    repeats: int = 20
    norm: str = "l2"
    rng_seed: int = 0

    def __post_init__(self):
        if self.R < 1:
            raise ValueError("R must be at least 1")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        object.__setattr__(self, "norm", _norm_name(self.norm))


@dataclass(frozen=True)
class ExperimentResult:
    accuracies: np.ndarray
    mean_accuracy: float
    std_accuracy: float
    classes: np.ndarray
    confusion: np.ndarray  # percent, rows = true class, columns = prediction
    distance_map: np.ndarray


def stratified_split(labels, R, rng):
    """Indices of ``R`` random training samples per class and the rest."""
    labels = np.asarray(labels)
    train = []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if R >= members.size:
            raise ValueError(f"R={R} leaves no test sample in class {c!r} of size {members.size}")
        train.extend(members[rng.permutation(members.size)[:R]].tolist())
    train = np.sort(np.array(train, dtype=np.int64))
    test = np.setdiff1d(np.arange(labels.size), train)
    return train, test


def run_experiment(features: LabeledFeatureSet, cfg: ExperimentConfig) -> ExperimentResult:
    """Repeated stratified 1-NN classification.

    Repeat ``r`` draws its split from ``default_rng(cfg.rng_seed + r)``.
    The standard deviation is taken over repeats with ``ddof=0``.
    """
    classes = features.classes
    if classes.size < 2:
        raise ValueError("classification needs at least two classes")
    D = pairwise_distances(features.vectors, cfg.norm)
    cls_index = {c: i for i, c in enumerate(classes.tolist())}
    true_idx = np.array([cls_index[c] for c in features.labels.tolist()])
    counts = np.zeros((classes.size, classes.size))
    acc = np.empty(cfg.repeats)
    for r in range(cfg.repeats):
        rng = np.random.default_rng(cfg.rng_seed + r)
        train, test = stratified_split(features.labels, cfg.R, rng)
        correct = 0
        for j in test:
            nn = train[_nearest(D[j, train], features.sample_ids[train])]
            counts[true_idx[j], true_idx[nn]] += 1
            correct += true_idx[nn] == true_idx[j]
        acc[r] = correct / test.size
    confusion = 100.0 * counts / counts.sum(axis=1, keepdims=True)
    return ExperimentResult(acc, float(np.mean(acc)), float(np.std(acc)), classes, confusion, D)


def _emit(target, text):
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w") as fh:
            fh.write(text)


def _start(header_line):
    buf = io.StringIO()
    if header_line:
        buf.write(header_line.rstrip("\n") + "\n")
    return buf


def write_accuracy_csv(target, result: ExperimentResult, header_line=None) -> None:
    buf = _start(header_line)
    buf.write("repeat,accuracy\n")
    for r, a in enumerate(result.accuracies):
        buf.write(f"{r},{a:.17g}\n")
    _emit(target, buf.getvalue())


def write_confusion_csv(target, result: ExperimentResult, header_line=None) -> None:
    buf = _start(header_line)
    names = [str(c) for c in result.classes]
    buf.write("true\\predicted," + ",".join(names) + "\n")
    for name, row in zip(names, result.confusion):
        buf.write(name + "," + ",".join(f"{v:.17g}" for v in row) + "\n")
    _emit(target, buf.getvalue())


def write_distmap_csv(target, sample_ids, D, header_line=None) -> None:
    buf = _start(header_line)
    ids = [str(s) for s in sample_ids]
    buf.write("sample_id," + ",".join(ids) + "\n")
    for sid, row in zip(ids, np.asarray(D)):
        buf.write(sid + "," + ",".join(f"{v:.17g}" for v in row) + "\n")
    _emit(target, buf.getvalue())
