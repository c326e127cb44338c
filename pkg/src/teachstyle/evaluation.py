"""K-fold cross-validation and the modality ablation harness."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .features import GroupingConfig, UtteranceRecord, stack_labels
from .metrics import ccc, rmse
from .model import TASKS, ModelConfig, predict_batch, train

log = logging.getLogger(__name__)

ABLATION_SETS = (
    ("A", ("acoustic",), "mmdnn"),
    ("A+V", ("acoustic", "visual"), "mmdnn"),
    ("A+V+T", ("acoustic", "visual", "textual"), "mmdnn"),
    ("A+V+T+Att", ("acoustic", "visual", "textual"), "ammdnn"),
)


def kfold_split(ids: Sequence, k: int = 5, seed: int = 0) -> list[list]:
    """Shuffle ``ids`` with ``seed`` and deal them into ``k`` folds.

    Fold sizes differ by at most one; the first ``len(ids) % k`` folds are
    the larger ones.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(ids) < k:
        raise ValueError(f"cannot split {len(ids)} ids into {k} folds")
    order = np.random.default_rng(seed).permutation(len(ids))
    return [[ids[i] for i in chunk] for chunk in np.array_split(order, k)]


def task_metrics(y: np.ndarray, pred: np.ndarray) -> dict[str, float]:
    out = {}
    for t, name in enumerate(TASKS):
        out[f"{name}_rmse"] = rmse(y[:, t], pred[:, t])
        out[f"{name}_ccc"] = ccc(y[:, t], pred[:, t])
    return out


@dataclass
class MetricReport:
    """Per-fold metrics, their mean across folds, and metrics on pooled predictions."""

    folds: list[dict[str, float]]
    pooled: dict[str, float]
    test_ids: list[list[str]] = field(default_factory=list)

    @property
    def mean(self) -> dict[str, float]:
        keys = self.folds[0].keys()
        return {k: float(np.mean([f[k] for f in self.folds])) for k in keys}

    def to_json(self) -> dict:
        return {"folds": self.folds, "mean": self.mean, "pooled": self.pooled}

    def rows(self) -> list[dict]:
        rows = [{"fold": str(i), **f} for i, f in enumerate(self.folds)]
        rows.append({"fold": "mean", **self.mean})
        rows.append({"fold": "pooled", **self.pooled})
        return rows

    def write(self, out_dir: str | Path) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(json.dumps(self.to_json(), indent=1) + "\n")
        _write_csv(out_dir / "report.csv", self.rows())


def _write_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


Trainer = Callable[[Sequence[UtteranceRecord], int], Callable[[Sequence[UtteranceRecord]], np.ndarray]]


def cross_validate(records: Sequence[UtteranceRecord], config: ModelConfig, grouping: GroupingConfig,
                   k: int = 5, seed: int = 0, trainer: Trainer | None = None,
                   progress: Callable[[str], None] | None = None) -> MetricReport:
    """Train on k-1 folds, score the held-out fold, for every fold.

    ``trainer(train_records, fold_seed)`` may replace the default model
    training; it must return a function mapping records to (n x 2)
    predictions.
    """
    labels = stack_labels(records)
    by_id = {r.id: i for i, r in enumerate(records)}
    if len(by_id) != len(records):
        raise ValueError("duplicate utterance ids")
    folds = kfold_split([r.id for r in records], k, seed)
    fold_seeds = np.random.SeedSequence(seed).generate_state(k)
    pooled = np.zeros_like(labels)
    reports = []
    for f, test_ids in enumerate(folds):
        test_idx = [by_id[i] for i in test_ids]
        held = set(test_ids)
        train_recs = [r for r in records if r.id not in held]
        test_recs = [records[i] for i in test_idx]
        try:
            if trainer is None:
                model, _ = train(train_recs, config, grouping, int(fold_seeds[f]))
                pred = predict_batch(model, test_recs)
            else:
                pred = np.asarray(trainer(train_recs, int(fold_seeds[f]))(test_recs), dtype=np.float64)
        except Exception as exc:
            raise RuntimeError(f"fold {f}: {exc}") from exc
        pooled[test_idx] = pred
        reports.append(task_metrics(labels[test_idx], pred))
        if progress is not None:
            progress(f"fold {f}: " + ", ".join(f"{k}={v:.4f}" for k, v in reports[-1].items()))
    return MetricReport(reports, task_metrics(labels, pooled), [list(t) for t in folds])


def ablation(records: Sequence[UtteranceRecord], grouping: GroupingConfig, config: ModelConfig | None = None,
             k: int = 5, seed: int = 0, progress: Callable[[str], None] | None = None,
             feature_sets: Sequence[str] | None = None) -> list[dict]:
    """Cross-validated CCC/RMSE for A, A+V, A+V+T (no attention) and A+V+T+Att.

    Masked modalities are dropped from the grouping. Returns one row per
    feature set with keys feature_set, p_ccc, a_ccc, p_rmse, a_rmse.
    ``feature_sets`` restricts the run to the named rows.
    """
    config = config or ModelConfig()
    known = [name for name, _, _ in ABLATION_SETS]
    wanted = known if feature_sets is None else list(feature_sets)
    unknown = sorted(set(wanted) - set(known))
    if unknown:
        raise ValueError(f"unknown feature sets {unknown}; choose from {known}")
    for m in ("acoustic", "visual", "textual"):
        if m not in grouping.dims:
            raise ValueError(f"ablation needs the {m} modality, grouping lacks it")
        missing = [r.id for r in records if m not in r.features]
        if missing:
            raise ValueError(f"ablation needs the {m} modality, missing in records {missing[:3]}")
    rows = []
    for name, mods, variant in ABLATION_SETS:
        if name not in wanted:
            continue
        report = cross_validate(records, replace(config, variant=variant), grouping.restrict(mods), k, seed)
        mean = report.mean
        rows.append({
            "feature_set": name,
            "p_ccc": mean["pleasure_ccc"],
            "a_ccc": mean["arousal_ccc"],
            "p_rmse": mean["pleasure_rmse"],
            "a_rmse": mean["arousal_rmse"],
        })
        if progress is not None:
            progress(f"{name}: P CCC {mean['pleasure_ccc']:.4f}, A CCC {mean['arousal_ccc']:.4f}")
    return rows


def write_ablation_csv(rows: list[dict], path: str | Path) -> None:
    _write_csv(Path(path), rows)
