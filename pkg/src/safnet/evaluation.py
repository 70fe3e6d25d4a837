"""Stratified cross-validation, the six-metric suite, grid search, and experiment runs."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np

from . import baselines
from .model import ModelDims, MultiViewSample, predict_prob
from .training import TrainConfig, train_model


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: tuple[int, ...]          # fold index per sample
    sparse_classes: tuple[int, ...] = ()  # labels with fewer members than folds

    def fold_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignments) if f == fold]


def stratified_kfold(labels: Sequence[int], k: int, seed: int) -> FoldPlan:
    """Shuffle within each class, then deal round-robin to folds.

    The deal pointer continues across classes (positives first), which keeps
    every fold's total size within one of n/k, not just the per-class counts.
    """
    n = len(labels)
    if k < 2 or k > n:
        raise ValueError(f"fold count must satisfy 2 <= k <= {n}, got {k}")
    rng = np.random.default_rng(seed)
    assignments = [0] * n
    sparse = []
    cursor = 0
    for cls in (1, 0):
        members = [i for i, y in enumerate(labels) if y == cls]
        if not members:
            continue
        if len(members) < k:
            sparse.append(cls)
        order = rng.permutation(len(members))
        for j in order:
            assignments[members[j]] = cursor % k
            cursor += 1
    return FoldPlan(k=k, assignments=tuple(assignments), sparse_classes=tuple(sparse))


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            tp=self.tp + other.tp, fp=self.fp + other.fp,
            tn=self.tn + other.tn, fn=self.fn + other.fn,
        )


def confusion(probs: Sequence[float], labels: Sequence[int], threshold: float) -> ConfusionMatrix:
    """Counts with prob >= threshold predicted positive (ties count positive)."""
    if len(probs) != len(labels):
        raise ValueError(f"got {len(probs)} probabilities for {len(labels)} labels")
    tp = fp = tn = fn = 0
    for p, y in zip(probs, labels):
        pred = 1 if p >= threshold else 0
        if pred == 1 and y == 1:
            tp += 1
        elif pred == 1:
            fp += 1
        elif y == 1:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


METRIC_NAMES = ("sen", "spe", "pre", "f1", "acc", "gm")


@dataclass(frozen=True)
class Metrics:
    sen: float
    spe: float
    pre: float
    f1: float
    acc: float
    gm: float
    degenerate: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def metrics_from_cm(cm: ConfusionMatrix) -> Metrics:
    """Sensitivity, specificity, precision, F1, accuracy, and sqrt(sen*spe).

    A 0/0 denominator yields 0 for that metric and adds its name to the
    degeneracy flags instead of raising or producing NaN.
    """
    degenerate = []

    def ratio(name: str, num: float, den: float) -> float:
        if den == 0:
            degenerate.append(name)
            return 0.0
        return num / den

    sen = ratio("sen", cm.tp, cm.tp + cm.fn)
    spe = ratio("spe", cm.tn, cm.tn + cm.fp)
    pre = ratio("pre", cm.tp, cm.tp + cm.fp)
    f1 = ratio("f1", 2.0 * pre * sen, pre + sen)
    acc = ratio("acc", cm.tp + cm.tn, cm.total)
    gm = math.sqrt(sen * spe)
    return Metrics(sen=sen, spe=spe, pre=pre, f1=f1, acc=acc, gm=gm, degenerate=tuple(degenerate))


@dataclass(frozen=True)
class MetricReport:
    per_fold: tuple[Metrics, ...]
    per_fold_cm: tuple[ConfusionMatrix, ...]
    averaged: Metrics
    cumulative: ConfusionMatrix
    extras: tuple[dict, ...] = ()  # per-fold details such as the grid-searched k


def aggregate_folds(per_fold: Sequence[tuple[ConfusionMatrix, Metrics]]) -> MetricReport:
    """Arithmetic mean of each metric over folds plus the elementwise CM sum."""
    if not per_fold:
        raise ValueError("aggregate_folds: no folds to aggregate")
    cms = tuple(cm for cm, _ in per_fold)
    mets = tuple(m for _, m in per_fold)
    cumulative = cms[0]
    for cm in cms[1:]:
        cumulative = cumulative + cm
    means = {name: sum(getattr(m, name) for m in mets) / len(mets) for name in METRIC_NAMES}
    flags = sorted({flag for m in mets for flag in m.degenerate})
    averaged = Metrics(**means, degenerate=tuple(flags))
    return MetricReport(per_fold=mets, per_fold_cm=cms, averaged=averaged, cumulative=cumulative)


@dataclass(frozen=True)
class ModelSpec:
    """Which classifier an experiment runs and its model-side settings."""

    kind: str = "safnet"  # safnet | knn | mlp
    d_model: int = 64
    d_k: int = 32
    knn_k: int = 5
    knn_grid: tuple[int, ...] | None = None  # set => inner 3-fold grid search per outer fold
    mlp_hidden: int = 128

    def __post_init__(self):
        if self.kind not in ("safnet", "knn", "mlp"):
            raise ValueError(f"unknown model kind {self.kind!r}")


def _fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def _fit_predict(
    spec: ModelSpec,
    train: list[MultiViewSample],
    test: list[MultiViewSample],
    config: TrainConfig,
    seed: int,
) -> tuple[list[float], dict]:
    """Train one model on `train` and return test probabilities plus fold details."""
    config = replace(config, seed=seed)
    if spec.kind == "safnet":
        dims = ModelDims(d_in=train[0].features.rows, d_model=spec.d_model, d_k=spec.d_k)
        params, history = train_model(train, config, dims)
        probs = [predict_prob(s, params) for s in test]
        return probs, {"final_loss": history.losses[-1]}
    if spec.kind == "knn":
        k = spec.knn_k
        extra: dict = {}
        if spec.knn_grid:
            result = grid_search(
                replace(spec, knn_grid=None),
                [{"knn_k": kk} for kk in spec.knn_grid],
                train,
                seed=seed,
                config=config,
            )
            k = result.best["knn_k"]
            extra["knn_k"] = k
        knn = baselines.knn_fit(train, k)
        probs = [baselines.knn_predict(knn, baselines.flatten_features(s))[1] for s in test]
        return probs, extra
    # mlp: unweighted BCE regardless of class skew
    mlp_config = replace(config, class_weight_pos=1.0, class_weight_neg=1.0)
    mlp = baselines.mlp_train(train, mlp_config, hidden=spec.mlp_hidden)
    probs = [baselines.mlp_predict_prob(mlp, baselines.flatten_features(s)) for s in test]
    return probs, {}


@dataclass(frozen=True)
class GridSearchResult:
    best: dict
    best_index: int
    mean_accuracies: tuple[float, ...]


def grid_search(
    spec: ModelSpec,
    grid: Sequence[dict],
    train_set: Sequence[MultiViewSample],
    seed: int,
    config: TrainConfig | None = None,
    k: int = 3,
) -> GridSearchResult:
    """Pick the grid entry with the best mean accuracy over an inner stratified CV.

    Ties keep the first-listed entry, so a fixed grid order makes the
    selection deterministic.
    """
    if not grid:
        raise ValueError("grid_search: empty grid")
    if config is None:
        config = TrainConfig(seed=seed)
    spec_fields = {f.name for f in fields(ModelSpec)}
    config_fields = {f.name for f in fields(TrainConfig)}

    samples = list(train_set)
    plan = stratified_kfold([s.label for s in samples], k, seed)
    scores = []
    for combo in grid:
        c_spec, c_config = spec, config
        for key, value in combo.items():
            if key in spec_fields:
                c_spec = replace(c_spec, **{key: value})
            elif key in config_fields:
                c_config = replace(c_config, **{key: value})
            else:
                raise ValueError(f"grid_search: unknown parameter {key!r}")
        accs = []
        for fold in range(k):
            test_idx = set(plan.fold_indices(fold))
            inner_train = [s for i, s in enumerate(samples) if i not in test_idx]
            inner_test = [samples[i] for i in sorted(test_idx)]
            probs, _ = _fit_predict(c_spec, inner_train, inner_test, c_config, _fold_seed(seed, fold))
            cm = confusion(probs, [s.label for s in inner_test], c_config.threshold)
            accs.append(metrics_from_cm(cm).acc)
        scores.append(sum(accs) / len(accs))
    best_index = max(range(len(scores)), key=lambda i: (scores[i], -i))
    return GridSearchResult(best=dict(grid[best_index]), best_index=best_index,
                            mean_accuracies=tuple(scores))


def _run_fold(args) -> tuple[int, ConfusionMatrix, Metrics, dict]:
    samples, plan, fold, spec, config, seed = args
    test_idx = set(plan.fold_indices(fold))
    train = [s for i, s in enumerate(samples) if i not in test_idx]
    test = [samples[i] for i in sorted(test_idx)]
    probs, extra = _fit_predict(spec, train, test, config, _fold_seed(seed, fold))
    cm = confusion(probs, [s.label for s in test], config.threshold)
    return fold, cm, metrics_from_cm(cm), extra


def run_experiment(
    dataset: Sequence[MultiViewSample],
    spec: ModelSpec,
    config: TrainConfig,
    k: int = 10,
    jobs: int = 1,
) -> MetricReport:
    """Stratified k-fold cross-validation of one model over the dataset.

    Fold seeds are derived from (config.seed, fold index), so results do not
    depend on execution order even when folds run in parallel.
    """
    samples = list(dataset)
    labels = [s.label for s in samples]
    if len(set(labels)) < 2:
        raise ValueError("run_experiment: dataset must contain both classes")
    plan = stratified_kfold(labels, k, config.seed)
    work = [(samples, plan, fold, spec, config, config.seed) for fold in range(k)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_fold, work))
    else:
        results = [_run_fold(w) for w in work]
    results.sort(key=lambda r: r[0])
    report = aggregate_folds([(cm, m) for _, cm, m, _ in results])
    return replace(report, extras=tuple(extra for _, _, _, extra in results))


def report_to_json(report: MetricReport, model: str, seed: int) -> dict:
    """JSON-serializable document with per-fold arrays, averages, and the cumulative CM."""
    return {
        "model": model,
        "seed": seed,
        "folds": len(report.per_fold),
        "per_fold": {name: [getattr(m, name) for m in report.per_fold] for name in METRIC_NAMES},
        "per_fold_degenerate": [list(m.degenerate) for m in report.per_fold],
        "averaged": report.averaged.as_dict(),
        "cumulative_cm": _cm_dict(report.cumulative),
        "extras": [dict(sorted(e.items())) for e in report.extras],
    }


def confusion_to_json(report: MetricReport) -> dict:
    return {
        "cumulative": _cm_dict(report.cumulative),
        "per_fold": [_cm_dict(cm) for cm in report.per_fold_cm],
    }


def _cm_dict(cm: ConfusionMatrix) -> dict:
    return {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn}


DISPLAY_NAMES = {"sen": "Sen", "spe": "Spe", "pre": "Pre", "f1": "F1", "acc": "Acc", "gm": "GM"}


def report_to_text(report: MetricReport, model: str) -> str:
    """Aligned table of the averaged metrics, in percent with two decimals."""
    header = ["Model"] + [DISPLAY_NAMES[n] for n in METRIC_NAMES]
    row = [model] + [f"{100.0 * getattr(report.averaged, n):.2f}" for n in METRIC_NAMES]
    widths = [max(len(h), len(r)) for h, r in zip(header, row)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join(r.ljust(w) for r, w in zip(row, widths)).rstrip(),
    ]
    return "\n".join(lines) + "\n"
