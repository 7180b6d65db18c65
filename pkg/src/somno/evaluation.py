"""Leave-one-subject-out evaluation of the CNN, its ablations and the band-power baselines."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from . import baselines
from . import model as mdl
from .data.container import LabeledSet
from .errors import DataError


@dataclass(frozen=True)
class FoldSpec:
    test_subject: int
    train_subjects: tuple
    repeat_index: int
    seed: int

    @property
    def init_seed(self) -> int:
        return int(np.random.SeedSequence([self.seed, 0]).generate_state(1)[0])

    @property
    def shuffle_seed(self) -> int:
        return int(np.random.SeedSequence([self.seed, 1]).generate_state(1)[0])


def fold_seed(master_seed: int, repeat: int, subject: int) -> int:
    return int(np.random.SeedSequence([master_seed, repeat, subject]).generate_state(1)[0])


def loso_split(subjects, repeats: int = 1, master_seed: int = 0) -> list:
    """One fold per subject per repeat, repeat-major.

    ``subjects`` is a ``LabeledSet`` or a sequence of subject ids.  Fold
    seeds depend only on ``(master_seed, repeat, subject)``.
    """
    if isinstance(subjects, LabeledSet):
        subjects = subjects.subject_ids
    subjects = sorted(set(int(s) for s in subjects))
    if len(subjects) < 2:
        raise DataError("leave-one-subject-out needs at least two subjects")
    folds = []
    for r in range(repeats):
        for s in subjects:
            train = tuple(t for t in subjects if t != s)
            folds.append(FoldSpec(s, train, r, fold_seed(master_seed, r, s)))
    return folds


def _split(dataset: LabeledSet, fold: FoldSpec):
    test = dataset.subjects == fold.test_subject
    train = np.isin(dataset.subjects, fold.train_subjects)
    if np.any(test & train):
        raise AssertionError("train and test subjects overlap")
    return np.flatnonzero(train), np.flatnonzero(test)


def run_fold(dataset: LabeledSet, fold: FoldSpec, model_cfg: mdl.ModelConfig, train_cfg: mdl.TrainConfig, return_params: bool = False):
    """Train once and return bundle accuracy on the held-out subject after every epoch.

    With ``return_params`` the trained parameters are returned as well.
    """
    train_idx, test_idx = _split(dataset, fold)
    x_test, y_test = dataset.values[test_idx], dataset.labels[test_idx]
    cfg = replace(model_cfg, rng_seed=fold.init_seed)
    tcfg = replace(train_cfg, shuffle_seed=fold.shuffle_seed)
    acc = np.empty(train_cfg.epochs)

    def evaluate(epoch, params):
        pred, _ = mdl.predict_bundle(x_test, params, cfg)
        acc[epoch - 1] = mdl.accuracy(pred, y_test)

    res = mdl.train(dataset.values[train_idx], dataset.labels[train_idx], tcfg, cfg, on_epoch_end=evaluate)
    return (acc, res.params) if return_params else acc


@dataclass
class EvalReport:
    method: str
    variant: str
    subjects: list
    accuracy: np.ndarray  # (subject, repeat, epoch)
    models: dict = field(default_factory=dict)  # (subject, repeat) -> (ModelParams, ModelConfig), if kept

    @property
    def epochs(self) -> int:
        return self.accuracy.shape[2]

    @property
    def n_folds(self) -> int:
        return self.accuracy.shape[0] * self.accuracy.shape[1]

    def mean_per_epoch(self) -> np.ndarray:
        return self.accuracy.mean(axis=(0, 1))

    def stderr_per_epoch(self) -> np.ndarray:
        """Standard error over all (subject, repeat) folds."""
        flat = self.accuracy.reshape(self.n_folds, self.epochs)
        if self.n_folds < 2:
            return np.zeros(self.epochs)
        return flat.std(axis=0, ddof=1) / math.sqrt(self.n_folds)

    def subject_means(self, epoch: int) -> np.ndarray:
        """Per-subject accuracy at a 1-based epoch, averaged over repeats."""
        return self.accuracy[:, :, epoch - 1].mean(axis=1)

    def peak_epoch(self) -> int:
        """1-based epoch of the highest mean accuracy (earliest on ties)."""
        return int(np.argmax(self.mean_per_epoch())) + 1

    def summary(self) -> dict:
        means = self.mean_per_epoch()
        return {
            "method": self.method,
            "variant": self.variant,
            "subjects": list(self.subjects),
            "repeats": int(self.accuracy.shape[1]),
            "folds_per_epoch": self.n_folds,
            "mean_accuracy": means.tolist(),
            "standard_error": self.stderr_per_epoch().tolist(),
            "peak_epoch": self.peak_epoch(),
            "peak_accuracy": float(means.max()),
        }


def _fold_task(args):
    dataset, fold, model_cfg, train_cfg = args
    return run_fold(dataset, fold, model_cfg, train_cfg, return_params=True)


def run_cnn_experiment(
    dataset: LabeledSet,
    model_cfg: mdl.ModelConfig = mdl.ModelConfig(),
    train_cfg: mdl.TrainConfig = mdl.TrainConfig(),
    repeats: int = 10,
    master_seed: int = 0,
    jobs: int = 1,
    keep_models: bool = False,
) -> EvalReport:
    """Repeated LOSO with per-epoch bundle accuracies.

    Folds are independent, so ``jobs > 1`` runs them in worker processes;
    the report does not depend on scheduling.  ``keep_models`` stores each
    fold's final parameters (with its seeded config) on the report.
    """
    folds = loso_split(dataset, repeats, master_seed)
    subjects = dataset.subject_ids
    tasks = [(dataset, f, model_cfg, train_cfg) for f in folds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            curves = list(pool.map(_fold_task, tasks))
    else:
        curves = [_fold_task(t) for t in tasks]
    acc = np.zeros((len(subjects), repeats, train_cfg.epochs))
    models = {}
    for fold, (curve, params) in zip(folds, curves):
        acc[subjects.index(fold.test_subject), fold.repeat_index] = curve
        if keep_models:
            models[(fold.test_subject, fold.repeat_index)] = (params, replace(model_cfg, rng_seed=fold.init_seed))
    return EvalReport("cnn", model_cfg.name, subjects, acc, models)


def run_ablations(
    dataset: LabeledSet,
    variants,
    train_cfg: mdl.TrainConfig = mdl.TrainConfig(),
    repeats: int = 10,
    master_seed: int = 0,
    jobs: int = 1,
) -> dict:
    """Same protocol and fold seeds for every variant; returns ``{name: EvalReport}``."""
    out = {}
    for v in variants:
        cfg = mdl.ModelConfig.from_name(v) if isinstance(v, str) else v
        out[cfg.name] = run_cnn_experiment(dataset, cfg, train_cfg, repeats, master_seed, jobs)
    return out


@dataclass
class BaselineReport:
    method: str
    subjects: list
    accuracy: np.ndarray  # (subject,)

    @property
    def mean(self) -> float:
        return float(self.accuracy.mean())


def run_baseline_experiment(dataset: LabeledSet, method: str, features=None) -> BaselineReport:
    """One LOSO pass of a band-power classifier (``lda``, ``lr``, ``gnb`` or ``knn``)."""
    if method not in baselines.CLASSIFIERS:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(baselines.CLASSIFIERS)}")
    if features is None:
        features = baselines.feature_matrix(dataset.values)
    subjects = dataset.subject_ids
    acc = []
    for fold in loso_split(subjects):
        train_idx, test_idx = _split(dataset, fold)
        clf = baselines.fit_classifier(method, features[train_idx], dataset.labels[train_idx])
        acc.append(mdl.accuracy(clf.predict(features[test_idx]), dataset.labels[test_idx]))
    return BaselineReport(method, subjects, np.array(acc))


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float

    def as_dict(self) -> dict:
        return {"t": self.t, "df": self.df, "p": self.p}


def student_t_sf2(t: float, df: int) -> float:
    """Two-tailed tail probability ``P(|T| >= |t|)`` via the regularised incomplete beta."""
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def paired_ttest(a, b) -> TTestResult:
    """Two-tailed paired t-test on ``a - b``.

    Zero-variance differences give ``p = 0`` (with infinite ``t``) when the
    mean difference is non-zero, and ``t = 0, p = 1`` when all differences
    vanish.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-D and of equal length")
    n = len(a)
    if n < 2:
        raise ValueError("a paired t-test needs at least two pairs")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    df = n - 1
    if sd == 0:
        if mean == 0:
            return TTestResult(0.0, df, 1.0)
        return TTestResult(math.copysign(math.inf, mean), df, 0.0)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(float(t), df, student_t_sf2(t, df))


# --- report emission ---------------------------------------------------------


def write_accuracy_csv(reports, path) -> None:
    """Long-format CSV ``method,variant,subject,repeat,epoch,accuracy`` (1-based repeat/epoch)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "variant", "subject", "repeat", "epoch", "accuracy"])
        for rep in reports:
            if isinstance(rep, BaselineReport):
                for s, a in zip(rep.subjects, rep.accuracy):
                    w.writerow([rep.method, "", s, 1, 1, repr(float(a))])
                continue
            for i, s in enumerate(rep.subjects):
                for r in range(rep.accuracy.shape[1]):
                    for e in range(rep.epochs):
                        w.writerow([rep.method, rep.variant, s, r + 1, e + 1, repr(float(rep.accuracy[i, r, e]))])


def build_summary(cnn_reports=(), baseline_reports=(), compare_epoch=None) -> dict:
    """Means, standard errors and paired t-tests of every baseline against each CNN report.

    ``compare_epoch`` (1-based) selects the CNN epoch used in the
    comparison; it defaults to each report's peak epoch.
    """
    out = {"significance_level": 0.05, "cnn": [], "baselines": [], "ttests": []}
    for rep in cnn_reports:
        out["cnn"].append(rep.summary())
    for b in baseline_reports:
        out["baselines"].append(
            {
                "method": b.method,
                "subjects": list(b.subjects),
                "accuracy": b.accuracy.tolist(),
                "mean_accuracy": b.mean,
                "standard_error": float(b.accuracy.std(ddof=1) / math.sqrt(len(b.accuracy))) if len(b.accuracy) > 1 else 0.0,
            }
        )
    for rep in cnn_reports:
        epoch = compare_epoch or rep.peak_epoch()
        ours = rep.subject_means(epoch)
        for b in baseline_reports:
            res = paired_ttest(ours, b.accuracy)
            out["ttests"].append({"a": rep.variant, "b": b.method, "epoch": epoch, **res.as_dict()})
    return out


def write_summary_json(summary: dict, path) -> None:
    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return str(o)
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, list):
            return [clean(v) for v in o]
        return o

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clean(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
