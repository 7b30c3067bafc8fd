"""Bayes-factor classification of persistence diagrams.

A diagram D under an intensity lambda has Poisson-process log density

    log p(D) = -Lambda + sum_{d in D} log lambda(d) - log |D|!

with Lambda the total mass of the normalizing intensity. Two normalization
modes exist for posterior intensities:

* ``paper-literal`` (default): Lambda is the total mass of the *prior*
  intensity regardless of which intensity is evaluated pointwise.
* ``mass-consistent``: Lambda is the evaluated intensity's own total mass.

For plain mixture intensities the modes coincide. A class model carries a
prior, an observation model and its training diagrams; the trained posterior
is computed once and cached. Classification compares the posterior
predictive densities of two class models; ``log_bf > log(threshold)``
assigns the first class.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from ._util import as_generator, atomic_write_text, derived_rng
from .diagrams import PersistenceDiagram
from .errors import ValidationError
from .intensity import GaussianMixtureIntensity, MixtureComponent
from .posterior import ObservationModel, PosteriorIntensity, posterior_closed_form

DENSITY_MODES = ("paper-literal", "mass-consistent")


def _check_mode(mode: str) -> str:
    if mode not in DENSITY_MODES:
        raise ValidationError(
            f"mode must be one of {DENSITY_MODES}, got {mode!r}")
    return mode


def _log_density_parts(intensity, diagram: PersistenceDiagram,
                       mode: str) -> tuple[float, float]:
    """Split log p(D) into (mass, data) with log p = -mass + data.

    ``data`` is -inf when the intensity vanishes at some feature; that is a
    reportable value, not an error.
    """
    _check_mode(mode)
    if len(diagram):
        values = np.atleast_1d(np.asarray(
            intensity.evaluate(diagram.tilted_points), dtype=np.float64))
    else:
        values = np.zeros(0)
    if mode == "paper-literal" and isinstance(intensity, PosteriorIntensity):
        mass = intensity.prior.total_mass()
    else:
        mass = intensity.total_mass()
    if np.any(values <= 0.0):
        return mass, -math.inf
    data = math.fsum(np.log(values)) - math.lgamma(len(diagram) + 1)
    return mass, data


def log_poisson_density(intensity, diagram: PersistenceDiagram,
                        mode: str = "paper-literal") -> float:
    """Poisson-process log density of ``diagram`` under ``intensity``.

    Returns -inf (no exception) when a feature sits where the intensity is
    zero, e.g. outside the wedge's interior support.
    """
    mass, data = _log_density_parts(intensity, diagram, mode)
    return -mass + data


@dataclass(frozen=True)
class ClassModel:
    """A labeled class: prior, observation model, training diagrams."""

    label: str
    prior: GaussianMixtureIntensity
    observation: ObservationModel
    training: tuple[PersistenceDiagram, ...]

    def __post_init__(self):
        object.__setattr__(self, "training", tuple(self.training))
        if not self.training:
            raise ValidationError(f"class {self.label!r} has no training diagrams")

    @cached_property
    def posterior(self) -> PosteriorIntensity:
        return posterior_closed_form(self.prior, self.observation, self.training)


def posterior_predictive_logdensity(model: ClassModel,
                                    diagram: PersistenceDiagram,
                                    mode: str = "paper-literal") -> float:
    """log p(diagram | model): density under the trained posterior."""
    return log_poisson_density(model.posterior, diagram, mode)


@dataclass(frozen=True)
class BayesFactorResult:
    """Outcome of one comparison: log Bayes factor and the assignment.

    ``assignment`` is None (and ``undecidable`` True) when both densities
    are -inf, in which case ``log_bf`` is NaN.
    """

    log_bf: float
    assignment: str | None
    log_density_1: float
    log_density_2: float

    @property
    def undecidable(self) -> bool:
        return self.assignment is None


def bayes_factor(model1: ClassModel, model2: ClassModel,
                 diagram: PersistenceDiagram, threshold: float = 1.0,
                 mode: str = "paper-literal") -> BayesFactorResult:
    """Compare two class models on one diagram.

    Works in log scale. The mass terms are differenced directly, so with
    equal prior masses they cancel exactly. Assigns ``model1.label`` when
    ``log_bf > log(threshold)``, else ``model2.label``.
    """
    if threshold <= 0:
        raise ValidationError("threshold must be > 0")
    m1, d1 = _log_density_parts(model1.posterior, diagram, mode)
    m2, d2 = _log_density_parts(model2.posterior, diagram, mode)
    if math.isinf(d1) and math.isinf(d2):
        return BayesFactorResult(math.nan, None, -m1 + d1, -m2 + d2)
    log_bf = (d1 - d2) + (m2 - m1)
    assignment = model1.label if log_bf > math.log(threshold) else model2.label
    return BayesFactorResult(log_bf, assignment, -m1 + d1, -m2 + d2)


# -- k-means prior elicitation ----------------------------------------------

def _kmeans_once(points: np.ndarray, k: int,
                 rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """One k-means run: k-means++ seeding then Lloyd to convergence."""
    n = len(points)
    centers = np.empty((k, 2))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = math.fsum(d2)
        if total <= 0.0:
            centers[j] = points[rng.integers(n)]
        else:
            centers[j] = points[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))

    assign = np.zeros(n, dtype=np.int64)
    for _ in range(300):
        dists = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = np.argmin(dists, axis=1)
        for j in range(k):
            members = new_assign == j
            if np.any(members):
                centers[j] = points[members].mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its center
                worst = int(np.argmax(np.min(dists, axis=1)))
                centers[j] = points[worst]
                new_assign[worst] = j
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    inertia = float(np.sum(np.min(
        np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2), axis=1)))
    return centers, inertia


def kmeans(points: np.ndarray, k: int, rng_seed, *,
           n_init: int = 50) -> np.ndarray:
    """Deterministic k-means: 50 restarts, best inertia, centers sorted
    lexicographically so the output never depends on restart order."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if k < 1:
        raise ValidationError("k must be >= 1")
    n_distinct = len(np.unique(points, axis=0))
    if k > n_distinct:
        raise ValidationError(
            f"k={k} exceeds the {n_distinct} distinct feature location(s)")
    rng = as_generator(rng_seed)
    best, best_inertia = None, math.inf
    for _ in range(n_init):
        centers, inertia = _kmeans_once(points, k, rng)
        if inertia < best_inertia:
            best, best_inertia = centers, inertia
    order = np.lexsort((best[:, 1], best[:, 0]))
    return best[order]


def kmeans_prior(training: Sequence[PersistenceDiagram], k: int,
                 variance: float, weight: float = 1.0,
                 rng_seed=0) -> GaussianMixtureIntensity:
    """Elicit a prior by clustering pooled training features.

    All tilted features of the training diagrams are pooled and clustered;
    each cluster center becomes a mixture component with the given weight
    and variance.
    """
    pooled = [d.tilted_points for d in training if len(d)]
    if not pooled:
        raise ValidationError("no features in the training diagrams")
    centers = kmeans(np.concatenate(pooled), k, rng_seed)
    return GaussianMixtureIntensity(
        [MixtureComponent(weight, tuple(c), variance) for c in centers])


# -- ROC / AUC ----------------------------------------------------------------

def roc_curve(positive_scores, negative_scores) -> tuple[list[tuple[float, float]], float]:
    """ROC by sweeping a decision threshold over all observed scores.

    Tied scores are handled as a single threshold (one diagonal segment).
    Returns the (fpr, tpr) points from (0, 0) to (1, 1) and the trapezoid
    AUC, which is rank-based and so invariant under strictly increasing
    transformations of the scores.
    """
    pos = np.asarray(positive_scores, dtype=np.float64)
    neg = np.asarray(negative_scores, dtype=np.float64)
    if len(pos) == 0 or len(neg) == 0:
        raise ValidationError("need at least one score per class")
    if np.any(np.isnan(pos)) or np.any(np.isnan(neg)):
        raise ValidationError("NaN scores cannot be ranked; filter them first")
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    points = [(0.0, 0.0)]
    for t in thresholds:
        tpr = float(np.count_nonzero(pos >= t)) / len(pos)
        fpr = float(np.count_nonzero(neg >= t)) / len(neg)
        points.append((fpr, tpr))
    xs = np.asarray([p[0] for p in points])
    ys = np.asarray([p[1] for p in points])
    auc = float(np.trapezoid(ys, xs))
    return points, auc


def bootstrap_auc(fold_aucs, resamples: int = 2000,
                  rng_seed=0) -> tuple[float, float, float]:
    """Bootstrap the mean of per-fold AUCs.

    Resamples the folds with replacement ``resamples`` times and returns the
    (5th percentile, mean, 95th percentile) of the resampled means. With all
    fold AUCs equal to a, every statistic equals a.
    """
    aucs = np.asarray(fold_aucs, dtype=np.float64)
    if aucs.ndim != 1 or len(aucs) == 0:
        raise ValidationError("fold_aucs must be a nonempty 1-D sequence")
    if resamples < 1:
        raise ValidationError("resamples must be >= 1")
    if np.all(aucs == aucs[0]):
        # every resampled mean equals the common value; computing it would
        # only add ulp-level accumulation noise
        return (float(aucs[0]),) * 3
    rng = as_generator(rng_seed)
    idx = rng.integers(0, len(aucs), size=(resamples, len(aucs)))
    draws = aucs[idx].mean(axis=1)
    return (float(np.percentile(draws, 5)), float(np.mean(draws)),
            float(np.percentile(draws, 95)))


# -- cross-validation ----------------------------------------------------------

@dataclass(frozen=True)
class PriorSpec:
    """How per-class priors are built inside cross-validation.

    ``kind='kmeans'``: cluster each class's training features into ``k``
    centers with the given component variance and weight.
    ``kind='flat'``: one shared broad component (mean/variance/weight) for
    both classes.
    """

    kind: str
    k: int = 3
    variance: float = 2.0
    weight: float = 1.0
    mean: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("kmeans", "flat"):
            raise ValidationError(f"prior kind must be 'kmeans' or 'flat', got {self.kind!r}")
        if self.variance <= 0 or self.weight <= 0:
            raise ValidationError("variance and weight must be > 0")

    def build(self, training: Sequence[PersistenceDiagram],
              rng_seed) -> GaussianMixtureIntensity:
        if self.kind == "kmeans":
            return kmeans_prior(training, self.k, self.variance, self.weight,
                                rng_seed)
        return GaussianMixtureIntensity(
            [MixtureComponent(self.weight, self.mean, self.variance)])


@dataclass(frozen=True)
class CrossValidationConfig:
    observation: ObservationModel
    prior: PriorSpec
    folds: int = 10
    threshold: float = 1.0
    mode: str = "paper-literal"
    rng_seed: int = 0
    labels: tuple[str, str] = ("class1", "class2")

    def __post_init__(self):
        _check_mode(self.mode)
        if self.folds < 2:
            raise ValidationError("folds must be >= 2")
        if self.threshold <= 0:
            raise ValidationError("threshold must be > 0")


@dataclass(frozen=True)
class BayesFactorReport:
    """Cross-validation outcome: per-diagram scores, fold ROC/AUCs,
    the mean AUC and its bootstrap summary."""

    labels: tuple[str, str]
    folds: int
    threshold: float
    mode: str
    rng_seed: int
    entries: tuple[dict, ...]
    fold_aucs: tuple[float, ...]
    roc_points: tuple[tuple[tuple[float, float], ...], ...]
    auc: float
    bootstrap_summary: tuple[float, float, float]
    n_undecidable: int = 0
    prior_description: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "folds": self.folds,
            "threshold": self.threshold,
            "mode": self.mode,
            "rng_seed": self.rng_seed,
            "entries": list(self.entries),
            "fold_aucs": list(self.fold_aucs),
            "roc_points": [[list(p) for p in fold] for fold in self.roc_points],
            "auc": self.auc,
            "bootstrap_summary": {
                "p5": self.bootstrap_summary[0],
                "mean": self.bootstrap_summary[1],
                "p95": self.bootstrap_summary[2],
            },
            "n_undecidable": self.n_undecidable,
            "prior": self.prior_description,
        }

    def write_json(self, path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2,
                                           sort_keys=True) + "\n")


def _stratified_folds(n: int, folds: int,
                      rng: np.random.Generator) -> list[np.ndarray]:
    if n < folds:
        raise ValidationError(
            f"cannot split {n} diagrams into {folds} non-empty folds")
    return np.array_split(rng.permutation(n), folds)


def cross_validate(class1: Sequence[PersistenceDiagram],
                   class2: Sequence[PersistenceDiagram],
                   config: CrossValidationConfig) -> BayesFactorReport:
    """Stratified k-fold cross-validation of the Bayes-factor classifier.

    Per fold, both class models (priors included) are fit on the training
    portion only; held-out diagrams of both classes are scored by log Bayes
    factor, from which the fold's ROC and AUC are computed (class 1 is the
    positive class). Fully deterministic given ``config.rng_seed``.
    """
    class1, class2 = list(class1), list(class2)
    folds1 = _stratified_folds(len(class1), config.folds,
                               derived_rng(config.rng_seed, 0))
    folds2 = _stratified_folds(len(class2), config.folds,
                               derived_rng(config.rng_seed, 1))

    entries: list[dict] = []
    fold_aucs: list[float] = []
    roc_all: list[tuple] = []
    n_undecidable = 0

    for f in range(config.folds):
        train1 = [class1[i] for i in np.concatenate(
            [folds1[g] for g in range(config.folds) if g != f])]
        train2 = [class2[i] for i in np.concatenate(
            [folds2[g] for g in range(config.folds) if g != f])]
        prior1 = config.prior.build(train1, derived_rng(config.rng_seed, 2, f, 0))
        prior2 = config.prior.build(train2, derived_rng(config.rng_seed, 2, f, 1))
        model1 = ClassModel(config.labels[0], prior1, config.observation, train1)
        model2 = ClassModel(config.labels[1], prior2, config.observation, train2)

        scores: dict[str, list[float]] = {config.labels[0]: [],
                                          config.labels[1]: []}
        for true_label, fold_idx, diagrams in (
                (config.labels[0], folds1[f], class1),
                (config.labels[1], folds2[f], class2)):
            for i in fold_idx:
                result = bayes_factor(model1, model2, diagrams[i],
                                      config.threshold, config.mode)
                entries.append({
                    "fold": f,
                    "true_label": true_label,
                    "index": int(i),
                    "log_density_1": result.log_density_1,
                    "log_density_2": result.log_density_2,
                    "log_bf": result.log_bf,
                    "assignment": result.assignment,
                })
                if result.undecidable:
                    n_undecidable += 1
                else:
                    scores[true_label].append(result.log_bf)

        points, auc = roc_curve(scores[config.labels[0]],
                                scores[config.labels[1]])
        roc_all.append(tuple(points))
        fold_aucs.append(auc)

    mean_auc = math.fsum(fold_aucs) / len(fold_aucs)
    summary = bootstrap_auc(fold_aucs, 2000, derived_rng(config.rng_seed, 3))
    return BayesFactorReport(
        labels=config.labels, folds=config.folds, threshold=config.threshold,
        mode=config.mode, rng_seed=config.rng_seed, entries=tuple(entries),
        fold_aucs=tuple(fold_aucs), roc_points=tuple(roc_all), auc=mean_auc,
        bootstrap_summary=summary, n_undecidable=n_undecidable,
        prior_description={
            "kind": config.prior.kind,
            **({"k": config.prior.k} if config.prior.kind == "kmeans"
               else {"mean": list(config.prior.mean)}),
            "variance": config.prior.variance,
            "weight": config.prior.weight,
        })
