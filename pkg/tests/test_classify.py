import json
import math

import numpy as np
import pytest

from bayespd import (BayesFactorResult, ClassModel, CrossValidationConfig,
                     GaussianMixtureIntensity, MixtureComponent,
                     ObservationModel, PersistenceDiagram, PriorSpec,
                     ValidationError, bayes_factor, bootstrap_auc,
                     cross_validate, kmeans, kmeans_prior,
                     log_poisson_density, posterior_predictive_logdensity,
                     roc_curve, sample_poisson_pp)
from bayespd._util import derived_rng

UNIT_MASS = GaussianMixtureIntensity([MixtureComponent(1.0, (10.0, 10.0), 1.0)])


def diagram_at(points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return PersistenceDiagram.from_tilted(pts[:, 0], pts[:, 1],
                                          np.ones(len(pts), dtype=int))


# -- Poisson log density -------------------------------------------------------

def test_log_density_pinned_value():
    # mean 10 sigma inside the wedge: total mass exactly 1; one point at
    # distance 1 contributes log(1/(2 pi)) - 1/2
    assert UNIT_MASS.total_mass() == 1.0
    value = log_poisson_density(UNIT_MASS, diagram_at([(11.0, 10.0)]))
    assert value == pytest.approx(-1.5 - math.log(2 * math.pi), rel=1e-15)


def test_log_density_empty_diagram_is_minus_mass():
    assert log_poisson_density(UNIT_MASS, PersistenceDiagram.empty()) == -1.0


def test_log_density_counts_permutations():
    d2 = diagram_at([(11.0, 10.0), (10.0, 11.0)])
    single = -math.log(2 * math.pi) - 0.5
    assert log_poisson_density(UNIT_MASS, d2) == pytest.approx(
        -1.0 + 2 * single - math.log(2), rel=1e-14)


def test_log_density_is_minus_inf_on_unsupported_feature():
    assert log_poisson_density(UNIT_MASS, diagram_at([(1000.0, 1000.0)])) == -math.inf


def test_log_density_modes_agree_on_plain_mixture():
    d = diagram_at([(10.5, 10.5)])
    assert (log_poisson_density(UNIT_MASS, d, "paper-literal")
            == log_poisson_density(UNIT_MASS, d, "mass-consistent"))
    with pytest.raises(ValidationError, match="mode"):
        log_poisson_density(UNIT_MASS, d, "bayes")


def test_log_density_modes_differ_by_mass_on_posterior():
    clutter = GaussianMixtureIntensity([MixtureComponent(1.0, (10.0, 10.0), 1.0)])
    model = ClassModel("a", UNIT_MASS, ObservationModel(0.5, 0.5, clutter),
                       (diagram_at([(10.0, 10.0)]),))
    post = model.posterior
    d = diagram_at([(10.2, 10.2)])
    gap = (log_poisson_density(post, d, "paper-literal")
           - log_poisson_density(post, d, "mass-consistent"))
    assert gap == pytest.approx(post.total_mass() - post.prior.total_mass(),
                                rel=1e-12)
    assert posterior_predictive_logdensity(model, d) == log_poisson_density(post, d)


# -- Bayes factors ---------------------------------------------------------------

def class_pair(mean1=(9.0, 10.0), mean2=(11.0, 10.0)):
    obs = ObservationModel(0.5, 0.5)
    prior1 = GaussianMixtureIntensity([MixtureComponent(1.0, mean1, 1.0)])
    prior2 = GaussianMixtureIntensity([MixtureComponent(1.0, mean2, 1.0)])
    m1 = ClassModel("left", prior1, obs, (diagram_at([mean1]),))
    m2 = ClassModel("right", prior2, obs, (diagram_at([mean2]),))
    return m1, m2


def test_bayes_factor_antisymmetry_and_assignment():
    m1, m2 = class_pair()
    d = diagram_at([(9.1, 10.0)])
    fwd = bayes_factor(m1, m2, d)
    rev = bayes_factor(m2, m1, d)
    assert fwd.log_bf == -rev.log_bf
    assert fwd.log_bf > 0 and fwd.assignment == "left"
    assert rev.assignment == "left" and not fwd.undecidable
    assert isinstance(fwd, BayesFactorResult)


def test_bayes_factor_equal_masses_cancel_exactly():
    # both priors sit 9+ sigma inside the wedge: identical unit masses, so
    # the mass terms cancel and only the data terms remain
    m1, m2 = class_pair()
    assert m1.posterior.prior.total_mass() == m2.posterior.prior.total_mass() == 1.0
    d = diagram_at([(10.0, 10.0)])
    result = bayes_factor(m1, m2, d)
    assert result.log_bf == (result.log_density_1 - result.log_density_2)


def test_bayes_factor_identical_models_tie_goes_to_second():
    m1, _ = class_pair()
    m2 = ClassModel("other", m1.prior, m1.observation, m1.training)
    result = bayes_factor(m1, m2, diagram_at([(9.5, 10.0)]))
    assert result.log_bf == 0.0
    assert result.assignment == "other"


def test_bayes_factor_threshold():
    m1, m2 = class_pair()
    d = diagram_at([(9.4, 10.0)])
    base = bayes_factor(m1, m2, d)
    assert base.assignment == "left"
    strict = bayes_factor(m1, m2, d, threshold=math.exp(base.log_bf + 1))
    assert strict.assignment == "right"
    with pytest.raises(ValidationError, match="threshold"):
        bayes_factor(m1, m2, d, threshold=0.0)


def test_bayes_factor_undecidable():
    m1, m2 = class_pair()
    result = bayes_factor(m1, m2, diagram_at([(1000.0, 1000.0)]))
    assert math.isnan(result.log_bf)
    assert result.assignment is None and result.undecidable
    assert result.log_density_1 == -math.inf


def test_class_model_requires_training():
    with pytest.raises(ValidationError, match="training"):
        ClassModel("x", UNIT_MASS, ObservationModel(0.5, 0.5), ())


# -- k-means ---------------------------------------------------------------------

def cluster_points():
    return np.array([[0.0, 0.0]] * 5 + [[1.0, 2.0]] * 5 + [[3.0, 1.0]] * 5)


def test_kmeans_recovers_exact_clusters():
    centers = kmeans(cluster_points(), 3, 0)
    np.testing.assert_array_equal(centers, [[0.0, 0.0], [1.0, 2.0], [3.0, 1.0]])
    np.testing.assert_array_equal(kmeans(cluster_points(), 3, 123), centers)


def test_kmeans_k1_is_mean_and_lexsort_breaks_ties():
    pts = np.array([[0.0, 2.0], [0.0, 0.0], [4.0, 1.0], [4.0, 3.0]])
    np.testing.assert_allclose(kmeans(pts, 1, 0), [pts.mean(axis=0)], rtol=1e-15)
    centers = kmeans(np.array([[0.0, 2.0]] * 4 + [[0.0, 0.0]] * 4), 2, 0)
    np.testing.assert_array_equal(centers, [[0.0, 0.0], [0.0, 2.0]])


def test_kmeans_validation():
    with pytest.raises(ValidationError, match="k="):
        kmeans(cluster_points(), 4, 0)  # only 3 distinct locations
    with pytest.raises(ValidationError, match="k must be"):
        kmeans(cluster_points(), 0, 0)


def test_kmeans_prior_builds_mixture():
    training = [diagram_at([(0.0, 0.0), (1.0, 2.0)]),
                diagram_at([(3.0, 1.0)]),
                PersistenceDiagram.empty()]
    prior = kmeans_prior(training, 3, variance=2.0, weight=1.5)
    np.testing.assert_array_equal(prior.means, [[0, 0], [1, 2], [3, 1]])
    assert np.all(prior.variances == 2.0) and np.all(prior.weights == 1.5)
    with pytest.raises(ValidationError, match="no features"):
        kmeans_prior([PersistenceDiagram.empty()], 2, 1.0)


# -- ROC / AUC ---------------------------------------------------------------------

def test_roc_perfect_and_reversed():
    points, auc = roc_curve([3.0, 4.0], [1.0, 2.0])
    assert auc == 1.0
    assert points[0] == (0.0, 0.0) and points[-1] == (1.0, 1.0)
    _, auc_rev = roc_curve([1.0, 2.0], [3.0, 4.0])
    assert auc_rev == 0.0


def test_roc_all_tied_is_diagonal():
    points, auc = roc_curve([1.0, 1.0], [1.0, 1.0, 1.0])
    assert points == [(0.0, 0.0), (1.0, 1.0)]
    assert auc == 0.5


def test_roc_rank_invariance():
    rng = derived_rng(21)
    pos = np.round(rng.normal(0.5, 1.0, 30), 1)  # rounding forces ties
    neg = np.round(rng.normal(0.0, 1.0, 40), 1)
    _, auc = roc_curve(pos, neg)
    _, auc_exp = roc_curve(np.exp(pos), np.exp(neg))
    assert auc == pytest.approx(auc_exp, abs=1e-15)


def test_roc_matches_pairwise_probability():
    # AUC equals P(pos > neg) + 0.5 P(pos == neg) over all pairs
    for trial in range(20):
        rng = derived_rng(33, trial)
        pos = rng.integers(0, 6, rng.integers(1, 25)).astype(float)
        neg = rng.integers(0, 6, rng.integers(1, 25)).astype(float)
        _, auc = roc_curve(pos, neg)
        diff = pos[:, None] - neg[None, :]
        naive = (np.count_nonzero(diff > 0) + 0.5 * np.count_nonzero(diff == 0))
        assert auc == pytest.approx(naive / diff.size, abs=1e-12)


def test_roc_validation():
    with pytest.raises(ValidationError, match="at least one"):
        roc_curve([], [1.0])
    with pytest.raises(ValidationError, match="NaN"):
        roc_curve([1.0, math.nan], [0.0])


def test_bootstrap_degenerate_and_deterministic():
    assert bootstrap_auc([0.75, 0.75, 0.75], rng_seed=4) == (0.75, 0.75, 0.75)
    # exact even when float accumulation of the mean would wobble
    assert bootstrap_auc([0.941] * 5, rng_seed=4) == (0.941, 0.941, 0.941)
    a = bootstrap_auc([0.6, 0.7, 0.9, 1.0], rng_seed=11)
    assert a == bootstrap_auc([0.6, 0.7, 0.9, 1.0], rng_seed=11)
    assert a[0] <= a[1] <= a[2]
    with pytest.raises(ValidationError):
        bootstrap_auc([])
    with pytest.raises(ValidationError):
        bootstrap_auc([0.5], resamples=0)


# -- cross-validation -----------------------------------------------------------

def synthetic_classes(n=12, separated=True):
    mix1 = GaussianMixtureIntensity([MixtureComponent(4.0, (0.5, 1.5), 0.02)])
    mix2 = GaussianMixtureIntensity(
        [MixtureComponent(4.0, (1.5, 0.5), 0.02)]) if separated else mix1
    class1 = [sample_poisson_pp(mix1, derived_rng(50, 0, i)) for i in range(n)]
    class2 = [sample_poisson_pp(mix2, derived_rng(50, 1, i)) for i in range(n)]
    return class1, class2


def test_cross_validate_separates_classes():
    class1, class2 = synthetic_classes()
    config = CrossValidationConfig(
        observation=ObservationModel(1.0, 0.05),
        prior=PriorSpec("kmeans", k=1, variance=0.5), folds=3,
        labels=("ring", "blob"), rng_seed=2)
    report = cross_validate(class1, class2, config)
    assert report.auc > 0.9
    assert len(report.fold_aucs) == 3 and len(report.roc_points) == 3
    assert len(report.entries) == 24
    assert {e["true_label"] for e in report.entries} == {"ring", "blob"}
    assert report.n_undecidable == 0
    assert report.auc == pytest.approx(np.mean(report.fold_aucs), rel=1e-15)
    p5, mean, p95 = report.bootstrap_summary
    assert p5 <= mean <= p95


def test_cross_validate_is_deterministic():
    class1, class2 = synthetic_classes(n=8)
    config = CrossValidationConfig(
        observation=ObservationModel(1.0, 0.05),
        prior=PriorSpec("flat", mean=(1.0, 1.0), variance=5.0), folds=2)
    r1 = cross_validate(class1, class2, config)
    r2 = cross_validate(class1, class2, config)
    assert r1.to_dict() == r2.to_dict()


def test_cross_validate_identical_distributions_near_chance():
    class1, class2 = synthetic_classes(n=20, separated=False)
    config = CrossValidationConfig(
        observation=ObservationModel(1.0, 0.05),
        prior=PriorSpec("kmeans", k=1, variance=0.5), folds=5, rng_seed=6)
    report = cross_validate(class1, class2, config)
    assert 0.2 < report.auc < 0.8


def test_cross_validate_fold_validation():
    class1, class2 = synthetic_classes(n=3)
    config = CrossValidationConfig(observation=ObservationModel(1.0, 0.05),
                                   prior=PriorSpec("flat"), folds=4)
    with pytest.raises(ValidationError, match="folds"):
        cross_validate(class1, class2, config)
    with pytest.raises(ValidationError, match="folds"):
        CrossValidationConfig(observation=ObservationModel(1.0, 0.05),
                              prior=PriorSpec("flat"), folds=1)


def test_report_json_round_trip(tmp_path):
    class1, class2 = synthetic_classes(n=6)
    config = CrossValidationConfig(
        observation=ObservationModel(0.8, 0.05),
        prior=PriorSpec("kmeans", k=2, variance=1.0), folds=2)
    report = cross_validate(class1, class2, config)
    path = tmp_path / "report.json"
    report.write_json(path)
    data = json.loads(path.read_text())
    assert data == report.to_dict()
    assert set(data["bootstrap_summary"]) == {"p5", "mean", "p95"}
    assert data["prior"]["kind"] == "kmeans" and data["prior"]["k"] == 2
    flat = CrossValidationConfig(observation=ObservationModel(0.8, 0.05),
                                 prior=PriorSpec("flat"), folds=2)
    assert cross_validate(class1, class2, flat).to_dict()["prior"]["mean"] == [1.0, 1.0]
