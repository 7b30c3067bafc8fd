"""Named experiment presets and the experiment runner.

Two experiment kinds exist:

* ``circle-posterior``: sample a noisy circle, take its H1 rips diagram as
  the observed diagram, compute the closed-form posterior under a named
  prior/observation pair, and write the observed diagram, the peak-scaled
  posterior grid, and a manifest with masses and the posterior argmax.
* ``lattice-cv``: build synthetic BCC and FCC diagram populations and run
  the 10-fold Bayes-factor cross-validation under both a k-means-elicited
  prior and a flat prior, writing both reports and a manifest.

Presets combine four named priors with four observation "cases" plus the
``aptlike-cv`` classification study. Reruns with the same seed write
byte-identical files.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._util import atomic_write_text, derived_rng
from .classify import CrossValidationConfig, PriorSpec, cross_validate
from .diagrams import write_diagram_csv
from .errors import UsageError, ValidationError
from .intensity import GaussianMixtureIntensity, MixtureComponent
from .posterior import (Grid, ObservationModel, posterior_closed_form,
                        scaled_intensity_grid, write_grid_csv)
from .rips import FiltrationParams, rips_persistence, write_point_cloud_csv
from .simulate import LatticeSpec, sample_lattice, sample_noisy_circle

DEFAULT_GRID = Grid(0.0, 3.0, 0.0, 3.0, 200, 200)

#: Named priors over tilted coordinates (weight, mean, variance).
PRIOR_PRESETS: dict[str, tuple[tuple[float, tuple[float, float], float], ...]] = {
    "informative": ((1.0, (0.5, 1.2), 0.01),),
    "weakly-informative": ((1.0, (0.5, 1.2), 0.2),),
    "unimodal-uninformative": ((1.0, (1.0, 1.0), 1.0),),
    "bimodal-uninformative": ((1.0, (0.5, 0.5), 0.2), (2.0, (1.5, 1.5), 0.2)),
}

#: Observation cases: (likelihood_variance, clutter_variance, alpha,
#: circle noise variance). The clutter is always one component of weight 1
#: at (0.5, 0) with the stated variance.
CASE_PRESETS: dict[str, tuple[float, float, float, float]] = {
    "case1": (0.01, 0.1, 1.0, 0.001),
    "case2": (0.1, 0.1, 1.0, 0.01),
    "case3": (0.01, 0.1, 1.0, 0.1),
    "case4": (0.1, 0.1, 0.5, 0.001),
}


def prior_preset(name: str) -> GaussianMixtureIntensity:
    try:
        spec = PRIOR_PRESETS[name]
    except KeyError:
        raise UsageError(
            f"unknown prior preset {name!r}; available: "
            f"{', '.join(sorted(PRIOR_PRESETS))}") from None
    return GaussianMixtureIntensity(
        [MixtureComponent(w, m, v) for w, m, v in spec])


def case_observation_model(name: str) -> tuple[ObservationModel, float]:
    """The observation model and circle noise variance of a named case."""
    try:
        lv, clutter_var, alpha, noise_var = CASE_PRESETS[name]
    except KeyError:
        raise UsageError(
            f"unknown case preset {name!r}; available: "
            f"{', '.join(sorted(CASE_PRESETS))}") from None
    clutter = GaussianMixtureIntensity(
        [MixtureComponent(1.0, (0.5, 0.0), clutter_var)])
    return ObservationModel(alpha, lv, clutter), noise_var


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to run one experiment deterministically."""

    name: str
    kind: str  # "circle-posterior" | "lattice-cv"
    seed: int = 7
    # circle-posterior section
    prior: GaussianMixtureIntensity | None = None
    observation: ObservationModel | None = None
    circle_n: int = 50
    circle_noise_variance: float = 0.001
    grid: Grid = DEFAULT_GRID
    # lattice-cv section
    n_per_class: int = 200
    lattice_cells: int = 2
    lattice_constant: float = 2.0
    lattice_retention: float = 0.35
    folds: int = 10

    def __post_init__(self):
        if self.kind not in ("circle-posterior", "lattice-cv"):
            raise ValidationError(
                f"experiment kind must be 'circle-posterior' or 'lattice-cv', "
                f"got {self.kind!r}")
        if self.kind == "circle-posterior":
            if self.prior is None or self.observation is None:
                raise ValidationError(
                    "circle-posterior experiments need a prior and an "
                    "observation model")
            if self.circle_n < 4:
                raise ValidationError("circle_n must be >= 4")
            if self.circle_noise_variance < 0:
                raise ValidationError("circle_noise_variance must be >= 0")
        else:
            if self.n_per_class < self.folds:
                raise ValidationError("n_per_class must be >= folds")

    def to_dict(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "seed": self.seed}
        if self.kind == "circle-posterior":
            out.update({
                "prior": self.prior.to_list(),
                "observation": self.observation.to_dict(),
                "data": {"n": self.circle_n,
                         "noise_variance": self.circle_noise_variance},
                "grid": [self.grid.x0, self.grid.x1, self.grid.y0,
                         self.grid.y1, self.grid.nx, self.grid.ny],
            })
        else:
            out.update({
                "observation": self.observation.to_dict()
                if self.observation else None,
                "n_per_class": self.n_per_class,
                "lattice": {"cells": self.lattice_cells,
                            "lattice_constant": self.lattice_constant,
                            "retention": self.lattice_retention},
                "folds": self.folds,
            })
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ValidationError("experiment config must be a JSON object")
        kind = data.get("kind")
        name = data.get("name", "custom")
        seed = int(data.get("seed", 7))
        if kind == "circle-posterior":
            required = {"kind", "prior", "observation", "data"}
            unknown = set(data) - required - {"name", "seed", "grid"}
            if unknown or not required <= set(data):
                raise ValidationError(
                    f"circle-posterior config needs keys {sorted(required)} "
                    f"(optional: name, seed, grid); got {sorted(data)}")
            grid_spec = data.get("grid", [0.0, 3.0, 0.0, 3.0, 200, 200])
            if len(grid_spec) != 6:
                raise ValidationError("grid must be [x0, x1, y0, y1, nx, ny]")
            return cls(
                name=name, kind=kind, seed=seed,
                prior=GaussianMixtureIntensity.from_list(data["prior"]),
                observation=ObservationModel.from_dict(data["observation"]),
                circle_n=int(data["data"].get("n", 50)),
                circle_noise_variance=float(data["data"].get("noise_variance", 0.001)),
                grid=Grid(*[float(v) for v in grid_spec[:4]],
                          int(grid_spec[4]), int(grid_spec[5])))
        if kind == "lattice-cv":
            lattice = data.get("lattice", {})
            observation = data.get("observation")
            return cls(
                name=name, kind=kind, seed=seed,
                observation=ObservationModel.from_dict(observation)
                if observation else None,
                n_per_class=int(data.get("n_per_class", 200)),
                lattice_cells=int(lattice.get("cells", 2)),
                lattice_constant=float(lattice.get("lattice_constant", 2.0)),
                lattice_retention=float(lattice.get("retention", 0.35)),
                folds=int(data.get("folds", 10)))
        raise ValidationError(
            f"experiment kind must be 'circle-posterior' or 'lattice-cv', "
            f"got {kind!r}")


def aptlike_observation_model() -> ObservationModel:
    """Observation model of the lattice study: alpha 1, mark variance 0.1,
    clutter 5 N*((0,0), 0.2 I)."""
    clutter = GaussianMixtureIntensity([MixtureComponent(5.0, (0.0, 0.0), 0.2)])
    return ObservationModel(1.0, 0.1, clutter)


def experiment_presets() -> dict[str, ExperimentConfig]:
    presets: dict[str, ExperimentConfig] = {}
    for case in sorted(CASE_PRESETS):
        model, noise_var = case_observation_model(case)
        for prior_name in sorted(PRIOR_PRESETS):
            name = f"{case}-{prior_name}"
            presets[name] = ExperimentConfig(
                name=name, kind="circle-posterior",
                prior=prior_preset(prior_name), observation=model,
                circle_noise_variance=noise_var)
    presets["aptlike-cv"] = ExperimentConfig(
        name="aptlike-cv", kind="lattice-cv",
        observation=aptlike_observation_model())
    return presets


def experiment_preset(name: str) -> ExperimentConfig:
    presets = experiment_presets()
    if name not in presets:
        raise UsageError(
            f"unknown experiment preset {name!r}; available: "
            f"{', '.join(sorted(presets))}")
    return presets[name]


# -- runner -------------------------------------------------------------------

def h1_diagram(cloud, simplex_budget: int | None = None):
    """H1 rips diagram of a cloud, filtered at its diameter so every loop
    closes before truncation."""
    params = FiltrationParams(max_homology_dim=1, max_radius=cloud.diameter())
    if simplex_budget is not None:
        params = replace(params, simplex_budget=simplex_budget)
    with warnings.catch_warnings():
        # the lone essential H0 component is structural at this radius
        warnings.filterwarnings("ignore", message=".*essential class.*")
        return rips_persistence(cloud, params).restrict(1)


def _run_circle_posterior(config: ExperimentConfig, outdir: Path) -> dict:
    cloud = sample_noisy_circle(config.circle_n, config.circle_noise_variance,
                                derived_rng(config.seed, 0))
    observed = h1_diagram(cloud)
    posterior = posterior_closed_form(config.prior, config.observation,
                                      [observed])
    values = scaled_intensity_grid(posterior, config.grid)

    flat_index = int(np.argmax(values))
    iy, ix = divmod(flat_index, config.grid.nx)
    argmax = {"x": float(config.grid.x_axis[ix]),
              "y": float(config.grid.y_axis[iy]),
              "scaled_value": float(values[iy, ix])}

    if len(observed):
        top = int(np.argmax(observed.persistences))
        most_persistent = {"birth": float(observed.births[top]),
                           "persistence": float(observed.persistences[top])}
    else:
        most_persistent = None

    write_point_cloud_csv(cloud, outdir / "point_cloud.csv")
    write_diagram_csv(observed, outdir / "observed_diagram.csv")
    write_grid_csv(outdir / "posterior_grid.csv", config.grid, values)

    manifest = {
        "config": config.to_dict(),
        "outputs": {
            "point_cloud": "point_cloud.csv",
            "observed_diagram": "observed_diagram.csv",
            "posterior_grid": "posterior_grid.csv",
        },
        "n_observed_features": len(observed),
        "most_persistent_feature": most_persistent,
        "posterior_argmax": argmax,
        "masses": {
            "prior": config.prior.total_mass(),
            "prior_retention": posterior.prior_retention_mass(),
            "data_term": posterior.data_term_mass(),
            "total": posterior.total_mass(),
        },
    }
    return manifest


def _run_lattice_cv(config: ExperimentConfig, outdir: Path) -> dict:
    observation = config.observation or aptlike_observation_model()
    diagrams_dir = outdir / "diagrams"
    diagrams_dir.mkdir(parents=True, exist_ok=True)

    populations: dict[str, list] = {}
    for class_index, structure in enumerate(("bcc", "fcc")):
        spec = LatticeSpec(structure=structure, cells=config.lattice_cells,
                           lattice_constant=config.lattice_constant,
                           retention=config.lattice_retention)
        diagrams = []
        for i in range(config.n_per_class):
            cloud = sample_lattice(spec, derived_rng(config.seed, class_index, i))
            diagram = h1_diagram(cloud)
            write_diagram_csv(diagram,
                              diagrams_dir / f"{structure}_{i:03d}.csv")
            diagrams.append(diagram)
        populations[structure] = diagrams

    reports = {}
    for prior_name, prior_spec in (
            ("kmeans", PriorSpec(kind="kmeans", k=3, variance=2.0, weight=1.0)),
            ("flat", PriorSpec(kind="flat", mean=(1.0, 1.0), variance=20.0,
                               weight=1.0))):
        cv_config = CrossValidationConfig(
            observation=observation, prior=prior_spec, folds=config.folds,
            rng_seed=config.seed, labels=("bcc", "fcc"))
        report = cross_validate(populations["bcc"], populations["fcc"],
                                cv_config)
        report.write_json(outdir / f"cv_{prior_name}.json")
        reports[prior_name] = report

    manifest = {
        "config": config.to_dict(),
        "outputs": {
            "diagrams_dir": "diagrams",
            "cv_reports": {name: f"cv_{name}.json" for name in reports},
        },
        "results": {
            name: {
                "mean_auc": rep.auc,
                "fold_aucs": list(rep.fold_aucs),
                "bootstrap": {"p5": rep.bootstrap_summary[0],
                              "mean": rep.bootstrap_summary[1],
                              "p95": rep.bootstrap_summary[2]},
            } for name, rep in reports.items()
        },
    }
    return manifest


def run_experiment(config: ExperimentConfig, outdir,
                   seed: int | None = None) -> dict:
    """Run one experiment into ``outdir`` and return the manifest (also
    written as manifest.json). All randomness derives from the config seed,
    so reruns are byte-identical."""
    if seed is not None:
        config = replace(config, seed=int(seed))
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if config.kind == "circle-posterior":
        manifest = _run_circle_posterior(config, outdir)
    else:
        manifest = _run_lattice_cv(config, outdir)
    atomic_write_text(outdir / "manifest.json",
                      json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
