import json

import pytest

from bayespd import (GaussianMixtureIntensity, MixtureComponent, PriorSpec,
                     UsageError, sample_poisson_pp, write_diagram,
                     write_mixture_json, write_point_cloud_csv)
from bayespd._util import derived_rng
from bayespd.cli import main, parse_grid, parse_prior_mode
from bayespd.rips import PointCloud


@pytest.fixture
def model_json(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps({
        "alpha": 1.0,
        "likelihood_variance": 0.05,
        "clutter": [{"weight": 1.0, "mean": [0.5, 0.0], "variance": 0.1}],
    }))
    return str(path)


@pytest.fixture
def square_csv(tmp_path):
    path = tmp_path / "square.csv"
    write_point_cloud_csv(PointCloud([[0.0, 0.0], [1.0, 0.0],
                                      [1.0, 1.0], [0.0, 1.0]]), path)
    return str(path)


# -- argument helpers -----------------------------------------------------------

def test_parse_grid():
    grid = parse_grid("0,3,0,2,100,50")
    assert (grid.x0, grid.x1, grid.y0, grid.y1) == (0.0, 3.0, 0.0, 2.0)
    assert (grid.nx, grid.ny) == (100, 50)
    with pytest.raises(UsageError, match="x0,x1"):
        parse_grid("0,3,0,2,100")
    with pytest.raises(UsageError, match="reals"):
        parse_grid("0,3,0,2,many,50")
    with pytest.raises(UsageError, match="grid"):
        parse_grid("3,0,0,2,100,50")


def test_parse_prior_mode_kmeans():
    spec = parse_prior_mode("kmeans:k=5,var=0.5,weight=2")
    assert spec == PriorSpec(kind="kmeans", k=5, variance=0.5, weight=2.0)
    assert parse_prior_mode("kmeans") == PriorSpec(kind="kmeans")
    with pytest.raises(UsageError, match="unknown kmeans"):
        parse_prior_mode("kmeans:mean=1,1")
    with pytest.raises(UsageError, match="non-numeric"):
        parse_prior_mode("kmeans:k=lots")


def test_parse_prior_mode_flat():
    # tuple-valued mean keeps its comma
    spec = parse_prior_mode("flat:mean=1.5,0.5,var=20")
    assert spec == PriorSpec(kind="flat", mean=(1.5, 0.5), variance=20.0)
    assert parse_prior_mode("flat").mean == (1.0, 1.0)
    with pytest.raises(UsageError, match="kmeans"):
        parse_prior_mode("spread:var=1")
    with pytest.raises(UsageError, match="two coordinates"):
        parse_prior_mode("flat:mean=1,2,3,var=1")
    with pytest.raises(UsageError, match="bad parameter"):
        parse_prior_mode("flat:20")


# -- top-level dispatch ----------------------------------------------------------

def test_version_help_and_usage_errors(capsys):
    assert main(["--version"]) == 0
    assert "bayespd" in capsys.readouterr().out
    assert main(["--help"]) == 0
    assert "SUBCOMMAND" in capsys.readouterr().out
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    err = capsys.readouterr().err
    assert "error:" in err


# -- compute-pd -------------------------------------------------------------------

def test_compute_pd(square_csv, tmp_path, capsys):
    out = str(tmp_path / "diagram.csv")
    with pytest.warns(UserWarning, match="essential"):
        assert main(["compute-pd", "--input", square_csv,
                     "--output", out]) == 0
    assert "H1: 1" in capsys.readouterr().out
    text = (tmp_path / "diagram.csv").read_text()
    assert "1.4142135623730951" in text  # the square's H1 death

    assert main(["compute-pd", "--input", str(tmp_path / "nope.csv"),
                 "--output", out]) == 2
    assert main(["compute-pd", "--input", square_csv, "--output", out,
                 "--budget", "3"]) == 3
    assert "error:" in capsys.readouterr().err


# -- posterior --------------------------------------------------------------------

def test_posterior_command(square_csv, model_json, tmp_path, capsys):
    obs = str(tmp_path / "obs.csv")
    with pytest.warns(UserWarning, match="essential"):
        main(["compute-pd", "--input", square_csv, "--output", obs])
    out = str(tmp_path / "grid.csv")
    summary = str(tmp_path / "summary.json")
    assert main(["posterior", "--prior", "informative", "--model", model_json,
                 "--obs", obs, "--grid", "0,2,0,2,40,30", "--out", out,
                 "--scaled", "--summary", summary]) == 0
    assert "30x40 grid" in capsys.readouterr().out
    data = json.loads((tmp_path / "summary.json").read_text())
    assert data["n_observations"] == 1 and data["scaled"] is True
    assert data["argmax"]["value"] == 1.0
    assert set(data["masses"]) == {"prior", "prior_retention", "data_term",
                                   "total"}
    header = (tmp_path / "grid.csv").read_text().splitlines()[0]
    assert header.startswith("y\\x,0.0,")


def test_posterior_prior_resolution(square_csv, model_json, tmp_path, capsys):
    obs = str(tmp_path / "obs.csv")
    with pytest.warns(UserWarning, match="essential"):
        main(["compute-pd", "--input", square_csv, "--output", obs])
    out = str(tmp_path / "grid.csv")

    prior_path = tmp_path / "prior.json"
    write_mixture_json(GaussianMixtureIntensity(
        [MixtureComponent(1.0, (1.0, 1.0), 0.5)]), prior_path)
    assert main(["posterior", "--prior", str(prior_path), "--model",
                 model_json, "--obs", obs, "--out", out]) == 0

    assert main(["posterior", "--prior", "mystery", "--model", model_json,
                 "--obs", obs, "--out", out]) == 1
    assert "presets" in capsys.readouterr().err

    bad = tmp_path / "bad.json"
    bad.write_text("{not json\n  at line 1")
    assert main(["posterior", "--prior", "informative", "--model", str(bad),
                 "--obs", obs, "--out", out]) == 2
    assert "line 1 column 2" in capsys.readouterr().err

    assert main(["posterior", "--prior", "informative", "--model", model_json,
                 "--obs", str(tmp_path / "ghost.csv"), "--out", out]) == 2


# -- simulate ---------------------------------------------------------------------

def test_simulate_circle_and_lattice(tmp_path, capsys):
    circle = tmp_path / "circle.csv"
    assert main(["simulate", "circle", "--n", "30", "--noise-var", "0.001",
                 "--seed", "3", "--out", str(circle)]) == 0
    first = circle.read_bytes()
    assert main(["simulate", "circle", "--n", "30", "--noise-var", "0.001",
                 "--seed", "3", "--out", str(circle)]) == 0
    assert circle.read_bytes() == first
    assert len(first.decode().splitlines()) == 30

    lattice = tmp_path / "bcc.csv"
    assert main(["simulate", "lattice", "--type", "bcc", "--cells", "1",
                 "--retention", "1.0", "--noise", "0.0", "--seed", "1",
                 "--out", str(lattice)]) == 0
    assert len(lattice.read_text().splitlines()) == 9  # all BCC sites kept

    assert main(["simulate", "lattice", "--type", "hex",
                 "--out", str(lattice)]) == 1
    capsys.readouterr()


def test_simulate_diagram(model_json, tmp_path, capsys):
    out = tmp_path / "observed.csv"
    latent = tmp_path / "latent.csv"
    assert main(["simulate", "diagram", "--prior", "unimodal-uninformative",
                 "--model", model_json, "--seed", "5", "--out", str(out),
                 "--latent-out", str(latent)]) == 0
    assert "observed diagram" in capsys.readouterr().out
    assert out.exists() and latent.exists()


# -- classify ----------------------------------------------------------------------

def diagram_population(directory, mean, tag, n):
    directory.mkdir(parents=True)
    mixture = GaussianMixtureIntensity([MixtureComponent(4.0, mean, 0.02)])
    for i in range(n):
        d = sample_poisson_pp(mixture, derived_rng(60, tag, i))
        write_diagram(d, directory / f"sample_{i:02d}.csv")


def test_classify_command(tmp_path, capsys):
    diagram_population(tmp_path / "rings", (0.5, 1.5), 0, 6)
    diagram_population(tmp_path / "blobs", (1.5, 0.5), 1, 6)
    report_path = tmp_path / "report.json"
    assert main(["classify", "--class1-dir", str(tmp_path / "rings"),
                 "--class2-dir", str(tmp_path / "blobs"), "--folds", "2",
                 "--prior-mode", "flat:mean=1,1,var=5", "--sigma-yo", "0.05",
                 "--report", str(report_path)]) == 0
    assert "mean AUC" in capsys.readouterr().out
    report = json.loads(report_path.read_text())
    assert report["labels"] == ["rings", "blobs"]
    assert report["folds"] == 2

    assert main(["classify", "--class1-dir", str(tmp_path / "missing"),
                 "--class2-dir", str(tmp_path / "blobs"),
                 "--report", str(report_path)]) == 2
    assert "not a directory" in capsys.readouterr().err


# -- experiment ---------------------------------------------------------------------

def test_experiment_list_and_usage(tmp_path, capsys):
    assert main(["experiment", "--list"]) == 0
    names = capsys.readouterr().out.split()
    assert len(names) == 17 and "case1-informative" in names

    assert main(["experiment", "--outdir", str(tmp_path)]) == 1
    assert main(["experiment", "--preset", "case1-informative", "--config",
                 "x.json", "--outdir", str(tmp_path)]) == 1
    assert main(["experiment", "--preset", "case1-informative"]) == 1
    assert main(["experiment", "--preset", "case99", "--outdir",
                 str(tmp_path)]) == 1
    capsys.readouterr()


def experiment_config_json(tmp_path):
    config = {
        "kind": "circle-posterior",
        "seed": 11,
        "prior": [{"weight": 1.0, "mean": [0.5, 1.2], "variance": 0.01}],
        "observation": {"alpha": 1.0, "likelihood_variance": 0.01,
                        "clutter": [{"weight": 1.0, "mean": [0.5, 0.0],
                                     "variance": 0.1}]},
        "data": {"n": 30, "noise_variance": 0.001},
        "grid": [0, 3, 0, 3, 50, 50],
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return str(path)


def test_experiment_from_config_rerun_identical(tmp_path, capsys):
    config = experiment_config_json(tmp_path)
    assert main(["experiment", "--config", config, "--outdir",
                 str(tmp_path / "a")]) == 0
    assert "posterior argmax" in capsys.readouterr().out
    assert main(["experiment", "--config", config, "--outdir",
                 str(tmp_path / "b")]) == 0
    capsys.readouterr()
    for name in ("manifest.json", "point_cloud.csv", "observed_diagram.csv",
                 "posterior_grid.csv"):
        assert ((tmp_path / "a" / name).read_bytes()
                == (tmp_path / "b" / name).read_bytes()), name
    # seed override changes outputs
    assert main(["experiment", "--config", config, "--outdir",
                 str(tmp_path / "c"), "--seed", "12"]) == 0
    capsys.readouterr()
    assert ((tmp_path / "c" / "point_cloud.csv").read_bytes()
            != (tmp_path / "a" / "point_cloud.csv").read_bytes())


# -- config-validate ---------------------------------------------------------------

def test_config_validate(tmp_path, capsys):
    mixture_path = tmp_path / "mixture.json"
    write_mixture_json(GaussianMixtureIntensity(
        [MixtureComponent(1.0, (1.0, 1.0), 0.5)]), mixture_path)
    model_path = tmp_path / "model.json"
    model_path.write_text(json.dumps(
        {"alpha": 0.5, "likelihood_variance": 0.1, "clutter": []}))
    config_path = experiment_config_json(tmp_path)
    diagram_path = tmp_path / "diagram.json"
    d = sample_poisson_pp(GaussianMixtureIntensity(
        [MixtureComponent(3.0, (1.0, 1.0), 0.1)]), 4)
    write_diagram(d, diagram_path)

    assert main(["config-validate", str(mixture_path), str(model_path),
                 config_path, str(diagram_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("OK:") == 4
    assert "mixture (1 components)" in out
    assert "observation model" in out
    assert "experiment config (circle-posterior)" in out
    assert "persistence diagram" in out

    assert main(["config-validate", "--all-presets"]) == 0
    assert capsys.readouterr().out.count("OK: preset") == 17

    assert main(["config-validate"]) == 1

    bad = tmp_path / "bad.json"
    bad.write_text('{"alpha": 0.5,}')
    assert main(["config-validate", str(bad)]) == 2
    assert "column" in capsys.readouterr().err

    weird = tmp_path / "weird.json"
    weird.write_text('{"hello": 1}')
    assert main(["config-validate", str(weird)]) == 2
    assert "unrecognized" in capsys.readouterr().err
