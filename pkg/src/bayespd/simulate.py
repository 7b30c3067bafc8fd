"""Samplers: Poisson diagram processes, observation corruption, point clouds.

Every sampler accepts either an integer seed or a ``numpy.random.Generator``
(PCG64 via ``default_rng``). With an integer seed results are identical on
every platform; pass a Generator to continue an existing stream. Subtask
streams should be derived with ``bayespd._util.derived_rng(seed, index)``
so task order cannot perturb draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import as_generator
from .diagrams import PersistenceDiagram
from .errors import SamplingError, ValidationError
from .intensity import GaussianMixtureIntensity, wedge_gaussian_mass
from .posterior import ObservationModel
from .rips import PointCloud

#: Rejection sampling gives up after this many total proposals.
MAX_PROPOSALS = 10_000_000

#: Components whose wedge acceptance rate is below this are refused upfront.
MIN_ACCEPTANCE = 1e-6


@dataclass(frozen=True)
class GenerativeModel:
    """Latent prior plus the corruption applied to each latent diagram."""

    latent_prior: GaussianMixtureIntensity
    observation: ObservationModel


@dataclass(frozen=True)
class LatticeSpec:
    """Synthetic crystal-lattice cloud parameters.

    ``noise_sd`` defaults to 5% of the lattice constant; ``retention`` is
    the probability each site survives (mimicking heavy detector loss).
    """

    structure: str
    cells: int = 2
    lattice_constant: float = 2.0
    retention: float = 0.35
    noise_sd: float | None = None

    def __post_init__(self):
        if self.structure not in ("bcc", "fcc"):
            raise ValidationError(
                f"structure must be 'bcc' or 'fcc', got {self.structure!r}")
        if self.cells < 1:
            raise ValidationError("cells must be >= 1")
        if not self.lattice_constant > 0:
            raise ValidationError("lattice_constant must be > 0")
        if not 0.0 < self.retention <= 1.0:
            raise ValidationError("retention must be in (0, 1]")
        if self.noise_sd is None:
            object.__setattr__(self, "noise_sd", 0.05 * self.lattice_constant)
        elif self.noise_sd < 0:
            raise ValidationError("noise_sd must be >= 0")


def _sample_wedge_gaussian(rng: np.random.Generator, mean, variance,
                           count: int) -> np.ndarray:
    """Draw ``count`` points from N(mean, variance I) conditioned on the
    closed first quadrant, by batched rejection."""
    if count == 0:
        return np.zeros((0, 2))
    acceptance = wedge_gaussian_mass(np.asarray(mean, dtype=np.float64),
                                     float(variance))
    if acceptance < MIN_ACCEPTANCE:
        raise SamplingError(
            f"wedge acceptance rate {acceptance:.3g} for component at "
            f"{tuple(np.asarray(mean))} is below {MIN_ACCEPTANCE}; move the "
            "mean into the wedge or shrink the variance")
    sd = math.sqrt(variance)
    out = np.empty((count, 2))
    filled = 0
    proposals = 0
    while filled < count:
        batch = max(64, int(1.2 * (count - filled) / max(acceptance, 1e-6)))
        batch = min(batch, MAX_PROPOSALS - proposals)
        if batch <= 0:
            raise SamplingError(
                f"rejection sampling exhausted {MAX_PROPOSALS} proposals")
        draw = rng.normal(np.asarray(mean, dtype=np.float64), sd, (batch, 2))
        proposals += batch
        good = draw[(draw[:, 0] >= 0.0) & (draw[:, 1] >= 0.0)]
        take = min(len(good), count - filled)
        out[filled:filled + take] = good[:take]
        filled += take
    return out


def _sample_marks(rng: np.random.Generator, centers: np.ndarray,
                  variance: float) -> np.ndarray:
    """One wedge-truncated Gaussian mark per center, batched rejection.

    Centers lie in the wedge (diagram invariant), so per-point acceptance is
    at least 0.25 and the proposal cap is effectively unreachable.
    """
    if len(centers) == 0:
        return np.zeros((0, 2))
    sd = math.sqrt(variance)
    out = np.empty_like(centers)
    pending = np.arange(len(centers))
    proposals = 0
    while len(pending):
        if proposals >= MAX_PROPOSALS:
            raise SamplingError(
                f"mark sampling exhausted {MAX_PROPOSALS} proposals")
        draw = rng.normal(centers[pending], sd)
        proposals += len(pending)
        ok = (draw[:, 0] >= 0.0) & (draw[:, 1] >= 0.0)
        out[pending[ok]] = draw[ok]
        pending = pending[~ok]
    return out


def sample_poisson_pp(intensity: GaussianMixtureIntensity, rng_seed, *,
                      homology_dim: int = 1) -> PersistenceDiagram:
    """Sample a diagram from the Poisson process with the given intensity.

    The count is Poisson(total mass); each point picks a component with
    probability proportional to its wedge mass and is then drawn from that
    component's wedge-truncated Gaussian.
    """
    rng = as_generator(rng_seed)
    masses = intensity.component_masses()
    total = math.fsum(masses)
    if total == 0.0:
        return PersistenceDiagram.empty()
    n = int(rng.poisson(total))
    if n == 0:
        return PersistenceDiagram.empty()
    which = rng.choice(len(masses), size=n, p=masses / total)
    counts = np.bincount(which, minlength=len(masses))
    pieces = []
    for i, c in enumerate(counts):
        if c:
            pieces.append(_sample_wedge_gaussian(
                rng, intensity.means[i], intensity.variances[i], int(c)))
    pts = np.concatenate(pieces)
    return PersistenceDiagram.from_tilted(
        pts[:, 0], pts[:, 1], np.full(n, homology_dim, dtype=np.int64))


def sample_observation(model, latent: PersistenceDiagram, rng_seed, *,
                       homology_dim: int | None = None) -> PersistenceDiagram:
    """Corrupt a latent diagram: alpha-thinning, Gaussian marks, clutter.

    ``model`` may be a GenerativeModel or a bare ObservationModel. Each
    retained latent point emits one mark from the wedge-truncated Gaussian
    centered at it; an independent clutter diagram is superposed.
    """
    if isinstance(model, GenerativeModel):
        model = model.observation
    if not isinstance(model, ObservationModel):
        raise ValidationError(
            f"expected ObservationModel or GenerativeModel, got {type(model).__name__}")
    rng = as_generator(rng_seed)

    if homology_dim is None:
        homology_dim = int(latent.dims[0]) if len(latent) else 1

    kept_mask = rng.random(len(latent)) < model.alpha
    kept = latent.tilted_points[kept_mask]
    marks = _sample_marks(rng, kept, model.likelihood_variance)
    clutter = sample_poisson_pp(model.clutter, rng, homology_dim=homology_dim)

    pts = np.concatenate([marks, clutter.tilted_points])
    return PersistenceDiagram.from_tilted(
        pts[:, 0], pts[:, 1], np.full(len(pts), homology_dim, dtype=np.int64))


def sample_noisy_circle(n: int = 50, noise_variance: float = 0.01,
                        rng_seed=0) -> PointCloud:
    """``n`` points at uniform angles on the unit circle plus isotropic
    Gaussian noise of the given variance per coordinate."""
    if n < 1:
        raise ValidationError("n must be >= 1")
    if noise_variance < 0:
        raise ValidationError("noise_variance must be >= 0")
    rng = as_generator(rng_seed)
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    pts = pts + rng.normal(0.0, math.sqrt(noise_variance), (n, 2))
    return PointCloud(pts)


def lattice_sites(structure: str, cells: int,
                  lattice_constant: float = 1.0) -> np.ndarray:
    """Deduplicated site coordinates of a cells^3 supercell.

    BCC: cube corners plus body centers, (n+1)^3 + n^3 sites.
    FCC: cube corners plus face centers, (n+1)^3 + 3 n^2 (n+1) sites.
    Sites are built on a half-integer grid (exact dedup) then scaled.
    """
    n = int(cells)
    corners = [(2 * i, 2 * j, 2 * k)
               for i in range(n + 1) for j in range(n + 1) for k in range(n + 1)]
    if structure == "bcc":
        extra = [(2 * i + 1, 2 * j + 1, 2 * k + 1)
                 for i in range(n) for j in range(n) for k in range(n)]
    elif structure == "fcc":
        extra = []
        extra += [(2 * i + 1, 2 * j + 1, 2 * k)
                  for i in range(n) for j in range(n) for k in range(n + 1)]
        extra += [(2 * i + 1, 2 * j, 2 * k + 1)
                  for i in range(n) for j in range(n + 1) for k in range(n)]
        extra += [(2 * i, 2 * j + 1, 2 * k + 1)
                  for i in range(n + 1) for j in range(n) for k in range(n)]
    else:
        raise ValidationError(f"structure must be 'bcc' or 'fcc', got {structure!r}")
    doubled = np.unique(np.asarray(corners + extra, dtype=np.int64), axis=0)
    return doubled * (0.5 * lattice_constant)


def sample_lattice(spec: LatticeSpec, rng_seed) -> PointCloud:
    """Thin and jitter a perfect lattice into a synthetic measured cloud."""
    rng = as_generator(rng_seed)
    sites = lattice_sites(spec.structure, spec.cells, spec.lattice_constant)
    keep = rng.random(len(sites)) < spec.retention
    kept = sites[keep]
    if len(kept) == 0:
        raise SamplingError(
            f"lattice thinning retained no sites (retention={spec.retention}, "
            f"{len(sites)} sites); raise retention or cells")
    noisy = kept + rng.normal(0.0, spec.noise_sd, kept.shape)
    return PointCloud(noisy)
