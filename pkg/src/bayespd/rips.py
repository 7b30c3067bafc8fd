"""Vietoris-Rips persistent homology from point clouds.

A simplex enters the filtration at its diameter (closed convention: a
simplex with diameter exactly equal to the threshold is included). Homology
is computed over Z/2 by the standard boundary-matrix column reduction with
clearing, processing dimensions from high to low. Columns are stored as
Python integers used as bitsets; the pivot of a column is its highest set
bit, and column addition is XOR.

Zero-persistence pairs are discarded. Classes still alive at ``max_radius``
(essential classes in the truncated filtration) are dropped and counted on
the returned diagram.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ._util import atomic_write_text
from .diagrams import MAX_HOMOLOGY_DIM, PersistenceDiagram
from .errors import SimplexBudgetError, ValidationError

DEFAULT_SIMPLEX_BUDGET = 2_000_000


@dataclass(frozen=True)
class PointCloud:
    """Finite point set in R^d, stored as an (n, d) float64 array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise ValidationError(
                f"points must form an (n, d) array with d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("point coordinates must be finite")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def diameter(self) -> float:
        if self.n_points < 2:
            return 0.0
        return float(np.max(pdist(self.points)))


@dataclass(frozen=True)
class FiltrationParams:
    """Rips parameters: top homology dimension, radius cutoff, budget."""

    max_homology_dim: int = 1
    max_radius: float = np.inf
    simplex_budget: int = DEFAULT_SIMPLEX_BUDGET

    def __post_init__(self):
        if not 0 <= self.max_homology_dim <= MAX_HOMOLOGY_DIM:
            raise ValidationError(
                f"max_homology_dim must be in 0..{MAX_HOMOLOGY_DIM}")
        if not self.max_radius > 0:
            raise ValidationError("max_radius must be > 0")
        if self.simplex_budget < 1:
            raise ValidationError("simplex_budget must be >= 1")


def rips_persistence(cloud: PointCloud,
                     params: FiltrationParams = FiltrationParams()) -> PersistenceDiagram:
    """Persistence diagram of the Rips filtration of ``cloud``.

    Simplices up to dimension ``max_homology_dim + 1`` are built (only those
    with diameter <= max_radius). H0 features are born at 0; the essential
    class per connected component is dropped and counted.
    """
    if cloud.n_points == 0:
        raise ValidationError("cannot build a filtration on an empty cloud")

    simplices, values = _build_filtration(cloud, params)
    order = sorted(range(len(simplices)),
                   key=lambda i: (values[i], len(simplices[i]), simplices[i]))
    index_of = {simplices[i]: rank for rank, i in enumerate(order)}
    sorted_simplices = [simplices[i] for i in order]
    sorted_values = [values[i] for i in order]

    pairs = _reduce(sorted_simplices, index_of)

    paired = set()
    births, deaths, dims = [], [], []
    for i, j in pairs:
        paired.add(i)
        paired.add(j)
        if sorted_values[j] > sorted_values[i]:
            births.append(sorted_values[i])
            deaths.append(sorted_values[j])
            dims.append(len(sorted_simplices[i]) - 1)

    n_essential = sum(
        1 for rank, s in enumerate(sorted_simplices)
        if len(s) - 1 <= params.max_homology_dim and rank not in paired)
    if n_essential:
        warnings.warn(
            f"dropping {n_essential} essential class(es) still alive at "
            f"max_radius={params.max_radius}", stacklevel=2)

    return PersistenceDiagram(
        np.asarray(births), np.asarray(deaths),
        np.asarray(dims, dtype=np.int64),
        n_dropped_infinite=n_essential)


def _build_filtration(cloud: PointCloud, params: FiltrationParams):
    """Enumerate simplices with diameter <= max_radius, up to dim K+1."""
    n = cloud.n_points
    top_dim = params.max_homology_dim + 1
    budget = params.simplex_budget

    if n > 1:
        dist = squareform(pdist(cloud.points))
    else:
        dist = np.zeros((1, 1))
    radius = params.max_radius

    simplices: list[tuple[int, ...]] = [(i,) for i in range(n)]
    values: list[float] = [0.0] * n
    _check_budget(len(simplices), budget)

    adjacency = dist <= radius
    np.fill_diagonal(adjacency, False)

    edges = []
    for i in range(n):
        for j in np.nonzero(adjacency[i, i + 1:])[0] + i + 1:
            edges.append((i, int(j)))
    _check_budget(len(simplices) + len(edges), budget)
    for i, j in edges:
        simplices.append((i, j))
        values.append(float(dist[i, j]))

    if top_dim >= 2:
        count = len(simplices)
        for i, j in edges:
            common = np.nonzero(adjacency[i] & adjacency[j])[0]
            for k in common[common > j]:
                count += 1
                _check_budget(count, budget)
                simplices.append((i, j, int(k)))
                values.append(float(max(dist[i, j], dist[i, k], dist[j, k])))

    if top_dim >= 3:
        count = len(simplices)
        triangles = [s for s in simplices if len(s) == 3]
        for i, j, k in triangles:
            common = np.nonzero(adjacency[i] & adjacency[j] & adjacency[k])[0]
            for m in common[common > k]:
                count += 1
                _check_budget(count, budget)
                simplices.append((i, j, k, int(m)))
                values.append(float(max(
                    dist[i, j], dist[i, k], dist[i, m],
                    dist[j, k], dist[j, m], dist[k, m])))

    return simplices, values


def _check_budget(count: int, budget: int) -> None:
    if count > budget:
        raise SimplexBudgetError(
            f"filtration needs at least {count} simplices, exceeding the "
            f"budget of {budget}; raise simplex_budget or lower "
            "max_radius/max_homology_dim")


def _reduce(sorted_simplices, index_of) -> list[tuple[int, int]]:
    """Column reduction with clearing, dimensions processed high to low.

    Returns (birth_index, death_index) pairs in the sorted order.
    """
    by_dim: dict[int, list[int]] = {}
    for rank, s in enumerate(sorted_simplices):
        by_dim.setdefault(len(s) - 1, []).append(rank)

    pivot_col: dict[int, int] = {}
    cleared: set[int] = set()
    pairs: list[tuple[int, int]] = []

    for p in sorted(by_dim, reverse=True):
        if p == 0:
            continue
        for j in by_dim[p]:
            if j in cleared:
                continue
            col = 0
            simplex = sorted_simplices[j]
            for facet in combinations(simplex, p):
                col |= 1 << index_of[facet]
            while col:
                low = col.bit_length() - 1
                other = pivot_col.get(low)
                if other is None:
                    break
                col ^= other
            if col:
                low = col.bit_length() - 1
                pivot_col[low] = col
                cleared.add(low)
                pairs.append((low, j))
    return pairs


def connected_components(cloud: PointCloud, radius: float) -> int:
    """Number of connected components of the radius graph (union-find)."""
    n = cloud.n_points
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    if n > 1:
        dist = squareform(pdist(cloud.points))
        for i in range(n):
            for j in range(i + 1, n):
                if dist[i, j] <= radius:
                    ra, rb = find(i), find(j)
                    if ra != rb:
                        parent[ra] = rb
    return sum(1 for i in range(n) if find(i) == i)


# -- point-cloud file I/O ----------------------------------------------------

def write_point_cloud_csv(cloud: PointCloud, path) -> None:
    """One point per line, comma-separated coordinates, no header."""
    lines = [",".join(repr(float(v)) for v in row) for row in cloud.points]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_point_cloud_csv(path, *, skip_header: bool = False) -> PointCloud:
    with open(path, "r") as handle:
        lines = handle.read().splitlines()
    if skip_header and lines:
        lines = lines[1:]
    rows = []
    width = None
    for lineno, line in enumerate(lines, start=2 if skip_header else 1):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        try:
            row = [float(f) for f in fields]
        except ValueError as exc:
            raise ValidationError(f"{path}: line {lineno}: {exc}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ValidationError(
                f"{path}: line {lineno}: expected {width} coordinates, "
                f"got {len(row)}")
        rows.append(row)
    if not rows:
        raise ValidationError(f"{path}: no points found")
    try:
        return PointCloud(np.asarray(rows, dtype=np.float64))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
