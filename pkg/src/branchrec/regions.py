"""Recording regions: overlap relations, pair-covering and the length-scale criterion."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DomainError

# Records beyond this count make the exhaustive pruning search too expensive.
EXHAUSTIVE_PRUNE_LIMIT = 12


@dataclass(frozen=True, order=True)
class Region:
    """A set of lattice sites, stored as a strictly increasing tuple."""

    sites: tuple[int, ...]

    def __init__(self, sites: Iterable[int] = ()):
        sites = tuple(int(s) for s in sites)
        if len(set(sites)) != len(sites):
            raise DomainError(f"duplicate sites in region {sites}")
        if any(s < 0 for s in sites):
            raise DomainError(f"negative site index in region {sites}")
        object.__setattr__(self, "sites", tuple(sorted(sites)))

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, site) -> bool:
        return site in self.sites

    def __repr__(self) -> str:
        return f"Region({list(self.sites)})"

    def union(self, other: "Region") -> "Region":
        return Region(set(self.sites) | set(other.sites))

    def overlaps(self, other: "Region") -> bool:
        return not disjoint(self, other)


def as_region(region) -> Region:
    return region if isinstance(region, Region) else Region(region)


def disjoint(a: Region, b: Region) -> bool:
    """True iff the two regions share no site."""
    return not (set(a.sites) & set(b.sites))


@dataclass
class RegionLayout:
    """Named map from observable name to the regions holding its records."""

    observables: dict[str, list[Region]] = field(default_factory=dict)

    def __post_init__(self):
        self.observables = {
            name: [as_region(r) for r in regions] for name, regions in self.observables.items()
        }
        for name, regions in self.observables.items():
            if len(regions) < 2:
                raise DomainError(f"observable {name!r} needs at least 2 record regions")
            for a, b in itertools.combinations(regions, 2):
                if not disjoint(a, b):
                    raise DomainError(f"records of {name!r} overlap: {a} and {b}")

    @classmethod
    def from_observables(cls, observables) -> "RegionLayout":
        return cls({obs.name: list(obs.regions) for obs in observables})

    def names(self) -> list[str]:
        return list(self.observables)

    def __getitem__(self, name: str) -> list[Region]:
        return self.observables[name]


@dataclass(frozen=True)
class CoverResult:
    """Outcome of a pair-covering test.

    ``witness`` is the covering pair when ``covers`` is true.  Otherwise
    ``escapes`` maps every pair of covering-side region indices to the index
    of a covered-side region disjoint from both.
    """

    covers: bool
    witness: tuple[int, int] | None = None
    escapes: dict[tuple[int, int], int] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.covers


def pair_covers(a: Sequence[Region], b: Sequence[Region]) -> CoverResult:
    """Decide whether the records ``a`` pair-cover the records ``b``.

    ``a`` pair-covers ``b`` when some unordered pair of regions of ``a``
    jointly overlaps every region of ``b``.
    """
    a = [as_region(r) for r in a]
    b = [as_region(r) for r in b]
    if not a or not b:
        raise DomainError("pair_covers needs nonempty region lists")
    a_sets = [set(r.sites) for r in a]
    b_sets = [set(r.sites) for r in b]
    escapes = {}
    for i, j in itertools.combinations(range(len(a)), 2):
        joint = a_sets[i] | a_sets[j]
        free = next((k for k, g in enumerate(b_sets) if not (g & joint)), None)
        if free is None:
            return CoverResult(True, witness=(i, j))
        escapes[(i, j)] = free
    return CoverResult(False, escapes=escapes)


def cover_matrix(layout: RegionLayout) -> dict[tuple[str, str], bool]:
    """Pair-covering relation for every ordered pair of distinct observables."""
    names = layout.names()
    return {
        (p, q): pair_covers(layout[p], layout[q]).covers
        for p in names
        for q in names
        if p != q
    }


def any_pair_covering(layout: RegionLayout) -> bool:
    return any(cover_matrix(layout).values())


# -- geometry ---------------------------------------------------------------


def _ball_from_boundary(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Smallest ball with every point of ``points`` on its boundary."""
    if len(points) == 0:
        return np.zeros(0), -np.inf
    p0 = points[0]
    if len(points) == 1:
        return p0.copy(), 0.0
    diffs = points[1:] - p0
    gram = diffs @ diffs.T
    rhs = 0.5 * np.einsum("ij,ij->i", diffs, diffs)
    lam, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    center = p0 + lam @ diffs
    return center, float(np.linalg.norm(points - center, axis=1).max())


def _welzl(points: np.ndarray, boundary: list[np.ndarray], dim: int):
    if len(points) == 0 or len(boundary) == dim + 1:
        if not boundary:
            return np.zeros(dim), -np.inf
        return _ball_from_boundary(np.array(boundary))
    p, rest = points[-1], points[:-1]
    center, radius = _welzl(rest, boundary, dim)
    if radius >= 0 and np.linalg.norm(p - center) <= radius * (1 + 1e-12) + 1e-12:
        return center, radius
    return _welzl(rest, boundary + [p], dim)


def enclosing_ball(points) -> tuple[np.ndarray, float]:
    """Minimum enclosing ball of a point set (center, radius)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        raise DomainError("enclosing ball of an empty point set")
    center, radius = _welzl(points, [], points.shape[1])
    return center, max(radius, 0.0)


def region_distance(a: Region, b: Region, coords: np.ndarray) -> float:
    """Minimum Euclidean distance between the site coordinates of two regions."""
    pa = coords[list(a.sites)]
    pb = coords[list(b.sites)]
    return float(np.min(np.linalg.norm(pa[:, None, :] - pb[None, :, :], axis=-1)))


def sphere_triple(regions: Sequence[Region], ell: float, lattice) -> tuple[int, int, int] | None:
    """Indices of three records satisfying the length-scale criterion, if any.

    A region qualifies when its minimum enclosing ball has diameter at most
    ``ell``; the three regions must be pairwise farther apart than ``ell``.
    """
    if ell <= 0:
        raise DomainError("ell must be positive")
    coords = getattr(lattice, "coords", None)
    if coords is None:
        raise ConfigError("sphere criterion needs lattice coordinates")
    coords = np.asarray(coords, dtype=float)
    regions = [as_region(r) for r in regions]
    small = [
        k for k, r in enumerate(regions)
        if len(r) and 2 * enclosing_ball(coords[list(r.sites)])[1] <= ell
    ]
    for triple in itertools.combinations(small, 3):
        if all(
            region_distance(regions[i], regions[j], coords) > ell
            for i, j in itertools.combinations(triple, 2)
        ):
            return triple
    return None


def sphere_criterion(regions: Sequence[Region], ell: float, lattice) -> bool:
    """True iff at least three of the regions are small and mutually separated at scale ``ell``."""
    return sphere_triple(regions, ell, lattice) is not None


# -- pruning ----------------------------------------------------------------


@dataclass
class PruneResult:
    feasible: bool
    layout: RegionLayout | None
    dropped: dict[str, list[Region]]


def _is_noncovering(obs: Mapping[str, list[Region]]) -> bool:
    names = list(obs)
    return not any(
        pair_covers(obs[p], obs[q]).covers for p in names for q in names if p != q
    )


def prune_to_noncovering(layout: RegionLayout) -> PruneResult:
    """Drop as few records as possible so that no observable pair-covers another.

    Every observable keeps at least two records.  The search is exhaustive
    (fewest drops first, deterministic order) for small layouts and greedy
    otherwise.
    """
    names = layout.names()
    flat = [(name, k) for name in names for k in range(len(layout[name]))]

    def build(drop: set) -> dict[str, list[Region]] | None:
        kept = {n: [r for k, r in enumerate(layout[n]) if (n, k) not in drop] for n in names}
        if any(len(v) < 2 for v in kept.values()):
            return None
        return kept

    def result(drop: set) -> PruneResult:
        kept = build(drop)
        dropped = {n: [layout[n][k] for (m, k) in flat if m == n and (m, k) in drop] for n in names}
        return PruneResult(True, RegionLayout(kept), dropped)

    if _is_noncovering(layout.observables):
        return result(set())

    if len(flat) <= EXHAUSTIVE_PRUNE_LIMIT:
        for size in range(1, len(flat) + 1):
            for combo in itertools.combinations(flat, size):
                kept = build(set(combo))
                if kept is not None and _is_noncovering(kept):
                    return result(set(combo))
        return PruneResult(False, None, {})

    drop: set = set()
    while True:
        kept = build(drop)
        if kept is not None and _is_noncovering(kept):
            return result(drop)
        candidates = []
        for n, k in flat:
            if (n, k) in drop or len(kept[n]) <= 2:
                continue
            region = layout[n][k]
            score = sum(
                region.overlaps(g) for m in names if m != n for g in kept[m]
            )
            candidates.append((-score, n, k))
        if not candidates:
            return PruneResult(False, None, {})
        _, n, k = min(candidates)
        drop.add((n, k))
