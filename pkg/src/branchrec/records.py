"""Detection, verification and extension of redundantly recorded observables.

A record on region F is a resolution of the identity on F into orthogonal
projectors, stored as orthonormal range bases.  The last projector of every
record is the remainder, which annihilates the state for a valid record.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import opalgebra
from .errors import DomainError, NumericalError
from .regions import Region, as_region, disjoint
from .statecore import PureState, apply_projector, check_budget, group_sites, reduced_density_matrix

DEFAULT_TOL = 1e-8
WEIGHT_CUTOFF = 1e-12


def _orth(columns: np.ndarray, tol: float) -> np.ndarray:
    if columns.shape[1] == 0:
        return columns
    u, s, _ = np.linalg.svd(columns, full_matrices=False)
    return u[:, s > tol]


def _remainder(bases: Sequence[np.ndarray], dim: int) -> np.ndarray:
    if bases:
        occupied = np.hstack(bases)
        proj = np.eye(dim) - occupied @ occupied.conj().T
    else:
        proj = np.eye(dim, dtype=complex)
    vals, vecs = np.linalg.eigh(0.5 * (proj + proj.conj().T))
    return vecs[:, vals > 0.5]


@dataclass(frozen=True)
class RecordProjector:
    """Outcome projectors of one record, the remainder last."""

    region: Region
    bases: tuple[np.ndarray, ...]

    @classmethod
    def from_bases(cls, region, bases, dim: int | None = None) -> "RecordProjector":
        """Build from outcome range bases; the remainder is appended automatically."""
        bases = [np.asarray(b, dtype=complex) for b in bases]
        if dim is None:
            dim = bases[0].shape[0]
        bases = [b.reshape(dim, -1) for b in bases]
        return cls(as_region(region), tuple(bases) + (_remainder(bases, dim),))

    @classmethod
    def from_projectors(cls, region, projectors) -> "RecordProjector":
        bases = []
        for p in projectors:
            p = np.asarray(p, dtype=complex)
            vals, vecs = np.linalg.eigh(0.5 * (p + p.conj().T))
            bases.append(vecs[:, vals > 0.5])
        return cls.from_bases(region, bases, dim=np.asarray(projectors[0]).shape[0])

    @property
    def dim(self) -> int:
        return self.bases[0].shape[0]

    @property
    def num_outcomes(self) -> int:
        """Number of labelled outcomes, excluding the remainder."""
        return len(self.bases) - 1

    def projector(self, i: int) -> np.ndarray:
        b = self.bases[i]
        return b @ b.conj().T

    @property
    def projectors(self) -> list[np.ndarray]:
        return [self.projector(i) for i in range(len(self.bases))]

    def apply(self, vector: np.ndarray, lattice, i: int) -> np.ndarray:
        return apply_projector(vector, lattice, self.region, self.bases[i])

    def permuted(self, order: Sequence[int]) -> "RecordProjector":
        """Reorder the labelled outcomes; the remainder stays last."""
        return RecordProjector(self.region, tuple(self.bases[i] for i in order) + (self.bases[-1],))

    def resolution_error(self) -> float:
        total = sum(self.projectors)
        return float(np.abs(total - np.eye(self.dim)).max())


@dataclass(frozen=True)
class RecordedObservable:
    """A collection of mutually recording records on disjoint regions."""

    name: str
    outcomes: tuple
    records: tuple[RecordProjector, ...]

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "records", tuple(self.records))
        for rec in self.records:
            if rec.num_outcomes != len(self.outcomes):
                raise DomainError(
                    f"record on {rec.region} has {rec.num_outcomes} outcomes, "
                    f"observable {self.name!r} has {len(self.outcomes)}"
                )

    @property
    def redundancy(self) -> int:
        return len(self.records)

    @property
    def regions(self) -> list[Region]:
        return [r.region for r in self.records]

    @property
    def num_outcomes(self) -> int:
        return len(self.outcomes)

    def renamed(self, name: str) -> "RecordedObservable":
        return replace(self, name=name)

    def with_records(self, records) -> "RecordedObservable":
        return replace(self, records=tuple(records))

    def check_regions(self) -> None:
        if self.redundancy < 2:
            raise DomainError(f"observable {self.name!r} has fewer than two records")
        for a, b in itertools.combinations(self.regions, 2):
            if not disjoint(a, b):
                raise DomainError(f"records of {self.name!r} overlap on {a} and {b}")


def basis_observable(name: str, regions, vectors, labels=None) -> RecordedObservable:
    """Observable whose every record projects onto the same local orthonormal vectors."""
    regions = [as_region(r) for r in regions]
    bases = [np.asarray(v, dtype=complex).reshape(-1, 1) for v in vectors]
    records = tuple(RecordProjector.from_bases(region, bases) for region in regions)
    return RecordedObservable(name, tuple(labels) if labels else tuple(range(len(bases))), records)


def branch_components(state: PureState, obs: RecordedObservable, record: int = 0) -> list[np.ndarray]:
    """Branches ``Π_i ψ`` for every labelled outcome of one record."""
    rec = obs.records[record]
    return [rec.apply(state.amplitudes, state.lattice, i) for i in range(rec.num_outcomes)]


def verify_record(state: PureState, obs: RecordedObservable) -> float:
    """Largest ``‖Π_i^F ψ − Π_i^F' ψ‖`` over outcomes (remainder included) and record pairs."""
    obs.check_regions()
    for rec in obs.records:
        state.lattice.validate(rec.region)
        if rec.dim != state.lattice.region_dim(rec.region):
            raise DomainError(f"record on {rec.region} has the wrong local dimension")
    worst = 0.0
    for i in range(obs.num_outcomes + 1):
        vecs = [rec.apply(state.amplitudes, state.lattice, i) for rec in obs.records]
        for a, b in itertools.combinations(vecs, 2):
            worst = max(worst, float(np.linalg.norm(a - b)))
    return worst


def remark_residual(state: PureState, obs: RecordedObservable) -> float:
    """Largest deviation from ``Π_j^F ρ^F_{F':i} Π_j^F = δ_ij ρ^F_{F':i}``.

    ``ρ^F_{F':i}`` is the state on F conditioned on outcome i of the record on F'.
    """
    lat = state.lattice
    worst = 0.0
    for rf, rfp in itertools.permutations(obs.records, 2):
        for i in range(obs.num_outcomes + 1):
            cond = rfp.apply(state.amplitudes, lat, i)
            rho = reduced_density_matrix(cond, rf.region, lattice=lat).matrix
            for j in range(obs.num_outcomes + 1):
                p = rf.projector(j)
                target = rho if i == j else 0
                worst = max(worst, float(np.linalg.norm(p @ rho @ p - target, 2)))
    return worst


def is_recorded(state: PureState, obs: RecordedObservable, tol: float = DEFAULT_TOL) -> bool:
    return verify_record(state, obs) <= tol


def _first_significant(vector: np.ndarray) -> int:
    mags = np.abs(vector)
    hits = np.nonzero(mags > 1e-6 * max(mags.max(), 1e-300))[0]
    return int(hits[0]) if hits.size else len(vector)


def canonical_order(state: PureState, obs: RecordedObservable) -> RecordedObservable:
    """Sort outcomes by descending branch weight, ties by first significant amplitude."""
    branches = branch_components(state, obs)
    keys = [(-round(float(np.vdot(b, b).real), 10), _first_significant(b)) for b in branches]
    order = sorted(range(len(branches)), key=lambda i: keys[i])
    return obs.with_records(rec.permuted(order) for rec in obs.records)


def drop_negligible(state: PureState, obs: RecordedObservable) -> RecordedObservable:
    """Fold outcomes whose branch weight is below the cutoff into the remainder."""
    branches = branch_components(state, obs)
    keep = [i for i, b in enumerate(branches) if np.vdot(b, b).real >= WEIGHT_CUTOFF]
    if len(keep) == obs.num_outcomes:
        return obs
    records = [
        RecordProjector.from_bases(rec.region, [rec.bases[i] for i in keep], dim=rec.dim)
        for rec in obs.records
    ]
    return RecordedObservable(obs.name, tuple(range(len(keep))), tuple(records))


@dataclass
class DetectionResult:
    """Finest common record structure between two regions.

    ``observable`` is the canonical (forced) structure, or None when it is
    trivial.  When the commutant is not abelian, ``refinement`` holds one
    seeded maximal refinement, which is a valid record but not canonical.
    """

    regions: tuple[Region, Region]
    observable: RecordedObservable | None
    canonical: bool
    gauge_dimension: int
    center_dimension: int
    refinement: RecordedObservable | None = None
    residual: float = 0.0

    @property
    def trivial(self) -> bool:
        return self.observable is None


def _partner_bases(phis: np.ndarray, blocks: Sequence[np.ndarray], tol: float) -> list[np.ndarray]:
    # P Φ_k = Φ_k Qᵀ with Qᵀ the projector onto ∪_k range(Φ_k† P)
    out = []
    for b in blocks:
        cols = np.hstack([phi.conj().T @ b for phi in phis])
        out.append(_orth(cols, tol).conj())
    return out


def _observable_from_blocks(state, F, Fp, phis, blocks, tol, name):
    dF, dFp = phis.shape[1], phis.shape[2]
    partner = _partner_bases(phis, blocks, tol)
    rec_f = RecordProjector.from_bases(F, blocks, dim=dF)
    rec_fp = RecordProjector.from_bases(Fp, partner, dim=dFp)
    obs = RecordedObservable(name, tuple(range(len(blocks))), (rec_f, rec_fp))
    return canonical_order(state, drop_negligible(state, obs))


def finest_common_records(state: PureState, F, Fp, tol: float = DEFAULT_TOL, seed: int = 0,
                          name: str = "omega") -> DetectionResult:
    """Finest record structure shared by two disjoint regions.

    The state is Schmidt-decomposed across ``F ∪ Fp``; each Schmidt vector,
    read as a map from ``Fp`` to ``F``, contributes to the algebra generated
    by the products ``M_k M_l†`` on the support of the reduced state on
    ``F``.  Minimal central projections of that algebra are the forced
    outcomes; a non-abelian commutant signals gauge freedom.
    """
    lat = state.lattice
    F, Fp = lat.validate(F), lat.validate(Fp)
    if not F.sites or not Fp.sites:
        raise DomainError("detection regions must be nonempty")
    if not disjoint(F, Fp):
        raise DomainError(f"regions {F} and {Fp} overlap")
    dF, dFp = lat.region_dim(F), lat.region_dim(Fp)
    check_budget((dF * dFp) ** 2, "pair-region Schmidt decomposition")
    rest = lat.complement(F.union(Fp))
    tensor = group_sites(state.amplitudes, lat.local_dims, [F.sites, Fp.sites, rest.sites])
    cutoff = 0.1 * tol

    u, s, _ = np.linalg.svd(tensor.reshape(dF * dFp, -1), full_matrices=False)
    phis = u[:, s > cutoff].T.reshape(-1, dF, dFp)

    uf, sf, _ = np.linalg.svd(tensor.reshape(dF, -1), full_matrices=False)
    support = uf[:, sf > cutoff]
    r = support.shape[1]

    restricted = np.einsum("ai,kab->kib", support.conj(), phis)
    gens = np.einsum("kib,ljb->klij", restricted, restricted.conj()).reshape(-1, r, r)
    gens = opalgebra.span_basis(gens, tol)
    alg = opalgebra.generate_algebra(gens, tol)
    comm = opalgebra.commutant(alg, tol)
    center_alg = opalgebra.center(alg, tol, comm=comm)
    blocks = opalgebra.central_blocks(alg, tol, seed, center_alg=center_alg)
    canonical = comm.dim == len(blocks)

    result = DetectionResult((F, Fp), None, canonical, comm.dim, center_alg.dim)
    if len(blocks) > 1:
        obs = _observable_from_blocks(state, F, Fp, phis, [support @ b for b in blocks], tol, name)
        result.observable = obs if obs.num_outcomes > 1 else None
    if not canonical:
        h = opalgebra.random_hermitian_element(comm, seed, tol)
        fine = opalgebra.spectral_clusters(h)
        ref = _observable_from_blocks(state, F, Fp, phis, [support @ b for b in fine], tol,
                                      name + "_refined")
        result.refinement = ref if ref.num_outcomes > 1 else None

    for obs in (result.observable, result.refinement):
        if obs is not None:
            res = verify_record(state, obs)
            result.residual = max(result.residual, res)
            if res > tol:
                raise NumericalError(f"detected record on {F}, {Fp} fails verification ({res:.3g})")
    return result


@dataclass(frozen=True)
class ExtensionRefusal:
    """Why a record could not be extended onto a region."""

    region: Region
    max_overlap: float
    residual: float | None = None

    def __bool__(self) -> bool:
        return False


def extend_record(state: PureState, obs: RecordedObservable, G, tol: float = DEFAULT_TOL):
    """Try to add a record of ``obs`` on region ``G``.

    Candidate projectors on G are the supports of the branches' reduced
    states there.  Returns the extended observable, or an
    :class:`ExtensionRefusal` when those supports are not orthogonal.
    """
    lat = state.lattice
    G = lat.validate(G)
    for region in obs.regions:
        if not disjoint(region, G):
            raise DomainError(f"{G} overlaps existing record region {region}")
    dG = lat.region_dim(G)
    supports = []
    for b in branch_components(state, obs):
        rho = reduced_density_matrix(b, G, lattice=lat).matrix
        vals, vecs = np.linalg.eigh(rho)
        supports.append(vecs[:, vals > (0.1 * tol) ** 2])
    overlap = 0.0
    for a, b in itertools.combinations(supports, 2):
        if a.shape[1] and b.shape[1]:
            overlap = max(overlap, float(np.linalg.norm(a.conj().T @ b, 2)))
    if overlap > tol:
        return ExtensionRefusal(G, overlap)
    extended = obs.with_records(obs.records + (RecordProjector.from_bases(G, supports, dim=dG),))
    residual = verify_record(state, extended)
    if residual > tol:
        return ExtensionRefusal(G, overlap, residual)
    return extended


def branch_fidelities(state: PureState, a: RecordedObservable, b: RecordedObservable):
    """Optimal outcome matching between two observables' branch decompositions.

    Returns ``(perm, fidelities)`` where outcome ``perm[i]`` of ``b`` is
    matched to outcome ``i`` of ``a``, or None when outcome counts differ.
    """
    if a.num_outcomes != b.num_outcomes:
        return None
    ba = np.array(branch_components(state, a))
    bb = np.array(branch_components(state, b))
    na = np.linalg.norm(ba, axis=1)
    nb = np.linalg.norm(bb, axis=1)
    fid = np.abs(ba.conj() @ bb.T) ** 2 / np.outer(na**2, nb**2)
    rows, cols = linear_sum_assignment(-fid)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    return perm, fid[rows, cols]


@dataclass
class ScanResult:
    observables: list[RecordedObservable]
    detections: list[DetectionResult] = field(default_factory=list)


def scan(state: PureState, candidate_regions, tol: float = DEFAULT_TOL, seed: int = 0) -> ScanResult:
    """Run pairwise detection over candidates and merge equivalent observables."""
    lat = state.lattice
    candidates = []
    for region in candidate_regions:
        region = lat.validate(region)
        if region.sites and region not in candidates:
            candidates.append(region)

    detections = []
    groups: list[RecordedObservable] = []
    pairs = [(i, j) for i, j in itertools.combinations(range(len(candidates)), 2)
             if disjoint(candidates[i], candidates[j])]
    for index, (i, j) in enumerate(pairs):
        det = finest_common_records(state, candidates[i], candidates[j], tol, seed ^ index)
        detections.append(det)
        found = det.observable
        if found is None:
            continue
        for g, group in enumerate(groups):
            match = branch_fidelities(state, group, found)
            if match is None or np.min(match[1]) < 1 - tol:
                continue
            perm = match[0]
            records = list(group.records)
            for rec in found.records:
                if all(disjoint(rec.region, other.region) for other in records):
                    records.append(rec.permuted(perm))
            groups[g] = group.with_records(records)
            break
        else:
            groups.append(found.renamed(f"omega_{len(groups)}"))

    merged = []
    for obs in groups:
        for region in candidates:
            if all(disjoint(region, other) for other in obs.regions):
                ext = extend_record(state, obs, region, tol)
                if ext:
                    obs = ext
        merged.append(obs)
    merged.sort(key=lambda o: (-o.redundancy, o.name))
    return ScanResult(merged, detections)


def scan_records(state: PureState, candidate_regions, tol: float = DEFAULT_TOL, seed: int = 0) -> list[RecordedObservable]:
    """All redundantly recorded observables found on pairs of candidate regions.

    Sorted by descending redundancy, then name.
    """
    return scan(state, candidate_regions, tol, seed).observables
