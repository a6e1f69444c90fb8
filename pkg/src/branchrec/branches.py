"""Joint branch decompositions of several recorded observables."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError
from .records import DEFAULT_TOL, WEIGHT_CUTOFF, RecordedObservable, verify_record
from .statecore import Lattice, PureState


@dataclass
class BranchDecomposition:
    """Sparse map from multi-index to unnormalized branch vector.

    Multi-indices follow the order of ``observables`` (sorted by name);
    index ``n_a`` of observable ``a`` would be its remainder outcome.
    """

    observables: list[tuple[str, int]]
    branches: dict[tuple[int, ...], np.ndarray]
    weights: dict[tuple[int, ...], float]
    records: list[RecordedObservable] = field(default_factory=list, repr=False)
    lattice: Lattice | None = field(default=None, repr=False)
    tol: float = DEFAULT_TOL
    eigen_residual: float = 0.0

    @classmethod
    def from_branches(cls, observables, branches, records=(), lattice=None, tol=DEFAULT_TOL):
        weights = {k: float(np.vdot(v, v).real) for k, v in branches.items()}
        return cls(list(observables), dict(branches), weights, list(records), lattice, tol)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.observables]

    def __len__(self) -> int:
        return len(self.branches)

    def total(self) -> np.ndarray:
        return sum(self.branches.values())

    def distance(self, other: "BranchDecomposition") -> float:
        """Largest branchwise distance, treating missing branches as zero."""
        keys = set(self.branches) | set(other.branches)
        worst = 0.0
        for k in keys:
            a = self.branches.get(k)
            b = other.branches.get(k)
            if a is None:
                a = np.zeros_like(b)
            if b is None:
                b = np.zeros_like(a)
            worst = max(worst, float(np.linalg.norm(a - b)))
        return worst


@dataclass
class CompatibilityVerdict:
    """Which joint-eigenstate conditions hold, with the worst offender.

    The checks are (a) every branch is an eigenvector of every record,
    (b) the branches sum to the state and (c) they are pairwise orthogonal.
    """

    compatible: bool
    eigen_residual: float
    reconstruction_residual: float
    orthogonality_residual: float
    failed: list[str]
    worst: tuple[str, int, tuple[int, ...]] | None = None

    def as_dict(self) -> dict:
        return {
            "compatible": self.compatible,
            "eigen_residual": self.eigen_residual,
            "reconstruction_residual": self.reconstruction_residual,
            "orthogonality_residual": self.orthogonality_residual,
            "failed": list(self.failed),
            "worst": None if self.worst is None else {
                "observable": self.worst[0], "record": self.worst[1], "branch": list(self.worst[2])},
        }


def _sorted(obs_set: Sequence[RecordedObservable]) -> list[RecordedObservable]:
    names = [o.name for o in obs_set]
    if len(set(names)) != len(names):
        raise DomainError("observable names must be unique")
    return sorted(obs_set, key=lambda o: o.name)


def projector_product(state: PureState, obs_set, outcome_index, representatives=None, order=None) -> np.ndarray:
    """``(Π^{F_a}_{a:i} Π^{G_b}_{b:j} ⋯) ψ``.

    ``outcome_index``, ``representatives`` (record position per observable)
    and ``order`` (left-to-right product order as positions) all refer to
    ``obs_set`` as given.
    """
    n = len(obs_set)
    representatives = [0] * n if representatives is None else list(representatives)
    order = list(range(n)) if order is None else list(order)
    vec = state.amplitudes
    for pos in reversed(order):
        rec = obs_set[pos].records[representatives[pos]]
        vec = rec.apply(vec, state.lattice, outcome_index[pos])
    return vec


def _branch_tree(state: PureState, obs: list[RecordedObservable], reps: list[int]):
    # rightmost factor first: Π_a Π_b … Π_z ψ applies z first
    level = {(): state.amplitudes}
    for pos in reversed(range(len(obs))):
        rec = obs[pos].records[reps[pos]]
        nxt = {}
        for key, vec in level.items():
            for i in range(obs[pos].num_outcomes + 1):
                out = rec.apply(vec, state.lattice, i)
                if np.vdot(out, out).real >= WEIGHT_CUTOFF:
                    nxt[(i,) + key] = out
        level = nxt
    return level


def joint_decomposition(state: PureState, obs_set: Sequence[RecordedObservable], tol: float = DEFAULT_TOL,
                        representatives: dict[str, int] | None = None):
    """Canonical product construction of joint branches, then a full compatibility check.

    Observables are taken in name order, each through its first record
    unless ``representatives`` names another.  Returns
    ``(BranchDecomposition, CompatibilityVerdict)``.
    """
    obs = _sorted(obs_set)
    if not obs:
        raise DomainError("joint decomposition needs at least one observable")
    for o in obs:
        res = verify_record(state, o)
        if res > tol:
            raise DomainError(f"{o.name!r} is not a record of the state (residual {res:.3g})")
    reps = [(representatives or {}).get(o.name, 0) for o in obs]
    branches = _branch_tree(state, obs, reps)
    lat = state.lattice

    eigen, worst = 0.0, None
    for key, vec in branches.items():
        for pos, o in enumerate(obs):
            for r, rec in enumerate(o.records):
                dev = float(np.linalg.norm(rec.apply(vec, lat, key[pos]) - vec))
                if dev > eigen:
                    eigen, worst = dev, (o.name, r, key)
    recon = float(np.linalg.norm(sum(branches.values()) - state.amplitudes)) if branches else 1.0
    if len(branches) > 1:
        stack = np.array(list(branches.values()))
        gram = np.abs(stack.conj() @ stack.T)
        np.fill_diagonal(gram, 0)
        ortho = float(gram.max())
    else:
        ortho = 0.0
    failed = [tag for tag, value in (("a", eigen), ("b", recon), ("c", ortho)) if value > tol]
    verdict = CompatibilityVerdict(not failed, eigen, recon, ortho, failed, worst if "a" in failed else None)
    decomp = BranchDecomposition.from_branches(
        [(o.name, o.num_outcomes) for o in obs], branches, obs, lat, tol)
    decomp.eigen_residual = eigen
    return decomp, verdict


def check_theorem_identities(state: PureState, obs_set: Sequence[RecordedObservable], trials: int = 50,
                             seed: int = 0) -> float:
    """Largest spread of projector products under random representatives and orderings.

    Each trial draws a labelled multi-index and two random (representative,
    ordering) configurations, and records the distance between the two
    product vectors.
    """
    obs = list(obs_set)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        index = [int(rng.integers(o.num_outcomes)) for o in obs]
        vecs = []
        for _ in range(2):
            reps = [int(rng.integers(o.redundancy)) for o in obs]
            order = list(rng.permutation(len(obs)))
            vecs.append(projector_product(state, obs, index, reps, order))
        worst = max(worst, float(np.linalg.norm(vecs[0] - vecs[1])))
    return worst


def coarse_grain(decomp: BranchDecomposition, keep: Sequence[str]) -> BranchDecomposition:
    """Sum branches over the observables not in ``keep``."""
    keep = list(keep)
    if not keep:
        raise DomainError("keep at least one observable")
    unknown = [k for k in keep if k not in decomp.names]
    if unknown:
        raise DomainError(f"unknown observables {unknown}")
    positions = [decomp.names.index(k) for k in sorted(keep)]
    summed: dict[tuple[int, ...], np.ndarray] = {}
    for key, vec in decomp.branches.items():
        sub = tuple(key[p] for p in positions)
        summed[sub] = summed[sub] + vec if sub in summed else vec.copy()
    summed = {k: v for k, v in summed.items() if np.vdot(v, v).real >= WEIGHT_CUTOFF}
    kept_records = [o for o in decomp.records if o.name in keep]
    result = BranchDecomposition.from_branches(
        [decomp.observables[p] for p in positions], summed, kept_records, decomp.lattice, decomp.tol)
    if kept_records and decomp.lattice is not None:
        eigen = 0.0
        for key, vec in summed.items():
            for pos, o in enumerate(sorted(kept_records, key=lambda o: o.name)):
                for rec in o.records:
                    eigen = max(eigen, float(np.linalg.norm(rec.apply(vec, decomp.lattice, key[pos]) - vec)))
        result.eigen_residual = eigen
    return result


def entropy_of_weights(weights) -> float:
    w = np.asarray(list(weights), dtype=float)
    w = w[w > 0]
    return float(-(w * np.log(w)).sum())


def branch_entropy(decomp: BranchDecomposition) -> float:
    """Shannon entropy (nats) of the squared branch norms."""
    return entropy_of_weights(decomp.weights.values())
