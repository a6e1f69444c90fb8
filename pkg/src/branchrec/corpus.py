"""Deterministic example states and planted-record states with known branches."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .branches import BranchDecomposition
from .errors import DomainError
from .regions import Region, RegionLayout, any_pair_covering, as_region, disjoint, sphere_criterion
from .records import RecordedObservable, RecordProjector, basis_observable
from .statecore import Lattice, PureState, product_vector, ungroup_sites

_SQRT2 = math.sqrt(2.0)
KET_PLUS = np.array([1, 1]) / _SQRT2
KET_MINUS = np.array([1, -1]) / _SQRT2


def product_state(n: int, local_dim: int = 2) -> PureState:
    """``|0…0⟩`` on ``n`` sites."""
    lat = Lattice((local_dim,) * n)
    amps = np.zeros(lat.dim)
    amps[0] = 1
    return PureState(amps, lat)


def bell_state(coords=None) -> PureState:
    return PureState(np.array([1, 0, 0, 1]) / _SQRT2, Lattice.qubits(2, coords))


def bell_observables() -> tuple[RecordedObservable, RecordedObservable]:
    """The z-basis and x-basis observables, each recorded once on each qubit."""
    z = basis_observable("z", [[0], [1]], [[1, 0], [0, 1]], labels=("up", "down"))
    x = basis_observable("x", [[0], [1]], [KET_PLUS, KET_MINUS], labels=("plus", "minus"))
    return z, x


def ghz_state(n: int) -> PureState:
    if n < 2:
        raise DomainError("GHZ state needs at least 2 qubits")
    lat = Lattice.qubits(n)
    amps = np.zeros(lat.dim)
    amps[0] = amps[-1] = 1
    return PureState(amps, lat)


def ghz_observable(n: int) -> RecordedObservable:
    return basis_observable("z", [[k] for k in range(n)], [[1, 0], [0, 1]])


# -- Shor code --------------------------------------------------------------


def shor_site(m: int, mp: int, Mp: int) -> int:
    """Row-major site index of row ``m`` (0-based), column ``mp``."""
    return m * Mp + mp


def shor_rows(M: int, Mp: int) -> list[Region]:
    return [Region(shor_site(m, k, Mp) for k in range(Mp)) for m in range(M)]


def shor_columns(M: int, Mp: int) -> list[Region]:
    return [Region(shor_site(m, k, Mp) for m in range(M)) for k in range(Mp)]


def _ghz_block(n: int, sign: int) -> np.ndarray:
    v = np.zeros(2**n)
    v[0], v[-1] = 1, sign
    return v


def shor_state(M: int, Mp: int, alpha: complex = 1 / _SQRT2, beta: complex = 1 / _SQRT2) -> PureState:
    """Generalized Shor code state ``α ξ₊ + β ξ₋`` on an ``M × Mp`` qubit grid, normalized.

    ``ξ± = (|0…0⟩ ± |1…1⟩)^{⊗M}`` with each factor on one row of ``Mp`` qubits.
    Site coordinates are ``(m, m')``.
    """
    if M < 2 or Mp < 2:
        raise DomainError("Shor state needs M, Mp >= 2")
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-12:
        raise DomainError("|alpha|^2 + |beta|^2 must equal 1")
    coords = [(m, k) for m in range(M) for k in range(Mp)]
    lat = Lattice.qubits(M * Mp, coords)
    rows = shor_rows(M, Mp)
    total = np.zeros(lat.dim, dtype=complex)
    for coeff, sign in ((alpha, 1), (beta, -1)):
        if coeff != 0:
            total += coeff * product_vector(lat, [(r.sites, _ghz_block(Mp, sign)) for r in rows])
    return PureState(total, lat)


def shor_pm_observable(M: int, Mp: int) -> RecordedObservable:
    """The ± observable on every row: projectors onto ``|0…0⟩ ± |1…1⟩``."""
    vecs = [_ghz_block(Mp, 1) / _SQRT2, _ghz_block(Mp, -1) / _SQRT2]
    return basis_observable("omega_pm", shor_rows(M, Mp), vecs, labels=("+", "-"))


def parity_bases(n: int) -> list[np.ndarray]:
    even = [s for s in range(2**n) if bin(s).count("1") % 2 == 0]
    odd = [s for s in range(2**n) if bin(s).count("1") % 2 == 1]
    eye = np.eye(2**n)
    return [eye[:, even], eye[:, odd]]


def shor_parity_observable(M: int, Mp: int) -> RecordedObservable:
    """The even/odd parity observable on every column."""
    records = tuple(RecordProjector.from_bases(c, parity_bases(M)) for c in shor_columns(M, Mp))
    return RecordedObservable("omega_01", ("even", "odd"), records)


# -- dilated state ----------------------------------------------------------


def _block(region: Region, bit: int) -> np.ndarray:
    """All-zero (bit 0) or all-one (bit 1) string on a qubit region."""
    v = np.zeros(2 ** len(region))
    v[-1 if bit else 0] = 1
    return v


def dilated_state(inner_regions, outer_regions, num_sites: int | None = None) -> PureState:
    """Superposition hiding a 0/1 observable inside one record of a ± observable.

    ``Σ_± [(|0⟩_G|0⟩_G'…) ± (|1⟩_G|1⟩_G'…)] (|±⟩_F'|±⟩_F''…)`` with ``|0⟩_R``,
    ``|1⟩_R`` the all-zero and all-one strings on a region and
    ``|±⟩_R = (|0⟩_R ± |1⟩_R)/√2``.  Unlisted sites are set to ``|0⟩``.
    """
    inner = [as_region(r) for r in inner_regions]
    outer = [as_region(r) for r in outer_regions]
    if len(inner) < 2 or len(outer) < 2:
        raise DomainError("dilated state needs at least two inner and two outer regions")
    everything = inner + outer
    for a, b in itertools.combinations(everything, 2):
        if not disjoint(a, b):
            raise DomainError(f"regions {a} and {b} overlap")
    used = sorted(s for r in everything for s in r.sites)
    n = num_sites if num_sites is not None else used[-1] + 1
    lat = Lattice.qubits(n)
    idle = [s for s in range(n) if s not in used]
    total = np.zeros(lat.dim, dtype=complex)
    for sign in (1, -1):
        for bit, coeff in ((0, 1.0), (1, sign)):
            parts = [(r.sites, _block(r, bit)) for r in inner]
            parts += [(r.sites, (_block(r, 0) + sign * _block(r, 1)) / _SQRT2) for r in outer]
            if idle:
                parts.append((idle, np.eye(2 ** len(idle))[:, 0]))
            total += coeff * product_vector(lat, parts)
    return PureState(total, lat)


def dilated_observables(inner_regions, outer_regions) -> tuple[RecordedObservable, RecordedObservable]:
    """``(omega_a, omega_b)``: the ± observable on the inner union and each outer region,
    and the 0/1 observable on each inner region."""
    inner = [as_region(r) for r in inner_regions]
    outer = [as_region(r) for r in outer_regions]
    union = Region(s for r in inner for s in r.sites)
    zeros, ones = _block(union, 0), _block(union, 1)
    pm_records = [RecordProjector.from_bases(union, [(zeros + ones) / _SQRT2, (zeros - ones) / _SQRT2])]
    for r in outer:
        pm_records.append(RecordProjector.from_bases(
            r, [(_block(r, 0) + _block(r, 1)) / _SQRT2, (_block(r, 0) - _block(r, 1)) / _SQRT2]))
    omega_a = RecordedObservable("omega_a", ("+", "-"), tuple(pm_records))
    omega_b = RecordedObservable(
        "omega_b", ("0", "1"),
        tuple(RecordProjector.from_bases(r, [_block(r, 0), _block(r, 1)]) for r in inner),
    )
    return omega_a, omega_b


# -- planted states ---------------------------------------------------------


@dataclass
class PlantedObservable:
    """Record regions of one planted observable.

    ``carriers[k]`` is the subset of ``regions[k]`` holding the outcome;
    the rest of the region is acted on trivially.  Defaults to the region.
    """

    name: str
    regions: list
    num_outcomes: int
    carriers: list | None = None

    def __post_init__(self):
        self.regions = [as_region(r) for r in self.regions]
        self.carriers = self.regions if self.carriers is None else [as_region(c) for c in self.carriers]


@dataclass
class PlantSpec:
    local_dims: Sequence[int]
    observables: list[PlantedObservable]
    amplitudes: np.ndarray | None = None
    seed: int = 0
    coords: Sequence | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(o.num_outcomes for o in self.sorted_observables())

    def sorted_observables(self) -> list[PlantedObservable]:
        return sorted(self.observables, key=lambda o: o.name)

    def layout(self) -> RegionLayout:
        return RegionLayout({o.name: list(o.regions) for o in self.observables})


class Planted(NamedTuple):
    state: PureState
    oracle: BranchDecomposition
    observables: list[RecordedObservable]


def _random_orthonormal(rng, dim: int, count: int) -> np.ndarray:
    g = rng.standard_normal((dim, count)) + 1j * rng.standard_normal((dim, count))
    q, _ = np.linalg.qr(g)
    return q


def _embed_basis(lat: Lattice, region: Region, carrier: Region, vec: np.ndarray) -> np.ndarray:
    """Columns spanning ``|vec⟩⟨vec|_carrier ⊗ 1`` inside the region's local space."""
    local_dims = [lat.local_dims[s] for s in region.sites]
    pos = {s: k for k, s in enumerate(region.sites)}
    inner = [pos[s] for s in carrier.sites]
    other = [pos[s] for s in region.sites if s not in carrier.sites]
    d_other = math.prod(local_dims[k] for k in other)
    cols = []
    for e in np.eye(d_other):
        cols.append(ungroup_sites(np.multiply.outer(vec, e), local_dims, [inner, other]))
    return np.array(cols).T


def validate_spec(spec: PlantSpec) -> Lattice:
    lat = Lattice(tuple(spec.local_dims), spec.coords)
    names = [o.name for o in spec.observables]
    if len(set(names)) != len(names):
        raise DomainError("planted observable names must be unique")
    all_carriers = []
    for o in spec.observables:
        if len(o.regions) < 2:
            raise DomainError(f"{o.name!r} needs at least two records")
        for region, carrier in zip(o.regions, o.carriers):
            lat.validate(region)
            if not set(carrier.sites) <= set(region.sites) or not carrier.sites:
                raise DomainError(f"carrier {carrier} is not a nonempty subset of {region}")
            if lat.region_dim(carrier) < o.num_outcomes:
                raise DomainError(f"carrier {carrier} too small for {o.num_outcomes} outcomes")
            all_carriers.append(carrier)
        for a, b in itertools.combinations(o.regions, 2):
            if not disjoint(a, b):
                raise DomainError(f"records of {o.name!r} overlap")
    for a, b in itertools.combinations(all_carriers, 2):
        if not disjoint(a, b):
            raise DomainError(f"carriers {a} and {b} overlap")
    return lat


def planted_state(spec: PlantSpec) -> Planted:
    """State with prescribed records and its exact branch decomposition.

    Every record carrier gets seeded random orthonormal outcome vectors.
    Each joint outcome is the product of those vectors with a seeded random
    state on the sites outside every carrier, weighted by the PlantSpec
    amplitude (seeded random when absent).
    """
    lat = validate_spec(spec)
    rng = np.random.default_rng(spec.seed)
    obs_sorted = spec.sorted_observables()
    shape = spec.shape
    vectors = {}
    for o in obs_sorted:
        for k, carrier in enumerate(o.carriers):
            vectors[o.name, k] = _random_orthonormal(rng, lat.region_dim(carrier), o.num_outcomes)
    if spec.amplitudes is None:
        amps = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    else:
        amps = np.asarray(spec.amplitudes, dtype=complex).reshape(shape)
    amps = amps / np.linalg.norm(amps)

    used = {s for o in obs_sorted for c in o.carriers for s in c.sites}
    idle = [s for s in range(lat.num_sites) if s not in used]
    d_idle = math.prod(lat.local_dims[s] for s in idle)

    branches = {}
    total = np.zeros(lat.dim, dtype=complex)
    for index in itertools.product(*(range(n) for n in shape)):
        parts = []
        for o, i in zip(obs_sorted, index):
            for k, carrier in enumerate(o.carriers):
                parts.append((carrier.sites, vectors[o.name, k][:, i]))
        if idle:
            parts.append((idle, _random_orthonormal(rng, d_idle, 1)[:, 0]))
        vec = amps[index] * product_vector(lat, parts)
        total += vec
        if abs(amps[index]) ** 2 >= 1e-12:
            branches[index] = vec
    state = PureState(total, lat)

    observables = []
    for o in obs_sorted:
        records = []
        for k, (region, carrier) in enumerate(zip(o.regions, o.carriers)):
            bases = [_embed_basis(lat, region, carrier, vectors[o.name, k][:, i]) for i in range(o.num_outcomes)]
            records.append(RecordProjector.from_bases(region, bases, dim=lat.region_dim(region)))
        observables.append(RecordedObservable(o.name, tuple(range(o.num_outcomes)), tuple(records)))
    oracle = BranchDecomposition.from_branches(
        [(o.name, o.num_outcomes) for o in obs_sorted], branches, observables, lat
    )
    return Planted(state, oracle, observables)


def tripartite_counterexample(seed: int = 0) -> Planted:
    """Six qubits in regions A, B, C of two qubits each.

    ``omega_a`` is recorded on A, B and C and ``omega_b`` on A and B, so
    ``omega_a`` pair-covers ``omega_b`` although the two are compatible.
    """
    A, B, C = [0, 1], [2, 3], [4, 5]
    spec = PlantSpec(
        (2,) * 6,
        [
            PlantedObservable("omega_a", [A, B, C], 2, carriers=[[0], [2], [4]]),
            PlantedObservable("omega_b", [A, B], 2, carriers=[[1], [3]]),
        ],
        amplitudes=np.sqrt([[0.1, 0.2], [0.3, 0.4]]),
        seed=seed,
    )
    return planted_state(spec)


# -- random layouts ---------------------------------------------------------


def random_noncovering_spec(seed: int, max_qubits: int = 12, num_observables=(2, 4),
                            num_outcomes=(2, 3), max_attempts: int = 1000) -> PlantSpec:
    """Random qubit layout in which no observable pair-covers another.

    Records carry their outcome on one qubit (two outcomes) or two qubits
    (three outcomes) and may borrow extra sites, producing overlaps between
    records of different observables.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        k = int(rng.integers(num_observables[0], num_observables[1] + 1))
        outcomes = [int(rng.integers(num_outcomes[0], num_outcomes[1] + 1)) for _ in range(k)]
        redundancy = [int(rng.integers(2, 4)) for _ in range(k)]
        width = [1 if n == 2 else 2 for n in outcomes]
        carrier_sites = sum(w * r for w, r in zip(width, redundancy))
        if carrier_sites > max_qubits:
            continue
        n = min(max_qubits, carrier_sites + int(rng.integers(0, 3)))
        sites = list(rng.permutation(n))
        observables = []
        cursor = 0
        for a in range(k):
            carriers = []
            for _ in range(redundancy[a]):
                carriers.append(sorted(int(s) for s in sites[cursor:cursor + width[a]]))
                cursor += width[a]
            observables.append((carriers, [list(c) for c in carriers]))
        for a, (carriers, regions) in enumerate(observables):
            own = {s for c in carriers for s in c}
            for region in regions:
                if rng.random() < 0.4:
                    extra = int(rng.integers(n))
                    taken = {s for r in regions for s in r}
                    if extra not in taken and extra not in own:
                        region.append(extra)
        spec = PlantSpec(
            (2,) * n,
            [PlantedObservable(f"obs{a}", regions, outcomes[a], carriers)
             for a, (carriers, regions) in enumerate(observables)],
            seed=int(rng.integers(2**31)),
        )
        if not any_pair_covering(spec.layout()):
            return spec
    raise DomainError("no non-covering layout found")


def _distinct_representatives(regions: list[list[int]]) -> list[int] | None:
    chosen: list[int] = []

    def place(k: int) -> bool:
        if k == len(regions):
            return True
        for s in regions[k]:
            if s not in chosen:
                chosen.append(s)
                if place(k + 1):
                    return True
                chosen.pop()
        return False

    return list(chosen) if place(0) else None


def random_geometric_spec(seed: int, ell: float = 1.0, num_sites: int = 12,
                          num_observables=(2, 3), box: float = 3.2,
                          max_attempts: int = 2000) -> PlantSpec:
    """Random planar layout where every observable meets the length-scale criterion.

    Each observable has three records, each the set of sites within ``ell/2``
    of a random center; records of different observables may overlap.  Every
    record carries its two-outcome value on a distinct qubit.
    """
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        pts = rng.uniform(0, box, size=(num_sites, 2))
        lat = Lattice.qubits(num_sites, pts)
        k = int(rng.integers(num_observables[0], num_observables[1] + 1))
        layout = []
        for _ in range(k):
            for _ in range(50):
                centers = rng.uniform(0, box, size=(3, 2))
                regions = [
                    [int(s) for s in np.nonzero(np.linalg.norm(pts - c, axis=1) <= ell / 2)[0]]
                    for c in centers
                ]
                if all(regions) and sphere_criterion([Region(r) for r in regions], ell, lat):
                    layout.append(regions)
                    break
            else:
                break
        if len(layout) != k:
            continue
        flat = [r for regions in layout for r in regions]
        reps = _distinct_representatives(flat)
        if reps is None:
            continue
        observables = [
            PlantedObservable(f"obs{a}", regions, 2, [[reps[3 * a + j]] for j in range(3)])
            for a, regions in enumerate(layout)
        ]
        return PlantSpec((2,) * num_sites, observables, seed=int(rng.integers(2**31)),
                         coords=[tuple(p) for p in pts])
    raise DomainError("no geometric layout found")
