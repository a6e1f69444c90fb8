"""Dense state vectors on a qudit lattice and the primitives built on them.

Amplitudes use mixed-radix little-endian indexing: site 0 is the fastest
varying digit.  Region-local indices follow the same convention over the
region's sorted sites.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ResourceError
from .regions import Region, as_region

MEMORY_BUDGET_ENV = "BRANCHREC_MEMORY_BUDGET"
DEFAULT_MEMORY_BUDGET = 2 * 1024**3
NORM_TOL = 1e-12
_COMPLEX_BYTES = 16


def memory_budget() -> int:
    """Byte budget for dense objects, overridable through the environment."""
    value = os.environ.get(MEMORY_BUDGET_ENV)
    if value is None:
        return DEFAULT_MEMORY_BUDGET
    try:
        return int(float(value))
    except ValueError:
        raise ResourceError(f"{MEMORY_BUDGET_ENV}={value!r} is not a byte count") from None


def check_budget(num_entries: int, what: str) -> None:
    if num_entries * _COMPLEX_BYTES > memory_budget():
        raise ResourceError(
            f"{what} needs {num_entries * _COMPLEX_BYTES} bytes, over the "
            f"{memory_budget()} byte budget"
        )


@dataclass(frozen=True)
class Lattice:
    """Sites with their local dimensions and optional spatial coordinates."""

    local_dims: tuple[int, ...]
    coords: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.local_dims)
        if not dims:
            raise DomainError("a lattice needs at least one site")
        if any(d < 2 for d in dims):
            raise DomainError(f"local dimensions must be >= 2, got {dims}")
        object.__setattr__(self, "local_dims", dims)
        if self.coords is not None:
            coords = tuple(tuple(float(x) for x in np.atleast_1d(c)) for c in self.coords)
            if len(coords) != len(dims):
                raise DomainError("coords must have one entry per site")
            if len({len(c) for c in coords}) != 1:
                raise DomainError("all coordinates must share one dimension")
            object.__setattr__(self, "coords", coords)
        check_budget(self.dim, "lattice state vector")

    @classmethod
    def qubits(cls, n: int, coords=None) -> "Lattice":
        return cls((2,) * n, coords)

    @property
    def num_sites(self) -> int:
        return len(self.local_dims)

    @property
    def dim(self) -> int:
        return math.prod(self.local_dims)

    @property
    def coord_array(self) -> np.ndarray | None:
        return None if self.coords is None else np.array(self.coords, dtype=float)

    def region_dim(self, region) -> int:
        return math.prod(self.local_dims[s] for s in as_region(region).sites)

    def validate(self, region) -> Region:
        region = as_region(region)
        bad = [s for s in region.sites if s >= self.num_sites]
        if bad:
            raise DomainError(f"sites {bad} outside a lattice of {self.num_sites} sites")
        return region

    def complement(self, region) -> Region:
        region = self.validate(region)
        return Region(s for s in range(self.num_sites) if s not in region.sites)


class PureState:
    """A normalized state vector bound to its lattice.  Immutable."""

    __slots__ = ("_amplitudes", "lattice")

    def __init__(self, amplitudes, lattice: Lattice, *, normalize: bool = True):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        if amps.size != lattice.dim:
            raise DomainError(f"{amps.size} amplitudes for a lattice of dimension {lattice.dim}")
        norm = np.linalg.norm(amps)
        if normalize:
            if norm == 0:
                raise DomainError("cannot normalize the zero vector")
            amps = amps / norm
        elif abs(norm - 1) > NORM_TOL:
            raise DomainError(f"state norm {norm} differs from 1")
        amps.flags.writeable = False
        self._amplitudes = amps
        self.lattice = lattice

    @property
    def amplitudes(self) -> np.ndarray:
        return self._amplitudes

    @property
    def num_sites(self) -> int:
        return self.lattice.num_sites

    def __repr__(self) -> str:
        return f"PureState(dims={list(self.lattice.local_dims)})"


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    region: Region


def _axes_for(groups: Sequence[Sequence[int]], n: int) -> list[int]:
    # transposed C-order axis j of the reshaped vector is site n-1-j
    axes = []
    for group in groups:
        axes.extend(n - 1 - s for s in reversed(list(group)))
    return axes


def group_sites(vector: np.ndarray, dims: Sequence[int], groups: Sequence[Sequence[int]]) -> np.ndarray:
    """Reshape a full vector into an array with one little-endian axis per site group.

    The groups must partition the sites.
    """
    n = len(dims)
    tensor = np.asarray(vector).reshape(tuple(dims[::-1]))
    tensor = tensor.transpose(_axes_for(groups, n))
    return tensor.reshape([math.prod(dims[s] for s in g) for g in groups])


def ungroup_sites(array: np.ndarray, dims: Sequence[int], groups: Sequence[Sequence[int]]) -> np.ndarray:
    """Inverse of :func:`group_sites`, returning the flat vector."""
    n = len(dims)
    axes = _axes_for(groups, n)
    shape = [dims[n - 1 - a] for a in axes]
    tensor = np.asarray(array).reshape(shape)
    return tensor.transpose(np.argsort(axes)).reshape(-1)


def _vector_and_lattice(state, lattice):
    if isinstance(state, PureState):
        return state.amplitudes, state.lattice
    if lattice is None:
        raise DomainError("a raw vector needs its lattice")
    return np.asarray(state, dtype=complex).reshape(-1), lattice


def _split(vector, lattice: Lattice, region: Region) -> tuple[np.ndarray, Region]:
    rest = lattice.complement(region)
    return group_sites(vector, lattice.local_dims, [region.sites, rest.sites]), rest


def apply_region_operator(state, region, op, *, lattice: Lattice | None = None) -> np.ndarray:
    """Return ``(op ⊗ 1)`` applied to the state, ``op`` acting on ``region``.

    ``state`` may be a :class:`PureState` or a raw (possibly unnormalized)
    vector together with ``lattice``.  The result is an unnormalized vector.
    """
    vector, lattice = _vector_and_lattice(state, lattice)
    region = lattice.validate(region)
    op = np.asarray(op)
    d = lattice.region_dim(region)
    if op.shape != (d, d):
        raise DomainError(f"operator shape {op.shape} does not match region dimension {d}")
    if not region.sites:
        return op[0, 0] * vector
    matrix, rest = _split(vector, lattice, region)
    return ungroup_sites(op @ matrix, lattice.local_dims, [region.sites, rest.sites])


def apply_projector(vector, lattice: Lattice, region: Region, basis: np.ndarray) -> np.ndarray:
    """Apply the projector onto the column span of the orthonormal ``basis``."""
    if basis.shape[1] == 0:
        return np.zeros_like(vector)
    matrix, rest = _split(vector, lattice, region)
    projected = basis @ (basis.conj().T @ matrix)
    return ungroup_sites(projected, lattice.local_dims, [region.sites, rest.sites])


def reduced_density_matrix(state, region, *, lattice: Lattice | None = None) -> DensityMatrix:
    """Partial trace of ``|ψ⟩⟨ψ|`` over the complement of ``region``."""
    vector, lattice = _vector_and_lattice(state, lattice)
    region = lattice.validate(region)
    if not region.sites:
        raise DomainError("reduced state of an empty region")
    d = lattice.region_dim(region)
    check_budget(d * d, "reduced density matrix")
    matrix, _ = _split(vector, lattice, region)
    rho = matrix @ matrix.conj().T
    return DensityMatrix(0.5 * (rho + rho.conj().T), region)


def schmidt(state, region, *, lattice: Lattice | None = None):
    """Schmidt decomposition across ``region`` and its complement.

    Returns ``(s, U, W)`` with singular values ``s`` in descending order and
    orthonormal columns ``U`` (region) and ``W`` (complement) such that
    ``ψ = Σ_k s_k U[:, k] ⊗ W[:, k]`` in the grouped index order.
    """
    vector, lattice = _vector_and_lattice(state, lattice)
    region = lattice.validate(region)
    if not 0 < len(region) < lattice.num_sites:
        raise DomainError("Schmidt decomposition needs a proper nonempty region")
    matrix, _ = _split(vector, lattice, region)
    u, s, vh = np.linalg.svd(matrix, full_matrices=False)
    return s, u, vh.T


def schmidt_reconstruct(s, u, w, lattice: Lattice, region) -> np.ndarray:
    region = lattice.validate(region)
    rest = lattice.complement(region)
    return ungroup_sites((u * s) @ w.T, lattice.local_dims, [region.sites, rest.sites])


def expectation(state, region, op, *, lattice: Lattice | None = None) -> complex:
    vector, lattice = _vector_and_lattice(state, lattice)
    return complex(np.vdot(vector, apply_region_operator(vector, region, op, lattice=lattice)))


def product_vector(lattice: Lattice, parts: Sequence[tuple[Sequence[int], np.ndarray]]) -> np.ndarray:
    """Tensor product of local vectors on groups of sites that partition the lattice."""
    groups = [list(g) for g, _ in parts]
    covered = sorted(s for g in groups for s in g)
    if covered != list(range(lattice.num_sites)):
        raise DomainError("product_vector parts must partition the lattice")
    tensor = np.ones((), dtype=complex)
    for _, vec in parts:
        tensor = np.multiply.outer(tensor, np.asarray(vec, dtype=complex))
    return ungroup_sites(tensor, lattice.local_dims, groups)


def random_state(lattice: Lattice, seed) -> PureState:
    """Haar-random pure state from complex Gaussian amplitudes."""
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(lattice.dim) + 1j * rng.standard_normal(lattice.dim)
    return PureState(amps, lattice)


def dense_operator(lattice: Lattice, region, op) -> np.ndarray:
    """Full ``dim × dim`` matrix of ``op ⊗ 1`` built by explicit index matching.

    Slow reference used to cross-check :func:`apply_region_operator`.
    """
    region = lattice.validate(region)
    dims = lattice.local_dims
    dim = lattice.dim
    check_budget(dim * dim, "dense operator")
    digits = np.array(np.unravel_index(np.arange(dim), dims[::-1]))[::-1].T
    inside = list(region.sites)
    outside = [s for s in range(len(dims)) if s not in region.sites]

    def local_index(rows, sites):
        idx = np.zeros(len(rows), dtype=int)
        stride = 1
        for s in sites:
            idx += rows[:, s] * stride
            stride *= dims[s]
        return idx

    loc = local_index(digits, inside)
    env = local_index(digits, outside)
    same_env = env[:, None] == env[None, :]
    full = np.asarray(op)[loc[:, None], loc[None, :]]
    return np.where(same_env, full, 0)
