"""N-point functions, exactly and by sampling joint branches."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .branches import _branch_tree, _sorted, joint_decomposition
from .errors import ConfigError, DomainError
from .records import DEFAULT_TOL, RecordedObservable
from .regions import Region, as_region, disjoint
from .statecore import PureState, apply_region_operator

PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class ObservableProduct:
    """Ordered product ``O_1 ⋯ O_N`` of local operators."""

    factors: tuple[tuple[Region, np.ndarray], ...]

    def __init__(self, factors):
        factors = tuple((as_region(r), np.asarray(m, dtype=complex)) for r, m in factors)
        for region, m in factors:
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise DomainError(f"factor on {region} is not square")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def paulis(cls, spec: Sequence[tuple[str, int]]) -> "ObservableProduct":
        """From ``[("Z", 0), ("X", 3), …]``."""
        try:
            return cls([([site], PAULIS[name.upper()]) for name, site in spec])
        except KeyError as exc:
            raise ConfigError(f"unknown Pauli {exc.args[0]!r}") from None

    @property
    def regions(self) -> list[Region]:
        return [r for r, _ in self.factors]

    def apply(self, vector: np.ndarray, lattice) -> np.ndarray:
        for region, m in reversed(self.factors):
            vector = apply_region_operator(vector, region, m, lattice=lattice)
        return vector


def npoint_exact(state: PureState, prod: ObservableProduct) -> complex:
    """``⟨ψ| O_1 ⋯ O_N |ψ⟩`` by dense evaluation."""
    return complex(np.vdot(state.amplitudes, prod.apply(state.amplitudes, state.lattice)))


@dataclass
class SampleReport:
    estimate: complex
    std_error: float
    num_samples: int
    seed: int
    records_used: dict[str, Region] = field(default_factory=dict)
    exact_sum: bool = False

    def as_dict(self) -> dict:
        return {
            "estimate": [self.estimate.real, self.estimate.imag],
            "std_error": self.std_error,
            "num_samples": self.num_samples,
            "seed": self.seed,
            "exact_sum": self.exact_sum,
            "records_used": {k: list(v.sites) for k, v in self.records_used.items()},
        }


def choose_records(obs_set: Sequence[RecordedObservable], prod: ObservableProduct) -> dict[str, int]:
    """First record of each observable disjoint from every factor region."""
    chosen = {}
    for obs in obs_set:
        pick = next(
            (k for k, region in enumerate(obs.regions)
             if all(disjoint(region, f) for f in prod.regions)),
            None,
        )
        if pick is None:
            raise ConfigError(f"observable {obs.name!r} has no record disjoint from the product")
        chosen[obs.name] = pick
    return chosen


def branch_values(state: PureState, prod: ObservableProduct, obs_set, chosen: dict[str, int]):
    """Weights and normalized per-branch expectations through the chosen records."""
    obs = _sorted(obs_set)
    reps = [chosen[o.name] for o in obs]
    tree = _branch_tree(state, obs, reps)
    keys = sorted(tree)
    weights = np.array([np.vdot(tree[k], tree[k]).real for k in keys])
    values = np.array([
        np.vdot(tree[k], prod.apply(tree[k], state.lattice)) / w for k, w in zip(keys, weights)
    ])
    return keys, weights, values


def npoint_sampled(state: PureState, prod: ObservableProduct, obs_set: Sequence[RecordedObservable],
                   num_samples: int, seed: int, tol: float = DEFAULT_TOL, exhaustive: bool = False) -> SampleReport:
    """Estimate an N-point function by sampling joint branches.

    Branches are drawn with replacement with probability equal to their
    weight; each contributes its normalized expectation value.  With
    ``exhaustive`` the weighted sum over all branches is returned instead.
    """
    if num_samples < 1 and not exhaustive:
        raise ConfigError("num_samples must be positive")
    chosen = choose_records(obs_set, prod)
    _, verdict = joint_decomposition(state, obs_set, tol)
    if not verdict.compatible:
        raise DomainError(f"observables are not compatible (failed checks {verdict.failed})")
    _, weights, values = branch_values(state, prod, obs_set, chosen)
    total = weights.sum()
    used = {o.name: o.regions[chosen[o.name]] for o in obs_set}
    if exhaustive:
        return SampleReport(complex(weights @ values), 0.0, len(weights), seed, used, exact_sum=True)
    rng = np.random.default_rng(seed)
    draws = values[rng.choice(len(weights), size=num_samples, p=weights / total)] * total
    if num_samples > 1:
        var = draws.real.var(ddof=1) + draws.imag.var(ddof=1)
        err = float(np.sqrt(var / num_samples))
    else:
        err = float("inf")
    return SampleReport(complex(draws.mean()), err, num_samples, seed, used)
