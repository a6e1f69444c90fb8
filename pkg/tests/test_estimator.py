import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from branchrec import corpus
from branchrec.errors import ConfigError, DomainError
from branchrec.estimator import PAULIS, ObservableProduct, npoint_exact, npoint_sampled
from branchrec.regions import disjoint
from branchrec.statecore import Lattice, random_state

from oracles import kron_single_sites


def planted(seed=7, observables=3):
    spec = corpus.PlantSpec(
        (2,) * (3 * observables + 1),
        [corpus.PlantedObservable(f"obs{a}", [[3 * a], [3 * a + 1], [3 * a + 2]], 2) for a in range(observables)],
        seed=seed,
    )
    return corpus.planted_state(spec)


class TestExact:
    def test_identity(self):
        prod = ObservableProduct([([0], np.eye(2))])
        assert npoint_exact(corpus.ghz_state(3), prod) == pytest.approx(1)

    def test_bell_zz(self):
        assert npoint_exact(corpus.bell_state(), ObservableProduct.paulis([("Z", 0), ("Z", 1)])) == pytest.approx(1)

    def test_ghz_xxx(self):
        prod = ObservableProduct.paulis([("X", 0), ("X", 1), ("X", 2)])
        assert npoint_exact(corpus.ghz_state(3), prod) == pytest.approx(1)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_against_kron_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = 5
        state = random_state(Lattice.qubits(n), seed)
        picks = [(str(rng.choice(list("XYZ"))), int(s)) for s in rng.choice(n, size=3, replace=False)]
        prod = ObservableProduct.paulis(picks)
        ops = {s: PAULIS[p] for p, s in picks}
        ref = np.vdot(state.amplitudes, kron_single_sites(n, ops) @ state.amplitudes)
        assert npoint_exact(state, prod) == pytest.approx(ref, abs=1e-12)

    def test_non_square_factor(self):
        with pytest.raises(DomainError):
            ObservableProduct([([0, 1], np.eye(2))]).apply(corpus.bell_state().amplitudes, Lattice.qubits(2))


class TestSampled:
    def test_exhaustive_equals_exact(self):
        spec = corpus.PlantSpec((2,) * 4, [corpus.PlantedObservable("a", [[0], [1], [2]], 2)], seed=1)
        p = corpus.planted_state(spec)
        prod = ObservableProduct.paulis([("X", 3), ("Z", 0)])
        report = npoint_sampled(p.state, prod, p.observables, 0, 0, exhaustive=True)
        assert report.exact_sum and report.std_error == 0.0
        assert report.estimate == pytest.approx(npoint_exact(p.state, prod), abs=1e-10)

    def test_two_branch_many_samples(self):
        spec = corpus.PlantSpec((2,) * 3, [corpus.PlantedObservable("a", [[0], [1]], 2)], seed=2)
        p = corpus.planted_state(spec)
        prod = ObservableProduct.paulis([("Z", 1), ("X", 2)])
        report = npoint_sampled(p.state, prod, p.observables, 20000, 3)
        assert abs(report.estimate - npoint_exact(p.state, prod)) <= 5 * report.std_error

    def test_eight_branches_five_sigma(self):
        p = planted()
        assert len(p.oracle) == 8
        prod = ObservableProduct.paulis([("Z", 0), ("X", 3)])
        exact = npoint_exact(p.state, prod)
        report = npoint_sampled(p.state, prod, p.observables, 10_000, 0)
        assert abs(report.estimate - exact) <= 5 * report.std_error
        assert report.std_error >= 0

    def test_records_used_are_disjoint(self):
        p = planted()
        prod = ObservableProduct.paulis([("Z", 0), ("Z", 4), ("Y", 9)])
        report = npoint_sampled(p.state, prod, p.observables, 100, 0)
        assert report.records_used["obs0"].sites == (1,)
        assert report.records_used["obs1"].sites == (3,)
        for region in report.records_used.values():
            assert all(disjoint(region, f) for f in prod.regions)

    def test_no_disjoint_record(self):
        p = planted()
        prod = ObservableProduct.paulis([("Z", 0), ("Z", 1), ("Z", 2)])
        with pytest.raises(ConfigError, match="obs0"):
            npoint_sampled(p.state, prod, p.observables, 100, 0)

    def test_incompatible(self):
        state = corpus.bell_state()
        z, x = corpus.bell_observables()
        with pytest.raises(DomainError):
            npoint_sampled(state, ObservableProduct([([0], np.eye(2))]), [z, x], 10, 0)

    def test_deterministic(self):
        p = planted()
        prod = ObservableProduct.paulis([("Y", 9), ("X", 0)])
        a = npoint_sampled(p.state, prod, p.observables, 500, 42)
        b = npoint_sampled(p.state, prod, p.observables, 500, 42)
        assert a.estimate == b.estimate and a.std_error == b.std_error

    def test_unbiased_over_seeds(self):
        p = planted(seed=3)
        prod = ObservableProduct.paulis([("X", 0), ("X", 3), ("Z", 9)])
        exact = npoint_exact(p.state, prod)
        estimates = [npoint_sampled(p.state, prod, p.observables, 2000, s) for s in range(40)]
        mean = np.mean([r.estimate for r in estimates])
        err = np.mean([r.std_error for r in estimates]) / np.sqrt(len(estimates))
        assert abs(mean - exact) <= 5 * err

    def test_report_dict(self):
        p = planted()
        report = npoint_sampled(p.state, ObservableProduct.paulis([("Z", 9)]), p.observables, 50, 1)
        d = report.as_dict()
        assert set(d) >= {"estimate", "std_error", "num_samples", "seed", "records_used"}
        assert len(d["estimate"]) == 2
