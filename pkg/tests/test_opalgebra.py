import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from branchrec.errors import DomainError
from branchrec.opalgebra import (
    center, commutant, generate_algebra, minimal_central_projections, spectral_clusters,
)

SQ2 = 1 / np.sqrt(2)


def block_algebra_element(rng, blocks, u):
    """Random element of U (⊕ M_n ⊗ 1_m) U† for blocks [(n, m), ...]."""
    parts = []
    for n, m in blocks:
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        parts.append(np.kron(a, np.eye(m)))
    dim = sum(p.shape[0] for p in parts)
    full = np.zeros((dim, dim), dtype=complex)
    k = 0
    for p in parts:
        full[k:k + len(p), k:k + len(p)] = p
        k += len(p)
    return u @ full @ u.conj().T


block_shapes = st.lists(st.tuples(st.integers(1, 3), st.integers(1, 2)), min_size=1, max_size=3).filter(
    lambda b: sum(n * m for n, m in b) <= 16)


def span_equal(a, b, tol=1e-7):
    return a.dim == b.dim and all(a.contains(x, tol) for x in b.basis)


class TestGenerate:
    def test_identity(self):
        assert generate_algebra([np.eye(3)]).dim == 1

    def test_diagonal(self):
        assert generate_algebra([np.diag([1, 0]), np.diag([0, 1])]).dim == 2

    def test_bell_schmidt_matrix(self):
        m = np.eye(2) / np.sqrt(2)
        assert generate_algebra([m @ m.conj().T]).dim == 1

    def test_non_square_rejected(self):
        with pytest.raises(DomainError):
            generate_algebra([np.ones((2, 3))])
        with pytest.raises(DomainError):
            generate_algebra([np.eye(2), np.eye(3)])

    def test_basis_orthonormal_and_closed(self):
        rng = np.random.default_rng(1)
        u = unitary_group.rvs(5, random_state=2)
        alg = generate_algebra([block_algebra_element(rng, [(2, 1), (3, 1)], u) for _ in range(2)])
        assert alg.dim == 13
        flat = alg.basis.reshape(alg.dim, -1)
        np.testing.assert_allclose(flat.conj() @ flat.T, np.eye(alg.dim), atol=1e-10)
        for a in alg.basis[:5]:
            assert alg.contains(a.conj().T)
            for b in alg.basis[:5]:
                assert alg.contains(a @ b, 1e-8)


class TestCommutant:
    def test_scalars(self):
        assert commutant(generate_algebra([np.eye(3)])).dim == 9

    def test_full_algebra(self):
        rng = np.random.default_rng(0)
        gens = [rng.standard_normal((3, 3)) for _ in range(2)]
        full = generate_algebra(gens)
        assert full.dim == 9
        assert commutant(full).dim == 1

    def test_diagonal_self_commutant(self):
        diag = generate_algebra([np.diag([1.0, 2.0])])
        comm = commutant(diag)
        assert comm.dim == 2 and span_equal(comm, diag)

    @settings(max_examples=30, deadline=None)
    @given(block_shapes, st.integers(0, 2**32 - 1))
    def test_bicommutant(self, blocks, seed):
        rng = np.random.default_rng(seed)
        dim = sum(n * m for n, m in blocks)
        u = unitary_group.rvs(dim, random_state=seed % 2**31) if dim > 1 else np.eye(1)
        alg = generate_algebra([block_algebra_element(rng, blocks, u) for _ in range(2)])
        assert alg.dim == sum(n * n for n, _ in blocks)
        comm = commutant(alg)
        assert comm.dim == sum(m * m for _, m in blocks)
        assert span_equal(commutant(comm), alg)


class TestCentralProjections:
    def test_full_algebra(self):
        rng = np.random.default_rng(3)
        full = generate_algebra([rng.standard_normal((3, 3))])
        projs = minimal_central_projections(full)
        assert len(projs) == 1
        np.testing.assert_allclose(projs[0], np.eye(3), atol=1e-10)

    def test_diagonal(self):
        projs = minimal_central_projections(generate_algebra([np.diag([1.0, 2.0])]))
        assert sorted(np.round(np.diag(p).real, 10).tolist() for p in projs) == [[0, 1], [1, 0]]

    def test_shor_row_support(self):
        plus = np.zeros(8)
        plus[[0, 7]] = SQ2
        minus = np.zeros(8)
        minus[[0, 7]] = [SQ2, -SQ2]
        support = np.eye(8)[:, [0, 7]]
        p_plus = support.T @ np.outer(plus, plus) @ support
        p_minus = support.T @ np.outer(minus, minus) @ support
        alg = generate_algebra([p_plus, p_minus])
        projs = minimal_central_projections(alg, seed=5)
        assert len(projs) == 2
        found = sorted(projs, key=lambda p: -p[0, 1].real)
        np.testing.assert_allclose(found[0], p_plus, atol=1e-10)
        np.testing.assert_allclose(found[1], p_minus, atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(block_shapes, st.integers(0, 2**32 - 1))
    def test_projection_properties(self, blocks, seed):
        rng = np.random.default_rng(seed)
        dim = sum(n * m for n, m in blocks)
        u = unitary_group.rvs(dim, random_state=seed % 2**31) if dim > 1 else np.eye(1)
        alg = generate_algebra([block_algebra_element(rng, blocks, u) for _ in range(2)])
        tol = 1e-8
        projs = minimal_central_projections(alg, tol, seed)
        assert len(projs) == len(blocks) == center(alg).dim
        np.testing.assert_allclose(sum(projs), np.eye(dim), atol=1e-10)
        for i, p in enumerate(projs):
            for j, q in enumerate(projs):
                np.testing.assert_allclose(p @ q, p if i == j else 0 * p, atol=1e-10)
            for a in alg.basis:
                assert np.linalg.norm(p @ a - a @ p) <= 10 * tol
        again = minimal_central_projections(alg, tol, seed)
        assert all(np.array_equal(p, q) for p, q in zip(projs, again))


def test_spectral_clusters_merge_near_degenerate():
    h = np.diag([0.0, 1e-9, 1.0, 2.0])
    sizes = [c.shape[1] for c in spectral_clusters(h)]
    assert sizes == [2, 1, 1]
    assert [c.shape[1] for c in spectral_clusters(np.eye(3))] == [3]


def test_near_tolerance_rank_warns():
    from branchrec.errors import RankAmbiguityWarning
    from branchrec.opalgebra import OperatorAlgebra
    h = np.diag([1.0, 1.0 + 3e-8])
    alg = OperatorAlgebra((h / np.linalg.norm(h)).reshape(1, 2, 2), 2)
    with pytest.warns(RankAmbiguityWarning):
        commutant(alg, tol=1e-8)
