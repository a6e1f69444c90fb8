"""Finite-dimensional *-algebras of matrices: generation, commutant, center.

All subspaces are stored as Hilbert-Schmidt orthonormal bases, shape
``(k, n, n)``.  Rank decisions compare singular values against ``tol``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError, RankAmbiguityWarning

DEFAULT_TOL = 1e-8
CLUSTER_GAP = 1e-6
_CHUNK_ROWS = 1 << 14


@dataclass(frozen=True)
class OperatorAlgebra:
    basis: np.ndarray
    ambient_dim: int
    closed_under_adjoint: bool = True

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def contains(self, x, tol: float = DEFAULT_TOL) -> bool:
        x = np.asarray(x).reshape(-1)
        flat = self.basis.reshape(self.dim, -1)
        residual = x - flat.T @ (flat.conj() @ x)
        return np.linalg.norm(residual) <= tol * max(1.0, np.linalg.norm(x))

    def is_abelian(self, tol: float = DEFAULT_TOL) -> bool:
        b = self.basis
        comm = np.einsum("aij,bjk->abik", b, b) - np.einsum("bij,ajk->abik", b, b)
        return bool(np.abs(comm).max(initial=0.0) <= 10 * tol)


def _warn_if_ambiguous(singular_values, tol, what):
    near = singular_values[(singular_values >= tol / 10) & (singular_values <= 10 * tol)]
    if near.size:
        warnings.warn(
            f"{what}: singular values {near} lie within a factor 10 of tol={tol}",
            RankAmbiguityWarning,
            stacklevel=3,
        )


def _extend(q: np.ndarray, cand: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal directions of ``cand`` rows not already in the row span of ``q``."""
    if cand.shape[0] == 0:
        return cand
    for _ in range(2):
        if q.shape[0]:
            cand = cand - (cand @ q.conj().T) @ q
    _, s, vh = np.linalg.svd(cand, full_matrices=False)
    new = vh[s > tol]
    if new.shape[0] and q.shape[0]:
        new = new - (new @ q.conj().T) @ q
        new, _ = np.linalg.qr(new.T)
        new = new.T
    return new


def _check_square(mats) -> np.ndarray:
    mats = [np.asarray(m, dtype=complex) for m in mats]
    if not mats:
        raise DomainError("at least one generator is required")
    n = mats[0].shape[0]
    for m in mats:
        if m.ndim != 2 or m.shape != (n, n):
            raise DomainError(f"generators must be square {n}x{n} matrices, got {m.shape}")
    return np.stack(mats)


def span_basis(mats, tol: float = DEFAULT_TOL) -> np.ndarray:
    """HS-orthonormal basis of the linear span of the given matrices."""
    stack = _check_square(mats)
    n = stack.shape[1]
    flat = stack.reshape(len(stack), -1)
    norms = np.linalg.norm(flat, axis=1)
    flat = flat[norms > tol] / norms[norms > tol, None]
    basis = _extend(np.zeros((0, n * n), dtype=complex), flat, tol)
    return basis.reshape(-1, n, n)


def generate_algebra(generators, tol: float = DEFAULT_TOL) -> OperatorAlgebra:
    """Smallest unital, adjoint-closed algebra containing ``generators``."""
    stack = _check_square(generators)
    n = stack.shape[1]
    gens = span_basis(np.concatenate([stack, stack.conj().transpose(0, 2, 1)]), tol)
    q = (np.eye(n, dtype=complex) / np.sqrt(n)).reshape(1, -1)
    q = np.vstack([q, _extend(q, gens.reshape(len(gens), -1), tol)])
    new = q
    for _ in range(max(n * n, 1)):
        added_all = []
        step = max(1, _CHUNK_ROWS // max(len(gens), 1))
        for start in range(0, new.shape[0], step):
            block = new[start:start + step].reshape(-1, n, n)
            products = np.einsum("gij,kjl->gkil", gens, block).reshape(-1, n * n)
            added = _extend(q, products, tol)
            if added.shape[0]:
                q = np.vstack([q, added])
                added_all.append(added)
        if not added_all:
            return OperatorAlgebra(q.reshape(-1, n, n), n)
        new = np.vstack(added_all)
    raise NumericalError("algebra generation did not reach a fixpoint")


def _nullspace_of_stacked(blocks, ncols: int, tol: float, what: str) -> np.ndarray:
    r = np.zeros((0, ncols), dtype=complex)
    for block in blocks:
        r = np.linalg.qr(np.vstack([r, block]), mode="r")
    _, s, vh = np.linalg.svd(r, full_matrices=True)
    s_full = np.zeros(ncols)
    s_full[: len(s)] = s
    _warn_if_ambiguous(s_full, tol, what)
    return vh[s_full <= tol].conj()


def commutant(alg: OperatorAlgebra, tol: float = DEFAULT_TOL) -> OperatorAlgebra:
    """All matrices commuting with every element of ``alg``."""
    n = alg.ambient_dim
    eye = np.eye(n)

    def blocks():
        rows = []
        for a in alg.basis:
            # row-major vec: vec(AX) = (A ⊗ 1) vec X, vec(XA) = (1 ⊗ Aᵀ) vec X
            rows.append(np.kron(a, eye) - np.kron(eye, a.T))
            if len(rows) * n * n >= _CHUNK_ROWS:
                yield np.vstack(rows)
                rows = []
        if rows:
            yield np.vstack(rows)

    null = _nullspace_of_stacked(blocks(), n * n, tol, "commutant")
    return OperatorAlgebra(null.reshape(-1, n, n), n)


def center(alg: OperatorAlgebra, tol: float = DEFAULT_TOL, comm: OperatorAlgebra | None = None) -> OperatorAlgebra:
    """Intersection of ``alg`` with its commutant."""
    n = alg.ambient_dim
    comm = commutant(alg, tol) if comm is None else comm
    qa = alg.basis.reshape(alg.dim, -1)
    qc = comm.basis.reshape(comm.dim, -1)
    # coefficients d with Σ d_j C_j inside span(alg)
    outside = qc.T - qa.T @ (qa.conj() @ qc.T)
    _, s, vh = np.linalg.svd(outside, full_matrices=True)
    s_full = np.zeros(qc.shape[0])
    s_full[: len(s)] = s
    coeffs = vh[s_full <= tol].conj()
    z = coeffs @ qc
    if z.shape[0]:
        z, _ = np.linalg.qr(z.T)
        z = z.T
    return OperatorAlgebra(z.reshape(-1, n, n), n)


def hermitian_basis(alg: OperatorAlgebra, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Real-orthonormal basis of the Hermitian elements of an adjoint-closed algebra."""
    b = alg.basis
    herm = np.concatenate([(b + b.conj().transpose(0, 2, 1)) / 2, (b - b.conj().transpose(0, 2, 1)) / 2j])
    flat = herm.reshape(len(herm), -1)
    real = np.concatenate([flat.real, flat.imag], axis=1)
    _, s, vh = np.linalg.svd(real, full_matrices=False)
    keep = vh[s > tol]
    half = keep.shape[1] // 2
    mats = (keep[:, :half] + 1j * keep[:, half:]).reshape(-1, alg.ambient_dim, alg.ambient_dim)
    return 0.5 * (mats + mats.conj().transpose(0, 2, 1))


def spectral_clusters(h: np.ndarray, gap: float = CLUSTER_GAP, count: int | None = None) -> list[np.ndarray]:
    """Eigenspace bases of a Hermitian matrix after merging near-equal eigenvalues.

    Eigenvalues closer than ``gap`` times the spectral diameter share a
    cluster.  With ``count`` the spectrum is instead cut at its ``count - 1``
    largest gaps.
    """
    vals, vecs = np.linalg.eigh(0.5 * (h + h.conj().T))
    if count is not None:
        if count <= 1:
            return [vecs]
        cuts = np.sort(np.argsort(np.diff(vals))[-(count - 1):]) + 1
        return [vecs[:, part] for part in np.split(np.arange(len(vals)), cuts)]
    diameter = vals[-1] - vals[0]
    if diameter <= 1e-12 * max(1.0, abs(vals).max()):
        return [vecs]
    cuts = np.nonzero(np.diff(vals) > gap * diameter)[0] + 1
    return [vecs[:, part] for part in np.split(np.arange(len(vals)), cuts)]


def _min_cut_gap(h: np.ndarray, count: int) -> float:
    vals = np.linalg.eigvalsh(0.5 * (h + h.conj().T))
    if count <= 1 or len(vals) < 2:
        return np.inf
    diameter = vals[-1] - vals[0]
    gaps = np.sort(np.diff(vals))[-(count - 1):]
    return float(gaps[0] / diameter) if diameter > 0 else 0.0


def random_hermitian_element(alg: OperatorAlgebra, seed: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Seeded Hermitian element with independent standard normal coefficients."""
    herm = hermitian_basis(alg, tol)
    coeffs = np.random.default_rng(seed).standard_normal(len(herm))
    return np.einsum("k,kij->ij", coeffs, herm)


def central_blocks(alg: OperatorAlgebra, tol: float = DEFAULT_TOL, seed: int = 0,
                   center_alg: OperatorAlgebra | None = None) -> list[np.ndarray]:
    """Orthonormal range bases of the minimal central projections of ``alg``.

    A random Hermitian central element has exactly ``dim(center)`` distinct
    eigenvalues; its spectrum is cut at that many clusters.  A draw whose
    cut gaps are not clearly resolved is retried once with ``seed + 1``.
    """
    center_alg = center(alg, tol) if center_alg is None else center_alg
    k = center_alg.dim
    if k <= 1:
        return [np.eye(alg.ambient_dim, dtype=complex)]
    best = None
    for attempt in range(2):
        h = random_hermitian_element(center_alg, seed + attempt, tol)
        quality = _min_cut_gap(h, k)
        if best is None or quality > best[0]:
            best = (quality, h)
        if quality > CLUSTER_GAP:
            break
    return spectral_clusters(best[1], count=k)


def minimal_central_projections(alg: OperatorAlgebra, tol: float = DEFAULT_TOL, seed: int = 0) -> list[np.ndarray]:
    """Minimal central projections of ``alg`` as dense matrices."""
    return [b @ b.conj().T for b in central_blocks(alg, tol, seed)]
