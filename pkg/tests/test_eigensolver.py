"""Eigensolver and ground-space clustering behaviour."""

import numpy as np
import pytest
import scipy.sparse as sp

from hubbard_phonon.eigensolver import eigensolve, ground_space
from hubbard_phonon.errors import AmbiguousDegeneracyError, ValidationError
from hubbard_phonon.lattice_fermions import (
    HoppingMatrix,
    build_hubbard,
    build_sector_basis,
    build_spin_operators,
)


def _random_sparse_sym(dim, density, seed):
    rng = np.random.default_rng(seed)
    m = sp.random(dim, dim, density=density, random_state=rng, format="csr")
    return (m + m.T) * 0.5


def test_dense_sparse_agree():
    h = _random_sparse_sym(300, 0.05, 11)
    vals, vecs = eigensolve(h, k=4)
    ref = np.linalg.eigvalsh(h.toarray())[:4]
    scale = np.max(np.abs(h.toarray()))
    assert np.max(np.abs(vals - ref)) <= 1e-9 * max(1.0, scale)
    # eigenpairs actually solve the problem
    for j in range(4):
        r = h @ vecs[:, j] - vals[j] * vecs[:, j]
        assert np.linalg.norm(r) < 1e-8


def test_iterative_path_agrees_with_dense():
    # force the ARPACK branch with a dim just above the dense cutoff
    h = _random_sparse_sym(4200, 0.002, 12) + sp.diags(np.linspace(0, 1, 4200))
    vals, _ = eigensolve(h, k=3, tol=1e-12)
    ref = np.linalg.eigvalsh(h.toarray())[:3]
    assert np.max(np.abs(vals - ref)) < 1e-8


def test_eigensolve_deterministic():
    h = _random_sparse_sym(4200, 0.002, 13)
    v1, w1 = eigensolve(h, k=3)
    v2, w2 = eigensolve(h, k=3)
    assert np.array_equal(v1, v2)
    assert np.array_equal(w1, w2)


def test_eigensolve_validation():
    with pytest.raises(ValidationError):
        eigensolve(np.zeros((2, 3)))
    with pytest.raises(ValidationError):
        eigensolve(np.eye(4), k=0)
    with pytest.raises(ValidationError):
        eigensolve(np.array([[0.0, 1.0], [0.5, 0.0]]))  # not Hermitian


def test_ground_space_shift_invariance():
    rng = np.random.default_rng(14)
    a = rng.standard_normal((40, 40))
    h = 0.5 * (a + a.T)
    r0 = ground_space(h)
    r1 = ground_space(h + 3.25 * np.eye(40))
    assert r1.degeneracy == r0.degeneracy
    assert abs((r1.e0 - r0.e0) - 3.25) < 1e-10


def test_ground_space_degenerate_cluster():
    h = np.diag([0.0, 0.0, 0.0, 1.0, 2.0])
    rep = ground_space(h)
    assert rep.degeneracy == 3
    assert rep.gap == 1.0
    # returned basis is orthonormal and spans the eigenspace
    g = rep.vectors
    assert np.allclose(g.T @ g, np.eye(3), atol=1e-12)
    assert np.max(np.abs(h @ g)) < 1e-12


def test_ground_space_grey_zone_raises():
    # a splitting equal to cluster_tol cannot be resolved either way
    h = np.diag([0.0, 1.0e-8, 1.0])
    with pytest.raises(AmbiguousDegeneracyError) as err:
        ground_space(h, cluster_tol=1e-8)
    assert err.value.suggested_tol < 1e-8
    # the suggestion resolves the ambiguity in both directions
    assert ground_space(h, cluster_tol=err.value.suggested_tol).degeneracy == 1
    assert ground_space(h, cluster_tol=1e-6).degeneracy == 2


def test_spin_labels():
    # one electron on one site: spin doublet, s = 1/2
    basis = build_sector_basis(1, 1)
    h = np.asarray(build_hubbard(basis, HoppingMatrix(np.zeros((1, 1))), 1.0))
    *_, s2 = build_spin_operators(basis)
    rep = ground_space(h, s_squared=s2)
    assert rep.degeneracy == 2
    assert rep.s_tot == 0.5


def test_spin_label_mixed():
    basis = build_sector_basis(2, 2)
    *_, s2 = build_spin_operators(basis)
    # zero Hamiltonian: ground space spans singlets and triplets
    rep = ground_space(np.zeros((basis.dim, basis.dim)), s_squared=s2)
    assert rep.degeneracy == basis.dim
    assert rep.s_tot == "mixed"


def test_spectrum_head_recorded():
    h = np.diag(np.arange(12, dtype=float))
    rep = ground_space(h)
    assert rep.spectrum_head[0] == 0.0
    assert len(rep.spectrum_head) == 10
