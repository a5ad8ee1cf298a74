"""Fermionic sector bases and Hubbard Hamiltonians on small clusters.

Spin orbitals are packed into machine integers: orbital ``p = 2*x + s`` for
site ``x`` and spin ``s`` (0 = up, 1 = down), so a basis state is a bit word
over ``2 * n_sites`` bits.  Operators carry the usual fermionic sign
``(-1)**(number of occupied orbitals below p)``.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from itertools import combinations

from .errors import SizingError, ValidationError

# Dense assembly up to this dimension, CSR above it.
DENSE_MAX = 4096
# Hard cap on sector dimension; beyond this exact diagonalization is hopeless
# on one node anyway.
DIM_CAP = 200_000

__all__ = [
    "HoppingMatrix",
    "SectorBasis",
    "build_sector_basis",
    "apply_c_dagger",
    "apply_c",
    "fock_operator",
    "build_hubbard",
    "number_operators",
    "build_spin_operators",
    "s_max",
]


class HoppingMatrix:
    """Real symmetric hopping amplitudes, diagonal included.

    The matrix is stored mirrored from its upper triangle so symmetry holds
    exactly.  ``connected`` refers to the graph whose edges are the nonzero
    off-diagonal amplitudes.
    """

    def __init__(self, mat):
        a = np.asarray(mat, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError("hopping matrix must be square")
        if a.shape[0] < 1:
            raise ValidationError("hopping matrix must have at least one site")
        asym = np.max(np.abs(a - a.T)) if a.size else 0.0
        scale = np.max(np.abs(a)) if a.size else 0.0
        if asym > 1e-12 * max(1.0, scale):
            raise ValidationError(
                "hopping matrix must be symmetric: max|t - t.T| = %g" % asym
            )
        self.mat = np.triu(a) + np.triu(a, 1).T
        self.n_sites = a.shape[0]

    @classmethod
    def chain(cls, n_sites, t=-1.0, diagonal=0.0):
        """Open chain with nearest-neighbour amplitude ``t``."""
        a = np.zeros((n_sites, n_sites))
        for x in range(n_sites - 1):
            a[x, x + 1] = t
            a[x + 1, x] = t
        a += np.diag(np.full(n_sites, float(diagonal)))
        return cls(a)

    @property
    def connected(self) -> bool:
        n = self.n_sites
        if n == 1:
            return True
        adj = np.abs(self.mat) > 0
        np.fill_diagonal(adj, False)
        seen = {0}
        stack = [0]
        while stack:
            x = stack.pop()
            for y in np.nonzero(adj[x])[0]:
                if y not in seen:
                    seen.add(int(y))
                    stack.append(int(y))
        return len(seen) == n

    def __repr__(self):
        return f"HoppingMatrix(n_sites={self.n_sites})"


class SectorBasis:
    """Occupation basis of the fixed particle-number sector.

    ``states`` lists the bit words in increasing integer order; ``index``
    inverts the listing.
    """

    def __init__(self, n_sites, n_e, states):
        self.n_sites = n_sites
        self.n_e = n_e
        self.states = states
        self.index = {w: i for i, w in enumerate(states)}
        self.dim = len(states)

    def occupations(self):
        """Site occupation table, shape (dim, n_sites), entries in {0,1,2}."""
        occ = np.zeros((self.dim, self.n_sites), dtype=np.int64)
        for i, w in enumerate(self.states):
            for x in range(self.n_sites):
                occ[i, x] = ((w >> (2 * x)) & 1) + ((w >> (2 * x + 1)) & 1)
        return occ

    def __repr__(self):
        return f"SectorBasis(n_sites={self.n_sites}, n_e={self.n_e}, dim={self.dim})"


def build_sector_basis(n_sites: int, n_e: int) -> SectorBasis:
    """Enumerate all ``n_e``-electron words over ``2*n_sites`` spin orbitals."""
    if n_sites < 1:
        raise ValidationError("n_sites must be >= 1")
    if not 0 <= n_e <= 2 * n_sites:
        raise ValidationError(
            f"n_e = {n_e} outside [0, {2 * n_sites}] for n_sites = {n_sites}"
        )
    from math import comb

    dim = comb(2 * n_sites, n_e)
    if dim > DIM_CAP:
        raise SizingError(f"sector dimension {dim} exceeds cap {DIM_CAP}")
    states = sorted(
        sum(1 << p for p in orbs) for orbs in combinations(range(2 * n_sites), n_e)
    )
    return SectorBasis(n_sites, n_e, states)


def _parity_below(word: int, p: int) -> int:
    """(-1)**(occupied orbitals strictly below p)."""
    return -1 if (word & ((1 << p) - 1)).bit_count() & 1 else 1


def apply_c_dagger(word: int, x: int, s: int, n_sites: int):
    """Apply the creation operator for orbital (x, s) to a bit word.

    Returns ``(new_word, sign)`` or ``None`` when the orbital is occupied.
    """
    p = 2 * x + s
    if not 0 <= x < n_sites or s not in (0, 1):
        raise ValidationError(f"orbital ({x},{s}) outside lattice of {n_sites} sites")
    if word >> p & 1:
        return None
    return word | (1 << p), _parity_below(word, p)


def apply_c(word: int, x: int, s: int, n_sites: int):
    """Annihilation counterpart of :func:`apply_c_dagger`."""
    p = 2 * x + s
    if not 0 <= x < n_sites or s not in (0, 1):
        raise ValidationError(f"orbital ({x},{s}) outside lattice of {n_sites} sites")
    if not word >> p & 1:
        return None
    return word & ~(1 << p), _parity_below(word, p)


def fock_operator(n_sites: int, x: int, s: int, dagger: bool = True):
    """Dense creation/annihilation matrix on the full Fock space (dim 4**n).

    Intended for small-lattice algebra checks; refuses n_sites > 4.
    """
    if n_sites > 4:
        raise SizingError("full Fock operators limited to n_sites <= 4")
    dim = 4**n_sites
    m = np.zeros((dim, dim))
    for w in range(dim):
        out = apply_c_dagger(w, x, s, n_sites) if dagger else apply_c(w, x, s, n_sites)
        if out is not None:
            w2, sign = out
            m[w2, w] = sign
    return m


def _assemble(dim, rows, cols, vals):
    if dim <= DENSE_MAX:
        m = np.zeros((dim, dim))
        np.add.at(m, (rows, cols), vals)
        return m
    return sp.csr_matrix(
        (np.asarray(vals), (np.asarray(rows), np.asarray(cols))), shape=(dim, dim)
    )


def build_hubbard(basis: SectorBasis, hopping: HoppingMatrix, u: float):
    """Sector Hamiltonian sum_{xys} t_xy c+_xs c_ys + u sum_x n_x+ n_x-.

    Diagonal hopping amplitudes t_xx enter as site potentials t_xx * n_x.
    Returns a dense array up to dimension 4096 and CSR above.
    """
    if hopping.n_sites != basis.n_sites:
        raise ValidationError(
            f"hopping is {hopping.n_sites}-site but basis has {basis.n_sites} sites"
        )
    t = hopping.mat
    rows, cols, vals = [], [], []
    for i, w in enumerate(basis.states):
        diag = 0.0
        for x in range(basis.n_sites):
            up = w >> (2 * x) & 1
            dn = w >> (2 * x + 1) & 1
            diag += t[x, x] * (up + dn) + u * up * dn
        if diag != 0.0:
            rows.append(i)
            cols.append(i)
            vals.append(diag)
        for x in range(basis.n_sites):
            for y in range(basis.n_sites):
                if x == y or t[x, y] == 0.0:
                    continue
                for s in (0, 1):
                    hop = apply_c(w, y, s, basis.n_sites)
                    if hop is None:
                        continue
                    w1, sgn1 = hop
                    created = apply_c_dagger(w1, x, s, basis.n_sites)
                    if created is None:
                        continue
                    w2, sgn2 = created
                    rows.append(basis.index[w2])
                    cols.append(i)
                    vals.append(t[x, y] * sgn1 * sgn2)
    return _assemble(basis.dim, rows, cols, vals)


def number_operators(basis: SectorBasis):
    """Diagonals of the site-occupation and double-occupancy operators.

    Returns ``(occ, docc)`` with ``occ[x]`` the diagonal of n_x (shape
    (n_sites, dim)) and ``docc`` the diagonal of sum_x n_x+ n_x-.  All four
    operators are diagonal in the occupation basis, so the diagonals carry
    the full matrices.
    """
    occ = np.zeros((basis.n_sites, basis.dim))
    docc = np.zeros(basis.dim)
    for i, w in enumerate(basis.states):
        for x in range(basis.n_sites):
            up = w >> (2 * x) & 1
            dn = w >> (2 * x + 1) & 1
            occ[x, i] = up + dn
            docc[i] += up * dn
    return occ, docc


def build_spin_operators(basis: SectorBasis):
    """Total-spin components and S^2 on the sector.

    Returns ``(sx, sy, sz, s_squared)``.  S^2 is assembled in ladder form
    S- S+ + Sz^2 + Sz, which keeps it real; sy is the only complex matrix.
    """
    dim = basis.dim
    rows, cols, vals = [], [], []
    sz_diag = np.zeros(dim)
    for i, w in enumerate(basis.states):
        m = 0.0
        for x in range(basis.n_sites):
            m += 0.5 * ((w >> (2 * x) & 1) - (w >> (2 * x + 1) & 1))
        sz_diag[i] = m
        # S+ = sum_x c+_{x,up} c_{x,down}
        for x in range(basis.n_sites):
            lowered = apply_c(w, x, 1, basis.n_sites)
            if lowered is None:
                continue
            w1, sgn1 = lowered
            raised = apply_c_dagger(w1, x, 0, basis.n_sites)
            if raised is None:
                continue
            w2, sgn2 = raised
            rows.append(basis.index[w2])
            cols.append(i)
            vals.append(float(sgn1 * sgn2))
    splus = _assemble(dim, rows, cols, vals)
    if sp.issparse(splus):
        sminus = splus.T.tocsr()
        sz = sp.diags(sz_diag).tocsr()
        s_squared = (sminus @ splus + sp.diags(sz_diag**2 + sz_diag)).tocsr()
        sx = 0.5 * (splus + sminus)
        sy = -0.5j * (splus - sminus)
    else:
        sminus = splus.T
        sz = np.diag(sz_diag)
        s_squared = sminus @ splus + np.diag(sz_diag**2 + sz_diag)
        sx = 0.5 * (splus + sminus)
        sy = -0.5j * (splus - sminus)
    return sx, sy, sz, s_squared


def s_max(n_e: int, n_sites: int) -> float:
    """Largest total spin reachable with n_e electrons on n_sites sites."""
    if not 0 <= n_e <= 2 * n_sites:
        raise ValidationError(f"n_e = {n_e} outside [0, {2 * n_sites}]")
    return min(n_e, 2 * n_sites - n_e) / 2.0
