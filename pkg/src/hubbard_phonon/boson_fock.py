"""Truncated bosonic Fock spaces, fields, Weyl operators, coherent states.

Modes are ordered; the occupation lattice is flattened in row-major order so
mode 0 is the slowest index.  Annihilation is antilinear in its argument:
``a(f) = sum_j conj(f_j) a_j``.  The field is ``phi(f) = (a(f) + a(f)^*) /
sqrt(2)`` and the Weyl operator ``W(f) = exp(i phi(f))``, which factorizes
over modes as a product of displacements ``D(i f_j / sqrt(2))``.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .errors import SizingError, TruncationWarning, ValidationError

FOCK_DIM_CAP = 2_000_000
WEYL_DENSE_MAX = 4096

__all__ = [
    "ModeSet",
    "TruncatedFock",
    "ladder",
    "annihilator",
    "field",
    "d_gamma",
    "weyl",
    "apply_weyl",
    "displacement_1mode",
    "coherent_amplitudes_1mode",
    "apply_displacement",
    "coherent_state",
    "coherent_weyl_overlap",
    "relative_bound_check",
]


class ModeSet:
    """Finite family of boson modes with positive frequencies.

    ``site_of_mode`` optionally tags each mode with the lattice site whose
    coupling channel owns it; disjoint channels make cross-site coupling
    overlaps vanish identically.
    """

    def __init__(self, freqs, site_of_mode=None):
        w = np.asarray(freqs, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValidationError("freqs must be a non-empty 1-d array")
        if np.any(w <= 0):
            raise ValidationError("mode frequencies must be strictly positive")
        self.freqs = w
        self.m = w.size
        if site_of_mode is not None:
            site_of_mode = np.asarray(site_of_mode, dtype=int)
            if site_of_mode.shape != (self.m,):
                raise ValidationError("site_of_mode must have one entry per mode")
        self.site_of_mode = site_of_mode

    def __repr__(self):
        return f"ModeSet(m={self.m})"


class TruncatedFock:
    """Occupation-number truncation of the boson Fock space.

    Every mode keeps levels 0..n_max.  Operators that raise occupation are
    exact on vectors supported strictly below the truncation edge.
    """

    def __init__(self, modes: ModeSet, n_max: int):
        if n_max < 1:
            raise ValidationError("n_max must be >= 1")
        self.modes = modes
        self.n_max = int(n_max)
        dim = (self.n_max + 1) ** modes.m
        if dim > FOCK_DIM_CAP:
            raise SizingError(
                f"Fock dimension {dim} exceeds cap {FOCK_DIM_CAP}"
            )
        self.dim = dim
        self.shape = (self.n_max + 1,) * modes.m
        self._occ = None

    def occupations(self):
        """Occupation table, shape (dim, m)."""
        if self._occ is None:
            idx = np.unravel_index(np.arange(self.dim), self.shape)
            self._occ = np.stack(idx, axis=1).astype(np.int32)
        return self._occ

    def a1(self):
        """Single-mode annihilator, dense (n_max+1) x (n_max+1)."""
        return np.diag(np.sqrt(np.arange(1.0, self.n_max + 1)), 1)

    def interior_mask(self, headroom: int = 1):
        """States whose every mode occupation is <= n_max - headroom."""
        return np.all(self.occupations() <= self.n_max - headroom, axis=1)

    def hb_diag(self):
        return self.occupations() @ self.modes.freqs

    def nb_diag(self):
        return self.occupations().sum(axis=1).astype(float)

    def random_interior(self, rng, headroom: int = 1, complex_=True):
        v = rng.standard_normal(self.dim)
        if complex_:
            v = v + 1j * rng.standard_normal(self.dim)
        v = v * self.interior_mask(headroom)
        return v / np.linalg.norm(v)

    def __repr__(self):
        return f"TruncatedFock(m={self.modes.m}, n_max={self.n_max}, dim={self.dim})"


def _mode_kron(space: TruncatedFock, j: int, op1) -> sp.csr_matrix:
    n1 = space.n_max + 1
    left = sp.identity(n1**j, format="csr")
    right = sp.identity(n1 ** (space.modes.m - 1 - j), format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(op1)), right).tocsr()


def ladder(space: TruncatedFock, j: int):
    """Sparse (a_j, a_j^dagger) on the full truncated space."""
    if not 0 <= j < space.modes.m:
        raise ValidationError(f"mode index {j} out of range")
    a = _mode_kron(space, j, space.a1())
    return a, a.T.tocsr()


def annihilator(space: TruncatedFock, f) -> sp.csr_matrix:
    """a(f) = sum_j conj(f_j) a_j (antilinear in f)."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (space.modes.m,):
        raise ValidationError("f must assign one amplitude per mode")
    out = None
    for j in range(space.modes.m):
        if f[j] == 0:
            continue
        a, _ = ladder(space, j)
        term = np.conj(f[j]) * a
        out = term if out is None else out + term
    if out is None:
        out = sp.csr_matrix((space.dim, space.dim))
    return out.tocsr()


def field(space: TruncatedFock, f) -> sp.csr_matrix:
    """Hermitian field phi(f) = (a(f) + a(f)^*) / sqrt(2)."""
    a = annihilator(space, f)
    return ((a + a.conj().T) / np.sqrt(2.0)).tocsr()


def d_gamma(space: TruncatedFock):
    """Energy and number operators (H_b, N_b) as sparse diagonals."""
    return (
        sp.diags(space.hb_diag()).tocsr(),
        sp.diags(space.nb_diag()).tocsr(),
    )


def displacement_1mode(z: complex, n_max: int) -> np.ndarray:
    """Dense single-mode displacement exp(z a^dagger - conj(z) a)."""
    a = np.diag(np.sqrt(np.arange(1.0, n_max + 1)), 1)
    return expm(z * a.conj().T - np.conj(z) * a)


def coherent_amplitudes_1mode(z: complex, n_max: int) -> np.ndarray:
    """Amplitudes z^n / sqrt(n!) * exp(-|z|^2/2), levels 0..n_max."""
    c = np.zeros(n_max + 1, dtype=complex)
    c[0] = np.exp(-0.5 * abs(z) ** 2)
    for n in range(1, n_max + 1):
        c[n] = c[n - 1] * z / np.sqrt(n)
    return c


def _poisson_tail(mean: float, n_max: int) -> float:
    """Probability mass of Poisson(mean) beyond n_max."""
    if mean == 0.0:
        return 0.0
    terms = np.empty(n_max + 1)
    terms[0] = np.exp(-mean)
    for n in range(1, n_max + 1):
        terms[n] = terms[n - 1] * mean / n
    return max(0.0, 1.0 - float(terms.sum()))


def apply_displacement(space: TruncatedFock, z, vec, out_of=None):
    """Apply the product displacement prod_j D(z_j) without materializing it.

    Per mode this is one dense (n_max+1)^2 contraction over the mode axis.
    """
    z = np.asarray(z, dtype=complex)
    if z.shape != (space.modes.m,):
        raise ValidationError("z must assign one displacement per mode")
    t = np.asarray(vec, dtype=complex).reshape(space.shape)
    for j in range(space.modes.m):
        if z[j] == 0:
            continue
        d = displacement_1mode(z[j], space.n_max)
        t = np.moveaxis(np.tensordot(d, t, axes=([1], [j])), 0, j)
    return t.reshape(space.dim)


def weyl(space: TruncatedFock, f, tail_bound: float = 1e-8):
    """Unitary W(f) = exp(i phi(f)) as a dense matrix.

    Refuses dimensions above 4096 (use :func:`apply_weyl` there).  When the
    displaced-vacuum tail mass beyond the truncation exceeds ``tail_bound``
    a :class:`TruncationWarning` reports the estimate; the matrix is still
    returned since unitarity of the per-mode factors is exact.
    """
    if space.dim > WEYL_DENSE_MAX:
        raise SizingError(
            f"dense Weyl matrix at dim {space.dim} > {WEYL_DENSE_MAX}; "
            "use apply_weyl"
        )
    f = np.asarray(f, dtype=complex)
    if f.shape != (space.modes.m,):
        raise ValidationError("f must assign one amplitude per mode")
    _warn_weyl_tail(space, f, tail_bound)
    u = 1j * f / np.sqrt(2.0)
    out = np.ones((1, 1), dtype=complex)
    for j in range(space.modes.m):
        out = np.kron(out, displacement_1mode(u[j], space.n_max))
    return out


def _warn_weyl_tail(space, f, tail_bound):
    tail = 0.0
    for j in range(space.modes.m):
        tail += _poisson_tail(abs(f[j]) ** 2 / 2.0, space.n_max)
    if tail > tail_bound:
        warnings.warn(
            f"Weyl displacement tail mass {tail:.3e} exceeds bound "
            f"{tail_bound:.1e} at n_max = {space.n_max}",
            TruncationWarning,
            stacklevel=3,
        )
    return tail


def apply_weyl(space: TruncatedFock, f, vec, tail_bound: float = 1e-8):
    """Matrix-free W(f) @ vec via per-mode displacements."""
    f = np.asarray(f, dtype=complex)
    if f.shape != (space.modes.m,):
        raise ValidationError("f must assign one amplitude per mode")
    _warn_weyl_tail(space, f, tail_bound)
    return apply_displacement(space, 1j * f / np.sqrt(2.0), vec)


def coherent_state(space: TruncatedFock, z, tail_bound: float = 1e-8):
    """Normalized truncated coherent state and its lost tail mass.

    Returns ``(vec, truncation_error)`` where the error is 1 minus the
    squared norm of the raw truncated amplitudes.  The vector itself is
    renormalized.  A tail above ``tail_bound`` raises a warning.
    """
    z = np.asarray(z, dtype=complex)
    if z.shape != (space.modes.m,):
        raise ValidationError("z must assign one amplitude per mode")
    vec = np.ones(1, dtype=complex)
    for j in range(space.modes.m):
        vec = np.kron(vec, coherent_amplitudes_1mode(z[j], space.n_max))
    nrm2 = float(np.vdot(vec, vec).real)
    trunc = max(0.0, 1.0 - nrm2)
    if trunc > tail_bound:
        warnings.warn(
            f"coherent state lost {trunc:.3e} tail mass at n_max = {space.n_max}",
            TruncationWarning,
            stacklevel=2,
        )
    return vec / np.sqrt(nrm2), trunc


def coherent_weyl_overlap(z, w, f) -> complex:
    """Exact <z| W(f) |w> between normalized coherent states.

    Uses W(f)|w> = e^{(u conj(w) - conj(u) w)/2} |w + u> with u = i f / sqrt 2
    and the coherent overlap formula; everything reduces to inner products,
    so no truncation enters.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    u = 1j * np.asarray(f, dtype=complex) / np.sqrt(2.0)
    ph = 0.5 * (np.sum(u * np.conj(w)) - np.sum(np.conj(u) * w))
    shifted = w + u
    ov = np.exp(
        -0.5 * np.vdot(z, z) - 0.5 * np.vdot(shifted, shifted) + np.vdot(z, shifted)
    )
    return complex(np.exp(ph) * ov)


def relative_bound_check(space: TruncatedFock, f, n_trials: int = 50, rng=None):
    """Margin of the field bound against the free energy form.

    For states away from the truncation edge checks
    ``||phi(f) psi|| <= (1/sqrt 2) (2 ||f/sqrt(omega)|| ||H_b^(1/2) psi||
    + ||f|| ||psi||)`` and returns the largest (signed) violation margin; a
    nonpositive result means the bound held on every trial.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    f = np.asarray(f, dtype=complex)
    phi = field(space, f)
    w = space.modes.freqs
    f_over_sqrt_w = np.linalg.norm(f / np.sqrt(w))
    f_norm = np.linalg.norm(f)
    hb = space.hb_diag()
    worst = -np.inf
    for _ in range(n_trials):
        psi = space.random_interior(rng)
        lhs = np.linalg.norm(phi @ psi)
        hb_half = np.sqrt(np.sum(hb * np.abs(psi) ** 2))
        rhs = (2.0 * f_over_sqrt_w * hb_half + f_norm * 1.0) / np.sqrt(2.0)
        worst = max(worst, lhs - rhs)
    return worst
