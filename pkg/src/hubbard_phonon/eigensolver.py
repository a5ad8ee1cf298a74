"""Ground-space extraction with explicit degeneracy bookkeeping.

Dense spectra are computed in full; large sparse problems go through ARPACK
(Lanczos with implicit restarts and full reorthogonalization of the Krylov
block).  Degeneracy is decided by relative clustering at ``cluster_tol``; a
cluster boundary that falls inside the factor-2 grey zone raises instead of
silently picking a side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AmbiguousDegeneracyError, IterationLimitError, ValidationError

DENSE_MAX = 4096

__all__ = ["eigensolve", "ground_space", "GroundSpaceReport"]


def _is_operator(h) -> bool:
    return isinstance(h, spla.LinearOperator)


def _check_hermitian(h) -> None:
    if _is_operator(h):
        return  # nothing cheap to check; trusted by contract
    if sp.issparse(h):
        d = h - h.conj().T
        asym = np.max(np.abs(d.data)) if d.nnz else 0.0
        scale = np.max(np.abs(h.data)) if h.nnz else 0.0
    else:
        asym = np.max(np.abs(h - np.conj(h.T))) if h.size else 0.0
        scale = np.max(np.abs(h)) if h.size else 0.0
    if asym > 1e-12 * max(1.0, scale):
        raise ValidationError(f"matrix is not Hermitian: max asymmetry {asym:g}")


def _lanczos_start(dim: int) -> np.ndarray:
    # fixed start vector so repeated runs produce identical iterates
    return np.random.default_rng(12345).standard_normal(dim)


def eigensolve(h, k: int = 6, tol: float = 0.0, maxiter=None):
    """Lowest ``k`` eigenpairs of a Hermitian matrix or linear operator.

    Returns ``(vals, vecs)`` with eigenvalues ascending and eigenvectors in
    columns.  Dense input (or sparse of dimension <= 4096) is solved in full
    by a direct method and truncated; larger sparse input and linear
    operators use shift-free Lanczos on the small end of the spectrum.
    """
    dim = h.shape[0]
    if h.shape[0] != h.shape[1]:
        raise ValidationError("matrix must be square")
    if k < 1:
        raise ValidationError("k must be >= 1")
    k = min(k, dim)
    _check_hermitian(h)

    dense = None
    if isinstance(h, np.ndarray):
        dense = h
    elif sp.issparse(h) and (dim <= DENSE_MAX or k >= dim - 1):
        dense = h.toarray()
    if dense is not None:
        vals, vecs = np.linalg.eigh(dense)
        return vals[:k], vecs[:, :k]

    if _is_operator(h) and k >= dim - 1:
        raise ValidationError(
            f"k = {k} too close to dim = {dim} for the iterative path"
        )
    try:
        vals, vecs = spla.eigsh(
            h,
            k=k,
            which="SA",
            tol=tol,
            maxiter=maxiter,
            v0=_lanczos_start(dim),
        )
    except spla.ArpackNoConvergence as exc:
        nc = len(exc.eigenvalues)
        raise IterationLimitError(
            f"Lanczos converged only {nc}/{k} eigenpairs", residual=None
        ) from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


@dataclass
class GroundSpaceReport:
    """Certified ground-space data.

    ``s_tot`` is the common total spin of the ground vectors (a half-integer
    as float), the string ``"mixed"`` when they do not share one, or None
    when no spin operator was supplied.
    """

    e0: float
    degeneracy: int
    vectors: np.ndarray
    gap: float
    cluster_tol: float
    s_tot: object = None
    spectrum_head: np.ndarray = field(default_factory=lambda: np.empty(0))


def _spin_label(vectors, s_squared, tol_spin):
    qs = []
    for j in range(vectors.shape[1]):
        v = vectors[:, j]
        q = np.vdot(v, s_squared @ v).real
        qs.append(q)
    qs = np.asarray(qs)
    if np.max(np.abs(qs - qs[0])) > tol_spin:
        return "mixed"
    # invert q = s(s+1) and snap to the nearest half integer
    s = 0.5 * (-1.0 + np.sqrt(max(0.0, 1.0 + 4.0 * qs[0])))
    s_half = round(2.0 * s) / 2.0
    if abs(qs[0] - s_half * (s_half + 1.0)) > tol_spin:
        return "mixed"
    return s_half


def ground_space(
    h,
    cluster_tol: float = 1e-8,
    s_squared=None,
    tol_spin: float = 1e-6,
    k_probe: int = 8,
) -> GroundSpaceReport:
    """Ground energy, degeneracy and an orthonormal ground basis.

    An eigenvalue belongs to the ground cluster when
    ``(e - e0) <= cluster_tol * max(1, |e0|)``.  If any eigenvalue lies
    within a factor of 2 of that threshold on either side the clustering is
    declared ambiguous and :class:`AmbiguousDegeneracyError` is raised with a
    tolerance suggestion instead of returning a coin-flip degeneracy.
    """
    dim = h.shape[0]
    use_dense = isinstance(h, np.ndarray) or (sp.issparse(h) and dim <= DENSE_MAX)

    if use_dense:
        vals, vecs = eigensolve(h, k=dim)
    else:
        k = min(max(k_probe, 2), dim - 1)
        while True:
            vals, vecs = eigensolve(h, k=k)
            scale = max(1.0, abs(vals[0]))
            # need at least one eigenvalue safely outside the grey zone to
            # certify where the cluster ends
            if (vals[-1] - vals[0]) > 2.0 * cluster_tol * scale or k >= dim - 1:
                break
            k = min(2 * k, dim - 1)

    e0 = float(vals[0])
    scale = max(1.0, abs(e0))
    rel = (vals - e0) / scale
    grey = (rel >= 0.5 * cluster_tol) & (rel <= 2.0 * cluster_tol)
    if np.any(grey):
        g = float(rel[grey][0])
        raise AmbiguousDegeneracyError(
            f"eigenvalue gap {g:.3e} (relative) sits within a factor 2 of "
            f"cluster_tol = {cluster_tol:.3e}; retry with cluster_tol "
            f"<= {g / 4:.3e} or >= {4 * g:.3e}",
            gap=g,
            suggested_tol=g / 4,
        )
    inside = rel <= cluster_tol
    deg = int(np.sum(inside))
    vecs_in = vecs[:, :deg]
    # re-orthonormalize inside the cluster; eigh pairs are orthonormal to
    # machine precision already, QR just pins the guarantee
    q, _ = np.linalg.qr(vecs_in)
    gap = float(vals[deg] - e0) if deg < len(vals) else np.inf

    s_tot = None
    if s_squared is not None:
        s_tot = _spin_label(q, s_squared, tol_spin)

    return GroundSpaceReport(
        e0=e0,
        degeneracy=deg,
        vectors=q,
        gap=gap,
        cluster_tol=cluster_tol,
        s_tot=s_tot,
        spectrum_head=np.asarray(vals[: min(len(vals), 10)], dtype=float),
    )
