"""Ground-state magnetism of the effective electronic model.

The boson coupling renormalizes the on-site interaction to
``u_eff = u - (alpha * b)**2`` and shifts each electron's energy by
``-(alpha * b)**2 / 2``.  Two rigorous regimes are checkable numerically:
attractive interactions on connected lattices with an even electron number
pin a unique spin singlet, while rank-one hopping at one electron below half
filling with repulsive interaction saturates the total spin.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .eigensolver import GroundSpaceReport, ground_space
from .errors import ValidationError
from .lattice_fermions import (
    HoppingMatrix,
    build_hubbard,
    build_sector_basis,
    build_spin_operators,
    number_operators,
    s_max,
)

__all__ = [
    "EffectiveParams",
    "effective_params",
    "critical_alpha",
    "classify",
    "build_tasaki_hopping",
    "RegimeCheck",
    "check_lieb_regime",
    "check_tasaki_regime",
    "SweepRecord",
    "sweep_alpha",
    "flip_brackets",
]


@dataclass
class EffectiveParams:
    u_eff: float
    chemical_shift: float
    coupling_energy: float  # (alpha * b)**2
    regime: str


def effective_params(u: float, alpha: float, b: float) -> EffectiveParams:
    """Interaction and chemical-potential renormalization at coupling alpha.

    ``b`` is the coupling norm carried by each site's boson channel; the
    attractive shift is its square times alpha**2.
    """
    if b < 0:
        raise ValidationError("coupling norm b must be >= 0")
    g2 = (alpha * b) ** 2
    u_eff = u - g2
    regime = "Attractive" if u_eff < 0 else ("Free" if u_eff == 0 else "Repulsive")
    return EffectiveParams(
        u_eff=u_eff, chemical_shift=g2 / 2.0, coupling_energy=g2, regime=regime
    )


def critical_alpha(u: float, b: float) -> float:
    """Coupling at which u_eff crosses zero: sqrt(u) / b."""
    if u <= 0:
        raise ValidationError("critical coupling requires repulsive bare u > 0")
    if b <= 0:
        raise ValidationError("critical coupling requires coupling norm b > 0")
    return float(np.sqrt(u) / b)


def classify(report: GroundSpaceReport, n_e: int, n_sites: int) -> str:
    """Label a ground space: UniqueSinglet, Ferromagnetic or Other."""
    if report.s_tot == "mixed" or report.s_tot is None:
        return "Other"
    if report.degeneracy == 1 and report.s_tot == 0.0:
        return "UniqueSinglet"
    if report.s_tot == s_max(n_e, n_sites):
        return "Ferromagnetic"
    return "Other"


def build_tasaki_hopping(
    t0: float, amplitudes, include_diagonal: bool = True
) -> HoppingMatrix:
    """Rank-one hopping t_xy = t0 * t_x * t_y.

    The diagonal t0 * t_x**2 belongs to the rank-one form and is kept by
    default; dropping it shifts single-particle levels and breaks the
    saturated-spin mechanism, which is occasionally what one wants to probe.
    """
    a = np.asarray(amplitudes, dtype=float)
    if a.ndim != 1 or a.size < 1:
        raise ValidationError("site amplitudes must be a non-empty vector")
    if np.any(a == 0.0):
        raise ValidationError("site amplitudes must be nonzero")
    if t0 == 0.0:
        raise ValidationError("overall hopping scale t0 must be nonzero")
    mat = t0 * np.outer(a, a)
    if not include_diagonal:
        np.fill_diagonal(mat, 0.0)
    return HoppingMatrix(mat)


@dataclass
class RegimeCheck:
    applies: bool
    verified: bool
    details: str
    report: object = None


def _ground_report(hopping, n_e, u_eff, cluster_tol):
    basis = build_sector_basis(hopping.n_sites, n_e)
    h = build_hubbard(basis, hopping, u_eff)
    _, _, _, s2 = build_spin_operators(basis)
    return basis, ground_space(h, cluster_tol=cluster_tol, s_squared=s2)


def check_lieb_regime(
    hopping: HoppingMatrix, u_eff: float, n_e: int, cluster_tol: float = 1e-8
) -> RegimeCheck:
    """Attractive regime: a singlet sits among the ground states.

    Hypotheses: connected hopping graph, even n_e, u_eff <= 0.  For strictly
    negative u_eff the ground state is in addition unique.  ``verified``
    reports whether the diagonalized ground space matches.
    """
    reasons = []
    if not hopping.connected:
        reasons.append("hopping graph is disconnected")
    if n_e % 2 != 0 or n_e <= 0:
        reasons.append(f"n_e = {n_e} is not a positive even number")
    if u_eff > 0:
        reasons.append(f"u_eff = {u_eff:g} is not attractive")
    if reasons:
        return RegimeCheck(False, False, "; ".join(reasons))

    basis, rep = _ground_report(hopping, n_e, u_eff, cluster_tol)
    _, _, _, s2 = build_spin_operators(basis)
    # smallest S^2 expectation over the ground space: project and diagonalize
    v = rep.vectors
    s2_proj = v.conj().T @ (s2 @ v)
    smin = float(np.min(np.linalg.eigvalsh(0.5 * (s2_proj + s2_proj.conj().T))))
    singlet_present = smin < 1e-6
    ok = singlet_present
    details = f"min <S^2> over ground space = {smin:.3e}"
    if u_eff < 0:
        ok = ok and rep.degeneracy == 1 and rep.s_tot == 0.0
        details += f"; degeneracy = {rep.degeneracy}, s_tot = {rep.s_tot}"
    return RegimeCheck(True, bool(ok), details, report=rep)


def check_tasaki_regime(
    t0: float,
    amplitudes,
    u_eff: float,
    include_diagonal: bool = True,
    cluster_tol: float = 1e-8,
) -> RegimeCheck:
    """Saturated-spin regime at one electron below half filling.

    Hypotheses: rank-one hopping with nonzero site amplitudes (diagonal
    included), u_eff > 0, n_e = n_sites - 1.  Verified when every ground
    vector carries s_max and the degeneracy is the full multiplet 2*s_max+1.
    """
    hopping = build_tasaki_hopping(t0, amplitudes, include_diagonal)
    n_sites = hopping.n_sites
    n_e = n_sites - 1
    reasons = []
    if u_eff <= 0:
        reasons.append(f"u_eff = {u_eff:g} is not repulsive")
    if not include_diagonal:
        reasons.append("rank-one form requires the diagonal amplitudes")
    if n_e < 1:
        reasons.append("need at least one electron")
    if reasons:
        return RegimeCheck(False, False, "; ".join(reasons))

    _, rep = _ground_report(hopping, n_e, u_eff, cluster_tol)
    smax = s_max(n_e, n_sites)
    want_deg = int(round(2 * smax + 1))
    ok = rep.s_tot == smax and rep.degeneracy == want_deg
    details = (
        f"s_tot = {rep.s_tot}, degeneracy = {rep.degeneracy} "
        f"(expected {smax}, {want_deg})"
    )
    return RegimeCheck(True, bool(ok), details, report=rep)


@dataclass
class SweepRecord:
    alpha: float
    kappa: float
    u_eff: float
    e0: float
    degeneracy: int
    s_tot: object
    classification: str
    residual_flags: str = ""


def sweep_alpha(
    hopping: HoppingMatrix,
    n_e: int,
    u: float,
    b: float,
    alphas,
    kappa: float = np.nan,
    cluster_tol: float = 1e-8,
    threads: int = 1,
):
    """Classify the effective ground state along a coupling grid.

    Reported energies include the chemical shift, i.e. they are ground
    energies of the effective electronic Hamiltonian whose kinetic diagonal
    is lowered by (alpha*b)**2/2 per electron.  Grid points that fail to
    classify (ambiguous clustering, solver breakdown) are kept in the output
    with classification "Error" and the message in ``residual_flags``.
    """
    basis = build_sector_basis(hopping.n_sites, n_e)
    h0 = build_hubbard(basis, hopping, 0.0)
    _, docc = number_operators(basis)
    _, _, _, s2 = build_spin_operators(basis)
    dense = isinstance(h0, np.ndarray)

    def one(alpha: float) -> SweepRecord:
        par = effective_params(u, alpha, b)
        try:
            if dense:
                h = h0 + np.diag(par.u_eff * docc)
            else:
                import scipy.sparse as sp

                h = h0 + sp.diags(par.u_eff * docc)
            rep = ground_space(h, cluster_tol=cluster_tol, s_squared=s2)
            e0 = rep.e0 - par.chemical_shift * n_e
            return SweepRecord(
                alpha=float(alpha),
                kappa=float(kappa),
                u_eff=par.u_eff,
                e0=e0,
                degeneracy=rep.degeneracy,
                s_tot=rep.s_tot,
                classification=classify(rep, n_e, hopping.n_sites),
            )
        except Exception as exc:  # noqa: BLE001 - sweep must not die mid-grid
            return SweepRecord(
                alpha=float(alpha),
                kappa=float(kappa),
                u_eff=par.u_eff,
                e0=float("nan"),
                degeneracy=0,
                s_tot="",
                classification="Error",
                residual_flags=f"{type(exc).__name__}: {exc}",
            )

    alphas = [float(a) for a in alphas]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, alphas))
    else:
        records = [one(a) for a in alphas]
    return records


def flip_brackets(records):
    """Alpha intervals across which the classification changes."""
    out = []
    for a, b_ in zip(records, records[1:]):
        if a.classification != b_.classification:
            out.append((a.alpha, b_.alpha))
    return out
