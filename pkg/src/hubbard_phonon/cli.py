"""Command line front end.

Subcommands:

* ``spectrum``  ground-space report of the effective electronic model plus
  the lowest coupled levels through the direct and the transformed routes.
* ``sweep``     classification of the effective ground state along a
  coupling grid, with flip brackets.
* ``verify``    the operator-identity battery with pass/fail lines.
* ``ir``        cutoff scans: coupling norms, divergence rate, overlap decay
  and the Weyl-observable limit.

Exit codes: 0 success, 2 configuration rejected, 3 verification failure
(or, under ``--strict``, any failed sweep point).

Every CSV starts with a ``#`` metadata block carrying the config hash, the
active tolerances and the package version; floats are printed with 17
significant digits so equal runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import (
    AccuracyError,
    AmbiguousDegeneracyError,
    DiscretizationError,
    InfraredDivergenceError,
    SizingError,
    ValidationError,
)
from .eigensolver import ground_space
from .lattice_fermions import (
    HoppingMatrix,
    build_sector_basis,
    build_spin_operators,
    fock_operator,
)
from .magnetism import (
    build_tasaki_hopping,
    classify,
    effective_params,
    flip_brackets,
    sweep_alpha,
)
from .boson_fock import relative_bound_check
from .lang_firsov import (
    CoupledModel,
    annihilation_residual,
    dress_state,
    dressed_ground,
    effective_hamiltonians,
    heisenberg_evolution_check,
    nb_expectation,
    overlap_formula,
    verify_transform_hb,
    verify_transform_nb,
)
from .ir_modes import (
    CutoffFamily,
    b_kappa,
    discretize,
    divergence_report,
    limit_state,
    overlap_decay_curve,
    weyl_state,
)

DEFAULTS = {
    "lattice": {
        "n_sites": 2,
        "hopping": {"kind": "chain", "t": -1.0},
    },
    "electrons": {"n_e": 2},
    "interaction": {"u": 1.0},
    "coupling": {
        "alpha": 0.5,
        "alpha_grid": {"start": 0.2, "stop": 2.0, "step": 0.02},
    },
    "modes": {
        "beta": 0.5,
        "big_k": 1.0,
        "kappa": 0.1,
        "kappas": [1e-1, 1e-2, 1e-3, 1e-4],
        "per_site": 2,
        "n_max": 12,
    },
    "solver": {"cluster_tol": 1e-8, "levels": 5},
    "tolerances": {
        "transform": 5e-5,
        "coefficient": 1e-2,
        "annihilation": 1e-5,
        "heisenberg": 5e-3,
        "overlap": 1e-6,
        "equivalence": 1e-6,
        "bound_margin": 1e-12,
    },
}


def _merge(base, update):
    out = dict(base)
    for key, val in (update or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path):
    base = copy.deepcopy(DEFAULTS)  # callers may mutate the result freely
    if path is None:
        return base
    raw = Path(path).read_text()
    user = yaml.safe_load(raw)
    if user is None:
        user = {}
    if not isinstance(user, dict):
        raise ValidationError("config must be a YAML mapping")
    return _merge(base, user)


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate_config(cfg):
    """Collect human-readable violations; empty list means acceptable."""
    errs = []
    lat = cfg.get("lattice", {})
    n_sites = lat.get("n_sites")
    if not isinstance(n_sites, int) or n_sites < 1:
        errs.append("lattice.n_sites must be an integer >= 1")
        n_sites = None
    hop = lat.get("hopping", {})
    kind = hop.get("kind")
    if kind not in ("chain", "matrix", "rank_one"):
        errs.append("lattice.hopping.kind must be one of chain, matrix, rank_one")
    elif kind == "matrix":
        m = hop.get("matrix")
        if not isinstance(m, list) or n_sites is not None and len(m) != n_sites:
            errs.append("lattice.hopping.matrix must be an n_sites x n_sites table")
    elif kind == "rank_one":
        amps = hop.get("amplitudes")
        if not isinstance(amps, list) or (
            n_sites is not None and len(amps) != n_sites
        ):
            errs.append("lattice.hopping.amplitudes must list one value per site")
        elif any(a == 0 for a in amps):
            errs.append("lattice.hopping.amplitudes must be nonzero site amplitudes")
    n_e = cfg.get("electrons", {}).get("n_e")
    if not isinstance(n_e, int) or n_e < 0:
        errs.append("electrons.n_e must be a nonnegative integer")
    elif n_sites is not None and n_e > 2 * n_sites:
        errs.append(
            f"electrons.n_e must lie in [0, 2*n_sites] = [0, {2 * n_sites}]; "
            "a site holds at most one electron per spin"
        )
    if not _is_num(cfg.get("interaction", {}).get("u")):
        errs.append("interaction.u must be a number")
    coup = cfg.get("coupling", {})
    if not _is_num(coup.get("alpha")):
        errs.append("coupling.alpha must be a number")
    grid = coup.get("alpha_grid", {})
    if grid:
        if not all(_is_num(grid.get(k)) for k in ("start", "stop", "step")):
            errs.append("coupling.alpha_grid needs numeric start, stop, step")
        elif grid["step"] <= 0 or grid["stop"] <= grid["start"]:
            errs.append("coupling.alpha_grid must advance: step > 0, stop > start")
    modes = cfg.get("modes", {})
    beta = modes.get("beta")
    if not _is_num(beta) or beta <= 0:
        errs.append("modes.beta must be a positive number")
    big_k = modes.get("big_k")
    if not _is_num(big_k) or big_k <= 0:
        errs.append("modes.big_k must be a positive number")
    kappa = modes.get("kappa")
    if not _is_num(kappa) or kappa <= 0 or (_is_num(big_k) and kappa >= big_k):
        errs.append(
            "modes.kappa must satisfy 0 < kappa < big_k (positive frequencies only)"
        )
    kappas = modes.get("kappas")
    if not isinstance(kappas, list) or not all(
        _is_num(k) and 0 < k < (big_k if _is_num(big_k) else np.inf) for k in kappas
    ):
        errs.append("modes.kappas must list cutoffs inside (0, big_k)")
    per_site = modes.get("per_site")
    if not isinstance(per_site, int) or not 2 <= per_site <= 12:
        errs.append("modes.per_site must be an integer in [2, 12]")
    n_max = modes.get("n_max")
    if not isinstance(n_max, int) or n_max < 1:
        errs.append("modes.n_max must be an integer >= 1")
    sol = cfg.get("solver", {})
    if not _is_num(sol.get("cluster_tol")) or sol.get("cluster_tol") <= 0:
        errs.append("solver.cluster_tol must be a positive number")
    for name, val in cfg.get("tolerances", {}).items():
        if not _is_num(val) or val <= 0:
            errs.append(f"tolerances.{name} must be a positive number")
    return errs


def build_hopping(cfg) -> HoppingMatrix:
    lat = cfg["lattice"]
    hop = lat["hopping"]
    if hop["kind"] == "chain":
        return HoppingMatrix.chain(lat["n_sites"], float(hop.get("t", -1.0)))
    if hop["kind"] == "matrix":
        return HoppingMatrix(np.asarray(hop["matrix"], dtype=float))
    return build_tasaki_hopping(
        float(hop.get("t0", 1.0)),
        np.asarray(hop["amplitudes"], dtype=float),
        include_diagonal=bool(hop.get("include_diagonal", True)),
    )


def build_family(cfg) -> CutoffFamily:
    return CutoffFamily(
        beta=float(cfg["modes"]["beta"]), big_k=float(cfg["modes"]["big_k"])
    )


def build_model(cfg) -> CoupledModel:
    return CoupledModel.from_family(
        cfg["lattice"]["n_sites"],
        cfg["electrons"]["n_e"],
        build_hopping(cfg),
        float(cfg["interaction"]["u"]),
        float(cfg["coupling"]["alpha"]),
        build_family(cfg),
        float(cfg["modes"]["kappa"]),
        modes_per_site=int(cfg["modes"]["per_site"]),
        n_max=int(cfg["modes"]["n_max"]),
    )


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(x)
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def config_hash(cfg) -> str:
    canon = yaml.safe_dump(cfg, sort_keys=True).encode()
    return hashlib.sha256(canon).hexdigest()


def write_csv(path: Path, meta, header, rows):
    lines = [f"# {k}: {v}" for k, v in meta.items()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _meta(cfg, extra=None):
    meta = {
        "version": __version__,
        "config_sha256": config_hash(cfg),
        "tolerances": ";".join(
            f"{k}={_fmt(v)}" for k, v in sorted(cfg["tolerances"].items())
        ),
    }
    if extra:
        meta.update(extra)
    return meta


# -- subcommands ---------------------------------------------------------------


def cmd_spectrum(cfg, args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = build_model(cfg)
    fam = build_family(cfg)
    b = b_kappa(fam, float(cfg["modes"]["kappa"]))
    par = effective_params(
        float(cfg["interaction"]["u"]), float(cfg["coupling"]["alpha"]), b
    )
    he_eff = model.effective_electronic()
    _, _, _, s2 = build_spin_operators(model.basis)
    rep = ground_space(
        he_eff, cluster_tol=float(cfg["solver"]["cluster_tol"]), s_squared=s2
    )
    label = classify(rep, model.basis.n_e, model.basis.n_sites)
    k = int(cfg["solver"]["levels"])
    ha = effective_hamiltonians(model)
    direct = ha.direct_lowest(k)
    transformed = ha.transformed_lowest(k)
    product = ha.product_lowest(k)
    rows = [
        (i, direct[i], transformed[i], product[i]) for i in range(len(direct))
    ]
    meta = _meta(
        cfg,
        {
            "b_kappa": _fmt(b),
            "u_eff": _fmt(par.u_eff),
            "electronic_e0": _fmt(rep.e0),
            "electronic_degeneracy": rep.degeneracy,
            "electronic_s_tot": rep.s_tot,
            "classification": label,
        },
    )
    write_csv(
        out / "spectrum.csv",
        meta,
        ["level", "energy_direct", "energy_transformed", "energy_product"],
        rows,
    )
    print(f"spectrum: {len(rows)} levels written to {out / 'spectrum.csv'}")
    print(
        f"effective model: u_eff = {par.u_eff:.6g}, e0 = {rep.e0:.6g}, "
        f"degeneracy = {rep.degeneracy}, s_tot = {rep.s_tot}, {label}"
    )
    return 0


def cmd_sweep(cfg, args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fam = build_family(cfg)
    kappa = float(cfg["modes"]["kappa"])
    b = b_kappa(fam, kappa)
    grid_cfg = cfg["coupling"].get("alpha_grid")
    if isinstance(grid_cfg, list):
        alphas = [float(a) for a in grid_cfg]
    else:
        alphas = list(
            np.arange(
                float(grid_cfg["start"]),
                float(grid_cfg["stop"]) + 0.5 * float(grid_cfg["step"]),
                float(grid_cfg["step"]),
            )
        )
    records = sweep_alpha(
        build_hopping(cfg),
        cfg["electrons"]["n_e"],
        float(cfg["interaction"]["u"]),
        b,
        alphas,
        kappa=kappa,
        cluster_tol=float(cfg["solver"]["cluster_tol"]),
        threads=args.threads,
    )
    brackets = flip_brackets(records)
    rows = [
        (
            r.alpha,
            r.kappa,
            r.u_eff,
            r.e0,
            r.degeneracy,
            r.s_tot if r.s_tot is not None else "",
            r.classification,
            r.residual_flags,
        )
        for r in records
    ]
    meta = _meta(
        cfg,
        {
            "b_kappa": _fmt(b),
            "flip_brackets": ";".join(f"[{_fmt(a)},{_fmt(b_)}]" for a, b_ in brackets),
        },
    )
    write_csv(
        out / "sweep.csv",
        meta,
        [
            "alpha",
            "kappa",
            "u_eff",
            "e0",
            "degeneracy",
            "s_tot",
            "classification",
            "residual_flags",
        ],
        rows,
    )
    failures = [r for r in records if r.classification == "Error"]
    print(
        f"sweep: {len(records)} points, {len(failures)} failures, "
        f"flips at {brackets}"
    )
    if failures:
        for r in failures:
            print(f"  alpha = {r.alpha:g}: {r.residual_flags}", file=sys.stderr)
        if args.strict:
            return 3
    return 0


def _car_residual() -> float:
    """Anticommutation on the full two-site Fock space, worst entry."""
    worst = 0.0
    ops = {}
    for x in range(2):
        for s in range(2):
            ops[(x, s)] = fock_operator(2, x, s, dagger=True)
    eye = np.eye(4**2)
    for k1, c1 in ops.items():
        for k2, c2 in ops.items():
            a1 = c1.T  # real matrices
            anti = a1 @ c2 + c2 @ a1
            want = eye if k1 == k2 else 0.0
            worst = max(worst, float(np.max(np.abs(anti - want))))
            anti2 = c1 @ c2 + c2 @ c1
            worst = max(worst, float(np.max(np.abs(anti2))))
    return worst


def cmd_verify(cfg, args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tols = cfg["tolerances"]
    rng = np.random.default_rng(args.seed)
    model = build_model(cfg)
    checks = []  # (name, measured, threshold)

    checks.append(("car_two_site", _car_residual(), 1e-14))

    res_hb = verify_transform_hb(model, n_trials=3, rng=rng)
    checks.append(("transform_energy", res_hb, tols["transform"]))

    nb_rep = verify_transform_nb(model, n_trials=3, rng=rng)
    checks.append(("transform_number", nb_rep.residual, tols["transform"]))
    coef_dev = abs(nb_rep.quadratic_fit - nb_rep.quadratic_exact) / max(
        nb_rep.quadratic_exact, 1e-30
    )
    checks.append(("number_quadratic_coefficient", coef_dev, tols["coefficient"]))
    print(
        "transformed number operator: quadratic fit "
        f"{nb_rep.quadratic_fit:.8f} vs exact alpha^2/2 = "
        f"{nb_rep.quadratic_exact:.8f} (alpha^2 itself = {nb_rep.alpha_squared:.8f})"
    )

    state, rep = dressed_ground(model)
    m_tot = model.fock.modes.m
    worst_ann = 0.0
    for _ in range(5):
        f = rng.standard_normal(m_tot) + 1j * rng.standard_normal(m_tot)
        f /= np.linalg.norm(f)
        worst_ann = max(worst_ann, annihilation_residual(model, state, f))
    checks.append(("dressed_annihilation", worst_ann, tols["annihilation"]))

    f = rng.standard_normal(m_tot) + 1j * rng.standard_normal(m_tot)
    f /= np.linalg.norm(f)
    res_heis = heisenberg_evolution_check(model, f, n_trials=2, rng=rng)
    checks.append(("heisenberg_covariance", res_heis, tols["heisenberg"]))

    # overlap closed form against the matrix route, 0..2 excitations
    c_ref = int(np.argmax(np.abs(state.weights)))
    psi_ref = np.zeros(model.basis.dim, dtype=complex)
    psi_ref[c_ref] = 1.0
    worst_ov = 0.0
    fs_pool = []
    for n_exc in range(3):
        fs = fs_pool[:n_exc]
        ov = overlap_formula(model, state, fs, psi_ref)
        worst_ov = max(worst_ov, ov.difference)
        fi = rng.standard_normal(m_tot) + 1j * rng.standard_normal(m_tot)
        fs_pool.append(fi / np.linalg.norm(fi))
    checks.append(("overlap_closed_form", worst_ov, tols["overlap"]))

    nb_arith = nb_expectation(state)
    vec = state.vector()
    nb_mat = float(
        np.sum(model.fock.nb_diag() * np.abs(
            vec.reshape(model.basis.dim, model.fock.dim)
        ) ** 2)
    )
    checks.append(("number_expectation_routes", abs(nb_arith - nb_mat), tols["overlap"]))

    if model.dim <= 200_000:
        ha = effective_hamiltonians(model)
        d5 = ha.direct_lowest(5, tol=1e-10)
        t5 = ha.transformed_lowest(5, tol=1e-10)
        checks.append(
            ("spectral_equivalence", float(np.max(np.abs(d5 - t5))), tols["equivalence"])
        )

    margin = relative_bound_check(model.fock, model.lam[0], n_trials=50, rng=rng)
    checks.append(("field_relative_bound", margin, tols["bound_margin"]))

    rows = []
    all_ok = True
    for name, measured, threshold in checks:
        ok = measured <= threshold
        all_ok &= ok
        rows.append((name, measured, threshold, "pass" if ok else "FAIL"))
        print(f"{'PASS' if ok else 'FAIL'} {name}: {measured:.3e} <= {threshold:.1e}")
    write_csv(
        out / "verify.csv",
        _meta(cfg),
        ["check", "measured", "threshold", "status"],
        rows,
    )
    return 0 if all_ok else 3


def cmd_ir(cfg, args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fam = build_family(cfg)
    kappas = [float(k) for k in cfg["modes"]["kappas"]]
    hopping = build_hopping(cfg)
    n_e = cfg["electrons"]["n_e"]
    u = float(cfg["interaction"]["u"])
    alpha = float(cfg["coupling"]["alpha"])
    scan, rate, expected = divergence_report(fam, kappas)
    curve = dict(
        (k, v)
        for k, v in overlap_decay_curve(
            fam, hopping, n_e, u, alpha, kappas=sorted(kappas, reverse=True),
            modes_per_site=int(cfg["modes"]["per_site"]),
        )
    )
    basis = build_sector_basis(hopping.n_sites, n_e)
    a_e = np.eye(basis.dim)
    profiles = [lambda k: np.sqrt(k)] * hopping.n_sites
    lim = limit_state(fam, hopping, n_e, u, alpha, a_e, profiles)
    rows = []
    for kap, b2, g2 in scan:
        model = CoupledModel.from_family(
            hopping.n_sites, n_e, hopping, u, alpha, fam, kap,
            modes_per_site=int(cfg["modes"]["per_site"]), n_max=2,
        )
        disc = discretize(fam, kap, int(cfg["modes"]["per_site"]), hopping.n_sites)
        f = disc.mode_vector(profiles)
        wv = weyl_state(model, a_e, f)
        rows.append(
            (kap, b2, g2, curve[kap], wv.real, wv.imag, abs(wv - lim))
        )
    meta = _meta(
        cfg,
        {
            "singularity_class": fam.singularity_class,
            "fitted_rate": _fmt(rate),
            "expected_rate": _fmt(expected),
            "limit_value": f"{_fmt(lim.real)}{'+' if lim.imag >= 0 else ''}{_fmt(lim.imag)}j",
        },
    )
    write_csv(
        out / "ir.csv",
        meta,
        [
            "kappa",
            "b_squared",
            "g_norm_squared",
            "overlap_modulus",
            "weyl_value_re",
            "weyl_value_im",
            "weyl_minus_limit",
        ],
        rows,
    )
    print(
        f"ir: class {fam.singularity_class}, fitted rate {rate:.4f} "
        f"(expected {expected:.4f}); wrote {out / 'ir.csv'}"
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hubbard-phonon",
        description="Exact-diagonalization toolbox for Hubbard clusters "
        "coupled to boson modes",
    )
    parser.add_argument("--config", default=None, help="YAML run configuration")
    parser.add_argument("--out", default="runs", help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed")
    parser.add_argument("--threads", type=int, default=1, help="sweep parallelism")
    parser.add_argument(
        "--strict", action="store_true", help="fail the run on partial sweep errors"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("spectrum", "sweep", "verify", "ir"):
        sub.add_parser(name)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except (OSError, yaml.YAMLError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    errors = validate_config(cfg)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2

    handler = {
        "spectrum": cmd_spectrum,
        "sweep": cmd_sweep,
        "verify": cmd_verify,
        "ir": cmd_ir,
    }[args.command]
    try:
        return handler(cfg, args)
    except (
        ValidationError,
        SizingError,
        DiscretizationError,
        InfraredDivergenceError,
    ) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (AccuracyError, AmbiguousDegeneracyError) as exc:
        print(f"verification error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
