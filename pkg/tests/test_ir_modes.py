"""Infrared mode families: closed-form norms, quadrature discretization and
the cutoff-removal limit of Weyl expectation values.

The coupling density is F(k) = k^beta on [kappa, K] with dispersion
omega(k) = k, one independent channel per lattice site.  Everything the
quadrature produces is checked against closed antiderivatives.
"""

import numpy as np
import pytest

from hubbard_phonon.errors import (
    DiscretizationError,
    InfraredDivergenceError,
    ValidationError,
)
from hubbard_phonon.lattice_fermions import HoppingMatrix
from hubbard_phonon.lang_firsov import CoupledModel, dressed_ground
from hubbard_phonon.ir_modes import (
    CutoffFamily,
    b_kappa,
    discretize,
    divergence_report,
    limit_state,
    norm_omega_power,
    overlap_decay_curve,
    riemann_lebesgue_decay,
    tail_max,
    weyl_state,
)

CHAIN2 = HoppingMatrix.chain(2)


def test_norm_closed_vs_quadrature():
    for beta in (0.3, 0.5, 0.8):
        fam = CutoffFamily(beta=beta, big_k=1.0)
        for s in (0.0, 0.5, 1.0):
            for kappa in (1e-4, 1e-2, 1e-1):
                nv = norm_omega_power(fam, s, kappa)
                rel = abs(nv.closed - nv.quadrature) / max(abs(nv.closed), 1e-300)
                assert rel <= 1e-10


def test_reference_channel_anchors():
    fam = CutoffFamily(beta=0.5, big_k=1.0)
    assert abs(b_kappa(fam, 0.1) ** 2 - 0.9) < 1e-14
    assert abs(norm_omega_power(fam, 1.0, 0.1).value - np.log(10.0)) < 1e-12


def test_singularity_classes():
    assert CutoffFamily(beta=0.3).singularity_class == "PowerSingular"
    assert CutoffFamily(beta=0.5).singularity_class == "LogSingular"
    assert CutoffFamily(beta=0.8).singularity_class == "Regular"


def test_zero_cutoff_divergence():
    fam = CutoffFamily(beta=0.5, big_k=1.0)
    with pytest.raises(InfraredDivergenceError) as err:
        norm_omega_power(fam, 1.0, 0.0)
    assert err.value.divergence_class == "LogSingular"
    # beta > 1/2 keeps omega^-1 integrable down to zero
    reg = norm_omega_power(CutoffFamily(beta=0.8), 1.0, 0.0)
    assert abs(reg.value - 1.0 / 0.6) < 1e-10
    # and the plain norm (s = 0) never diverges
    assert norm_omega_power(fam, 0.0, 0.0).value == pytest.approx(0.5)


def test_discretize_moment_exactness():
    # the m-node rule must integrate omega^(-2s) |lambda|^2 exactly for
    # s in {0, 1/2, 1}; these are the only moments the models consume
    for beta in (0.3, 0.5, 0.8):
        fam = CutoffFamily(beta=beta, big_k=1.0)
        for m in (2, 3, 6):
            disc = discretize(fam, 0.01, m)
            lam = disc.couplings[0]
            k = disc.modes.freqs
            for s in (0.0, 0.5, 1.0):
                got = np.sum(np.abs(lam) ** 2 / k ** (2 * s))
                want = norm_omega_power(fam, s, 0.01).closed
                assert abs(got - want) <= 1e-11 * abs(want)


def test_discretize_validation():
    fam = CutoffFamily(beta=0.5, big_k=1.0)
    with pytest.raises(ValidationError):
        discretize(fam, 0.0, 4)
    with pytest.raises(ValidationError):
        discretize(fam, 2.0, 4)  # cutoff above K
    with pytest.raises(DiscretizationError):
        discretize(fam, 0.1, 1)  # cannot match the s = 1 moment
    with pytest.raises(DiscretizationError):
        discretize(fam, 0.1, 13)


def test_disjoint_site_channels():
    fam = CutoffFamily(beta=0.5, big_k=1.0)
    disc = discretize(fam, 0.1, 3, n_sites=2)
    lam = disc.couplings
    assert lam.shape == (2, 6)
    # site x couples only to its own block of modes
    assert np.max(np.abs(lam[0, 3:])) == 0.0
    assert np.max(np.abs(lam[1, :3])) == 0.0
    assert np.array_equal(disc.modes.site_of_mode, [0, 0, 0, 1, 1, 1])


def test_mode_vector_bilinears_exact():
    # for profiles F(k) = c sqrt(k) every bilinear the package forms is a
    # polynomial moment the rule integrates exactly
    fam = CutoffFamily(beta=0.5, big_k=1.0)
    kappa = 0.1
    disc = discretize(fam, kappa, 2, n_sites=2)
    cs = (0.7, 1.3)
    f = disc.mode_vector([lambda k, c=c: c * np.sqrt(k) for c in cs])
    g = disc.couplings / disc.modes.freqs
    for x, c in enumerate(cs):
        block = disc.modes.site_of_mode == x
        want_fg = c * (1.0 - kappa)  # integral of c sqrt(k) k^beta / k
        got_fg = np.vdot(f, g[x]).real  # g[x] vanishes off its own block
        assert abs(got_fg - want_fg) < 1e-12
        want_ff = c**2 * 0.5 * (1.0 - kappa**2)  # integral of c^2 k
        got_ff = np.vdot(f[block], f[block]).real
        assert abs(got_ff - want_ff) < 1e-12


def test_riemann_lebesgue_tail():
    vals = riemann_lebesgue_decay(np.sqrt, 1.0, ts=[1.0, 10.0, 100.0])
    tails = tail_max(vals)
    assert tails[0] > tails[1] > tails[2]
    assert tails[2] < 0.5 * tails[0]
    with pytest.raises(ValidationError):
        riemann_lebesgue_decay(lambda k: 1j * k, 1.0, ts=[1.0])


def test_divergence_report_rates():
    rows, fitted, expected = divergence_report(CutoffFamily(beta=0.5))
    assert expected == 1.0
    assert abs(fitted - expected) < 0.02
    assert [r[0] for r in rows] == [1e-1, 1e-2, 1e-3, 1e-4]
    _, fitted_p, expected_p = divergence_report(CutoffFamily(beta=0.3))
    assert expected_p == pytest.approx(-0.4)
    assert abs(fitted_p - expected_p) < 0.05
    _, fitted_r, expected_r = divergence_report(CutoffFamily(beta=0.8))
    assert expected_r == 0.0
    assert abs(fitted_r) < 0.02


def test_weyl_state_routes_agree():
    fam = CutoffFamily(beta=0.5, big_k=1.0)
    m = CoupledModel.from_family(2, 2, CHAIN2, 1.0, 0.5, fam, 0.1,
                                 modes_per_site=2, n_max=14)
    rng = np.random.default_rng(51)
    a_e = rng.standard_normal((6, 6))
    a_e = 0.5 * (a_e + a_e.T)
    disc = discretize(fam, 0.1, 2, n_sites=2)
    f = disc.mode_vector([lambda k: 0.8 * np.sqrt(k), lambda k: 0.5 * np.sqrt(k)])
    pairwise = weyl_state(m, a_e, f, method="pairwise")
    matrix = weyl_state(m, a_e, f, method="matrix")
    assert abs(pairwise - matrix) < 1e-6


def test_limit_state_is_kappa_limit_regular():
    # beta > 1/2: the dressed states converge in norm and the limit keeps
    # the full pairwise coherent structure.  Profiles proportional to the
    # coupling density keep every consumed bilinear an exactly matched
    # quadrature moment at any beta.
    fam = CutoffFamily(beta=0.8, big_k=1.0)
    rng = np.random.default_rng(52)
    a_e = rng.standard_normal((6, 6))
    a_e = 0.5 * (a_e + a_e.T)
    profiles = [lambda k: 0.9 * k**0.8, lambda k: 0.6 * k**0.8]
    lim = limit_state(fam, CHAIN2, 2, 1.0, 0.7, a_e, profiles)
    diffs = []
    for kappa in (1e-1, 1e-2, 1e-3):
        m = CoupledModel.from_family(2, 2, CHAIN2, 1.0, 0.7, fam, kappa,
                                     modes_per_site=2, n_max=2)
        f = discretize(fam, kappa, 2, n_sites=2).mode_vector(profiles)
        diffs.append(abs(weyl_state(m, a_e, f) - lim))
    assert diffs[0] > diffs[1] > diffs[2]
    assert diffs[2] < 0.1 * diffs[0]


def test_limit_state_singular_decoheres():
    # at beta = 1/2 only matrix elements between equal occupation patterns
    # survive; convergence of the functional coexists with the overlap to
    # any fixed dressed reference going to zero
    fam = CutoffFamily(beta=0.5, big_k=1.0)
    rng = np.random.default_rng(53)
    a_e = rng.standard_normal((6, 6))
    a_e = 0.5 * (a_e + a_e.T)
    profiles = [lambda k: 0.9 * np.sqrt(k), lambda k: 0.6 * np.sqrt(k)]
    lim = limit_state(fam, CHAIN2, 2, 1.0, 0.7, a_e, profiles)
    diffs, vac = [], []
    for kappa in (1e-1, 1e-2, 1e-3):
        m = CoupledModel.from_family(2, 2, CHAIN2, 1.0, 0.7, fam, kappa,
                                     modes_per_site=2, n_max=2)
        f = discretize(fam, kappa, 2, n_sites=2).mode_vector(profiles)
        diffs.append(abs(weyl_state(m, a_e, f) - lim))
        st, _ = dressed_ground(m)
        znorm2 = np.sum(np.abs(st.z) ** 2, axis=1)
        vac.append(float(np.sum(np.abs(st.weights) ** 2 * np.exp(-0.5 * znorm2))))
    assert diffs[0] > diffs[1] > diffs[2]
    assert vac[0] > vac[1] > vac[2]


def test_overlap_decay_curve_single_electron():
    # one electron: |<psi (x) vacuum, dressed ground>| = (kappa/K)^(a^2/4)
    fam = CutoffFamily(beta=0.5, big_k=1.0)
    curve = overlap_decay_curve(fam, CHAIN2, 1, 1.0, 0.5)
    for kappa, val in curve:
        assert abs(val - kappa**(0.5**2 / 4)) < 1e-12
