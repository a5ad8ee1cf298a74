"""Exact-diagonalization laboratory for small Hubbard clusters coupled to
boson field modes: sector bases, dressing transformations, infrared-cutoff
discretizations and the observables that survive cutoff removal."""

__version__ = "0.1.0"

from . import (  # noqa: F401
    boson_fock,
    eigensolver,
    errors,
    ir_modes,
    lang_firsov,
    lattice_fermions,
    magnetism,
)
