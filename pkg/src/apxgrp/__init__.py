"""Finite approximate subgroups of SL_n(F_p): construction, certification,
torus and conjugacy-class intersection measurements, and Cayley-graph
diameter/girth/spectral-gap experiments."""

__version__ = "0.1.0"

from apxgrp.errors import (
    ApxGrpError,
    InvariantViolation,
    ResourceBudgetError,
    UnsupportedParameterError,
    UsageError,
)
from apxgrp.ffmat import CharPoly, FpElem, MatSL, char_poly, is_regular_semisimple, mat_inv, mat_mul
from apxgrp.setops import (
    ControlWitness,
    GrowthReport,
    MatSet,
    certify_approximate,
    growth_report,
    power_set,
    product,
    symmetrize,
    verify_control,
)
from apxgrp.cayley import BfsStats, GenSet, SpectralReport, diameter, generate_group, girth, spectral_gap, sweep
from apxgrp.families import FamilySpec, ball, borel_subset, progression, random_generators, reduce_mod_p
from apxgrp.structure import (
    ConjClassHandle,
    LPReport,
    TorusHandle,
    centralizer_in,
    check_conjugation_invariance,
    conj_class_intersection,
    count_involved_vs_bound,
    deficient_count,
    enumerate_involved_tori,
    lp_exponent,
    regular_proportion,
    same_torus,
    torus_intersection,
    weyl_order,
)
