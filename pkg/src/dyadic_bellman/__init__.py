"""Bellman functions of the tree maximal operator, with exact checks at desk scale."""
from .core import (AtomFunction, BelowMeanLevelError, DomainError, MalformedInputError, ProbTree,
                   StepFunction, beta_lambda, build_tree, decreasing_rearrangement, hardy_average,
                   read_atom_csv, read_step_csv, write_atom_csv, write_step_csv)
from .maximal import (DegenerateInputError, MaximalResult, doob_ratio, maximal_operator,
                      weak_type_report)
from .bellman import BellmanPoint, bellman2, bellman3, hp, omega
from .symmetrize import (Constant, FunctionalSpec, Identity, Power, PowerOfMax,
                         SearchTooLargeError, brute_force_sup, build_extremizer,
                         extremizer_lower_bound, extremizer_sweep, lhs_functional, rhs_integral)
from .extremal import (PowerLawExtremal, WrongBranchError, lemma41_residual, sharpness_sequence,
                       solve_extremal_g, vu_functionals)
from .fuzz import fuzz_corpus

__version__ = "0.1.0"
