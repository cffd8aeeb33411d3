"""Empirical suprema of Rademacher processes indexed by l1-balls, with chaining tools."""

from .bounds import (BoundShape, implied_constant, prop31_gap, shape_gamma1_mm, shape_lemma22, shape_thm11,
                     shape_thm12, shape_thm13)
from .chaining import (DiscreteMeasure, NetHierarchy, build_nested_nets, chain_bound, check_hierarchy,
                       dudley_integral, ellipsoid_gamma2_bound, gamma_beta_estimate, gamma_beta_grid,
                       holder_gamma1_from_gamma2, subset_gamma_check)
from .config import ExperimentConfig, load_config, parse_config
from .design import (DesignMatrix, EllipsoidSpec, ellipsoid_score, envelope_spec, fit_rotation, gen_ellipsoid_design,
                     gen_gaussian_design, gen_sign_design, identity_design, make_design)
from .errors import ChainboundError
from .function_class import CompositeClass, L1Ball, LinearClass, evaluate, get_contraction, pseudometric, rademacher
from .geometry import brute_min_cover, greedy_packing, maurey_cover_bound, maurey_net, maurey_sparsify
from .rng import Pcg32, RngSeed
from .suprema import SupremumEstimate, exact_esup_small, exact_sup_linear, frank_wolfe_sup, mc_esup

__version__ = "0.1.0"
