"""Curtain models of concrete CAT(0) spaces.

Curtains are thick walls dual to geodesics; chains of curtains induce the
hyperbolic metrics d_L and their weighted sum D (the curtain model). The
package provides five space backends, the curtain/chain combinatorics, a
brute-force oracle for family-relative ground truth, interval estimators
for d_L and D, isometry classification in both the base space and the
model, and a scenario runner with bundled experiments.
"""

__version__ = "0.1.0"

from .spaces import (AnnulusCover, Euclidean, Geodesic, Glued, GluingSpec,
                     HalfPlane, Isometry, Point, Product, Space,
                     SpaceDomainError, GeodesicExitsSpace,
                     horizontal_translation, load_space_document,
                     point_from_spec, point_to_raw, scaling, space_from_spec)
from .curtains import (Chain, ChainError, Curtain, FalsificationEvent, Side,
                       chain_from_spec, chain_separates, check_backtracking,
                       curtains_disjoint, curtains_meet, dual_chain,
                       glue_chains, separates, side_of, support_points,
                       validate_chain)
from .separation import (SeparationVerdict, annulus_certified_wall_gap,
                         build_certified_chain, dualize_chain,
                         h2_certified_gap, l_separation, pair_verdict)
from .oracle import (CurtainFamily, GeneratorSpec, SeparationGraph,
                     build_family, build_separation_graph,
                     exhaustive_longest_chain, family_from_spec,
                     longest_L_chain, longest_certified_chain,
                     refute_or_certify_pairwise)
from .metrics import (AnalyticCap, D_estimate, IntervalEstimate,
                      ModelDiagnostics, SearchBudget, WeightSequence,
                      analytic_cap, d_infinity, d_L_bounds, d_L_profile,
                      four_point_delta, rough_geodesic_defects,
                      weights_from_spec)
from .dynamics import (BallSampleSpec, ClassificationModel, ClassificationX,
                       ContractingEvidence, ContractionReport,
                       TranslationEstimate, classify_in_X, classify_in_model,
                       contracting_isometry_test, contraction_constant,
                       contraction_from_chain, translation_length)
from .scenarios import (Report, ScenarioError, list_bundled, load_bundled,
                        run_bundled, run_scenario, validate_scenario)
