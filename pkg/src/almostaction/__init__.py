"""Almost-actions of virtually free groups on the Cantor set: generation,
exact solving, limit extraction and matrix-level lifting."""
from .actions import CylinderAction, RotationAction, action_oracle, verify_action
from .almost import (AlmostAction, AlmostStage, DefectReport, StagePlan, approximation_defect,
                     defect_report, is_perturbation_of, multiplicative_defect, perturb_from_action,
                     pseudo_orbit, trace_orbit, uniformize_by_tree)
from .cantor import (CantorPoint, CirclePoint, ClopenPartition, Cylinder, FiniteSample, depth_partition,
                     distance, nearest_point_projection, tail_aligned_sample)
from .diagnostics import circle_orbit_almost_action, covariance_defect, equivariant_embedding_check
from .errors import *  # noqa: F401,F403
from .groups import (Amalgam, FiniteGroupTable, GroupSpec, Hnn, Leaf, Symbol, cayley_ball, free_product,
                     leaf, parse_word, reduced_word_oracle, trivial_hnn, word_str)
from .lifting import (CanonicalEmbedding, MatrixUnitFrame, adjust_partial_isometry, complete_partition,
                      conditional_fd_lift, conjugating_unitary, lift_orthogonal_sum, orthogonalize,
                      polar_partial_isometry, project_almost_projection)
from .limits import equicontinuity_modulus, extract_limit_action, solve_abstract
from .solver import (SolvedAction, StageSolution, invariant_partition, residual_finiteness_witness,
                     solve_finite, solve_stage, solve_virtually_free, verify_solution)

__version__ = "0.1.0"
