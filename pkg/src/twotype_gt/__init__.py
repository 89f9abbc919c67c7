"""Two-type group testing: AG(3, q) pooling designs, belief-propagation
decoding and worst-rank screening experiments."""

from .bp import BpSettings, Marginals, exact_posterior, run_bp
from .gf_geometry import FieldElement, TransversalLine, line_point_on_plane, plane_incidence
from .harness import ExperimentConfig, rank_items, run_experiment, worst_rank
from .pooling import (IncidenceMatrix, PoolingDesign, build_design, is_2d_separable, is_disjunct,
                      is_separable_bar, stack_planes, unique_collinearity_check)
from .sim import GroundTruth, NoiseModel, Observations, Priors

__version__ = "0.1.0"
