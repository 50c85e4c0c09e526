"""Discrete optimal transport for domain adaptation, with tools to evaluate
Wasserstein generalization bounds on synthetic data."""

from ._backend import BACKEND
from .barycenter import BarycenterConfig, barycenter, multisource_adapt
from .bounds import (BoundReport, ConcentrationParams, bound_combined,
                     bound_multisource, bound_unsupervised, c1_combined, c1_multi,
                     c2_pair, concentration_decay_experiment, concentration_term)
from .cost import CostSpec, cost_matrix
from .divergences import ckp_chain_audit, kl_divergence, total_variation
from .learners import (Hypothesis, combined_error, error, estimate_lambda_joint,
                       train, weighted_multisource_error)
from .mapping import adapt, barycentric_map
from .measures import (DatasetConfig, DiscreteMeasure, LabeledSample, generate,
                       load_csv, make_empirical, save_csv)
from .ot_entropic import EntropicConfig, GroupRegConfig, sinkhorn, sinkhorn_group
from .ot_exact import Coupling, OtSolution, SolverError, solve_exact, w1

__version__ = "0.1.0"
