"""Fairness-aware spectral graph filter design and evaluation."""

from .data import Dataset, SbmSpec, SignalSet, generate_sbm, load_dataset, save_dataset, split
from .design import (DesignConfig, FilterSpec, ObjectiveReport, all_pass, design_closed_form,
                     design_direct, design_matrix, design_polynomial, filter_from_json,
                     filter_to_json, monomial_coeffs, objective_report)
from .filtering import EffectiveOperator, apply_frequency, apply_vertex_polynomial, effective_operator
from .graph import Graph, NormalizedOperators, build_graph, normalized_operators
from .learners import (GcnConfig, GcnModel, LabelPropConfig, LabelPropResult, gcn_scores,
                       label_propagation, postprocess_predictions, train_gcn)
from .metrics import (BiasContext, EvalReport, bias_context, bias_metric, bias_metric_dense,
                      bias_metric_upper_bound, group_fairness, total_correlation)
from .spectral import SpectralDecomposition, decompose, gft, igft, spectrum_table

__version__ = "0.1.0"
