"""gossiplab: asynchronous randomized gossip averaging under unreliable
communication links, with exact small-instance oracles and closed-form bound
checks."""

from ._kernels import backend_name, get_backend
from .engine import (EnsembleStats, TrialConfig, TrialResult, apply_updates,
                     estimate_tcom, estimate_tcom_table, run_ensemble,
                     run_trial, run_trials, step, tcom_bound_dependent,
                     tcom_bound_dependent_offset, tcom_bound_independent)
from .graphs import (Digraph, SelectionMatrix, StructuralConstants, converse,
                     diameter, digraph, induced_graph, is_double_connected,
                     is_quasi_strongly_connected, is_strongly_connected,
                     is_weakly_connected, structural_constants)
from .matrices import (DyadicVector, StochasticMatrix, UpdateMatrix,
                       asymmetric_update, delta_coefficient,
                       expected_update_dependent, expected_update_independent,
                       identity_update, is_finite_consensus, is_scrambling,
                       lambda_coefficient, product_chain,
                       second_largest_eigenvalue_symmetric, symmetric_update)
from .process import (RandomStream, Schedule, ScheduleClass, classify,
                      derive_generator, sample_communication, sample_pair,
                      success_divergent, success_times)
from .verify import (EnumerationReport, Prop1Counterexample, StallBound,
                     chain_contraction_check, chain_floor_union_check,
                     enumerate_products, pick_stall_pair, prop1_counterexample,
                     scrambling_block_check, stall_probability_bound)

__version__ = "0.1.0"
