"""Recovery of several disjoint sparse supports from compressed samples."""

from .boosting import BoostResult, MatchResult, boosted_recover, match_distance
from .estimator import (AffinityMatrix, ProxyBatch, RecoveryOptions, RecoveryResult,
                        affinity_matrix, cluster_supports, estimate_union_size, mean_proxy,
                        recover, recover_from_proxies, recover_overlapping_two, recover_union,
                        variance_proxies, variance_proxy)
from .model import (Dataset, Ensemble, ModelParams, SupportTuple, draw_measurement_matrix,
                    draw_sample, generate_batch, make_supports, sample_proxies)
from .numerics import ConvergenceError, EigenDecomposition, KMeansResult, lloyd_kmeans, sym_eig, top_eigenvectors
from .theory import (BlockMatrixSpec, BlockSpectrum, EnsembleMoments, GammaTerms, block_matrix,
                     block_spectrum, expected_affinity, gamma_terms, moment_value,
                     monte_carlo_affinity, operator_norm_bound, quadratic_form_second_moment,
                     sample_complexity_bounds)

__all__ = [
    "BoostResult", "MatchResult", "boosted_recover", "match_distance",
    "AffinityMatrix", "ProxyBatch", "RecoveryOptions", "RecoveryResult", "affinity_matrix",
    "cluster_supports", "estimate_union_size", "mean_proxy", "recover", "recover_from_proxies",
    "recover_overlapping_two", "recover_union", "variance_proxies", "variance_proxy",
    "Dataset", "Ensemble", "ModelParams", "SupportTuple", "draw_measurement_matrix",
    "draw_sample", "generate_batch", "make_supports", "sample_proxies",
    "ConvergenceError", "EigenDecomposition", "KMeansResult", "lloyd_kmeans", "sym_eig",
    "top_eigenvectors", "BlockMatrixSpec", "BlockSpectrum", "EnsembleMoments", "GammaTerms",
    "block_matrix", "block_spectrum", "expected_affinity", "gamma_terms", "moment_value",
    "monte_carlo_affinity", "operator_norm_bound", "quadratic_form_second_moment",
    "sample_complexity_bounds",
]
