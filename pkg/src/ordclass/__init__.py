"""Bayesian classification of one-dimensional data into runs of sorted values."""

from .errors import DataError, InfeasibleError, InvariantError
from .exact import (
    ExactPosterior,
    MdpPosterior,
    SetPartition,
    enumerate_compositions,
    enumerate_set_partitions,
    exact_posterior,
    mdp_exact_posterior,
    segment_posterior,
    top_n,
)
from .mcmc import McmcConfig, McmcSummary, run_chain, run_chains
from .model import (
    Composition,
    GroupStats,
    Hyperparams,
    OrderedDataset,
    group_stats,
    log_marginal_term,
    log_unnorm_prob,
    log_weight_term,
    prepare_dataset,
)
from .ward import Dendrogram, cut, ward_linkage

__version__ = "0.1.0"
