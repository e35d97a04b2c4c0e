"""Bayesian semiparametric gene-gene / gene-environment interaction analysis."""

from .data import (
    DataFormatError,
    Dimensions,
    EnvCovariates,
    GenotypeDataset,
    NullModelHyper,
    ScenarioConfig,
    generate_null_dataset,
    generate_scenario_dataset,
    load_environment,
    load_genotypes,
    write_environment,
    write_genotypes,
)
from .engine import ChainConfig, TraceStore, partition_triplets, run_chain, summarize_trace
from .hypotheses import (
    ClusteringPartition,
    TestReport,
    ThresholdSet,
    calibrate_thresholds,
    clustering_distance,
    detect_dpl,
    gene_gene_correlation_summary,
    min_permutation_distance,
    partition_of,
    run_test_battery,
    statistic_stream,
)
from .interaction import InteractionState, compute_kernel, log_joint, matrix_normal_logpdf
from .mixture import BetaHyper, MixtureState, polya_urn_q0

__all__ = [
    "BetaHyper",
    "ChainConfig",
    "ClusteringPartition",
    "DataFormatError",
    "Dimensions",
    "EnvCovariates",
    "GenotypeDataset",
    "InteractionState",
    "MixtureState",
    "NullModelHyper",
    "ScenarioConfig",
    "TestReport",
    "ThresholdSet",
    "TraceStore",
    "calibrate_thresholds",
    "clustering_distance",
    "compute_kernel",
    "detect_dpl",
    "gene_gene_correlation_summary",
    "generate_null_dataset",
    "generate_scenario_dataset",
    "load_environment",
    "load_genotypes",
    "log_joint",
    "matrix_normal_logpdf",
    "min_permutation_distance",
    "partition_of",
    "partition_triplets",
    "polya_urn_q0",
    "run_chain",
    "run_test_battery",
    "statistic_stream",
    "summarize_trace",
    "write_environment",
    "write_genotypes",
]
