"""State-sequence analysis of longitudinal categorical pathways.

Encode cohorts as equal-length state sequences, compute longitudinal
indicators and pairwise dissimilarities, cluster typical trajectories,
profile the clusters, relate them to a time-to-event outcome, and render
the standard sequence plots. A seeded synthetic-cohort generator makes
the whole pipeline reproducible at desk scale.
"""

__version__ = "0.1.0"

from .clustering import (
    ClusterAssignment,
    Dendrogram,
    cut_tree,
    silhouette,
    silhouette_profile,
    ward_cluster,
)
from .core import (
    Alphabet,
    SequenceSet,
    SpellRecord,
    StateSequence,
    parse_wide,
    read_wide_csv,
    spells_to_wide,
    wide_to_spells,
)
from .descriptives import (
    FrequencyTable,
    StateDistribution,
    TransitionMatrix,
    cluster_profile,
    frequency_table,
    modal_sequence,
    representativeness,
    state_distribution,
    transition_matrix,
)
from .dissimilarity import (
    DissimilarityMatrix,
    SubstitutionCostMatrix,
    TimeVaryingCosts,
    constant_costs,
    dhd_costs,
    dhd_distance,
    hamming_distance,
    lcs_distance,
    lcs_length,
    om_distance,
    pairwise_matrix,
    transition_rate_costs,
    triangle_audit,
)
from .errors import ComputationError, SeqpathError, ValidationError
from .indicators import (
    IndicatorRow,
    count_distinct_subsequences,
    entropy,
    indicator_table,
    turbulence,
)
from .plots import PlotConfig, distribution_plot, frequency_plot, index_plot, modal_plot
from .survival import (
    AssociationReport,
    CoxFit,
    SurvivalRecord,
    build_design,
    cox_fit,
    univariable_and_adjusted,
)
from .synth import (
    GeneratorSpec,
    generate_mixture,
    generate_outcomes,
    generate_sequences,
    treatment_mixture_specs,
    treatment_pathway_spec,
)

__all__ = [name for name in dir() if not name.startswith("_")]
