"""connprobe: probe how sentence-embedding models use discourse connectives.

Pipeline: tag typed connectives in a labeled corpus, embed sentences with
word-order-invariant encoders (BOW / SIF / concatenated power means) or
order-aware ones served from files or an HTTP endpoint, perturb test
sentences by masking or switching connectives, train a fixed logistic-
regression probe, and report connective-specific error-rate deltas with
one-tailed Welch t-tests.
"""

from .analysis import (
    DeltaRecord,
    EvalRecord,
    StatResult,
    aggregate_runs,
    connective_error,
    delta,
    family_average,
    overall_error,
    perturbation_delta,
    read_store,
    render_report,
    t_test_one_tailed,
)
from .corpus import (
    Dataset,
    DatasetSpec,
    Example,
    Subset,
    TaskKind,
    build_subsets,
    generate_coordinv,
    invert_clauses,
    load_dataset,
)
from .embed import (
    EmbeddingSpace,
    PMeanConfig,
    PrecomputedStore,
    SentenceVector,
    SifConfig,
    WO_AWARE,
    WO_INVARIANT,
    check_remote_health,
    embed_bow,
    embed_pair,
    embed_pmean,
    embed_remote,
    embed_sif,
    load_vectors,
    power_mean,
    sif_weight,
)
from .encoders import EmbedderSpec, make_encoder
from .errors import ConnprobeError
from .lexicon import (
    ConnectiveLexicon,
    ConnectiveType,
    FrequencyFilterConfig,
    TaggedSentence,
    default_lexicon_path,
    filter_frequent,
    load_lexicon,
    tag_text,
    tokenize,
)
from .perturb import ConditionPlan, Perturbation, apply_plan, omit_connective, switch_connective
from .probe import Probe, ProbeHyper, error_rate, train_probe

__version__ = "0.1.0"

__all__ = [
    "ConditionPlan",
    "ConnectiveLexicon",
    "ConnectiveType",
    "ConnprobeError",
    "Dataset",
    "DatasetSpec",
    "DeltaRecord",
    "EmbedderSpec",
    "EmbeddingSpace",
    "EvalRecord",
    "Example",
    "FrequencyFilterConfig",
    "PMeanConfig",
    "Perturbation",
    "PrecomputedStore",
    "Probe",
    "ProbeHyper",
    "SentenceVector",
    "SifConfig",
    "StatResult",
    "Subset",
    "TaggedSentence",
    "TaskKind",
    "WO_AWARE",
    "WO_INVARIANT",
    "aggregate_runs",
    "apply_plan",
    "build_subsets",
    "check_remote_health",
    "connective_error",
    "default_lexicon_path",
    "delta",
    "embed_bow",
    "embed_pair",
    "embed_pmean",
    "embed_remote",
    "embed_sif",
    "error_rate",
    "family_average",
    "filter_frequent",
    "generate_coordinv",
    "invert_clauses",
    "load_dataset",
    "load_lexicon",
    "load_vectors",
    "make_encoder",
    "omit_connective",
    "overall_error",
    "perturbation_delta",
    "power_mean",
    "read_store",
    "render_report",
    "sif_weight",
    "switch_connective",
    "t_test_one_tailed",
    "tag_text",
    "tokenize",
    "train_probe",
]
