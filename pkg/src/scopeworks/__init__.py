"""scopeworks: cue detection and scope resolution as token classification.

The toolkit covers the full pipeline: parsing annotated corpora into a
canonical format, encoding the cue and scope tasks as per-word labels,
aligning word labels with subword tokens, training a small transformer
token classifier (or replaying probabilities produced by an external
model), aggregating per-token probabilities back to word-level labels,
and scoring word-level precision/recall/F1 under single-dataset,
inter-dataset and joint multi-dataset protocols.
"""

__version__ = "0.1.0"

from .corpus import (
    AnnotatedSentence,
    Corpus,
    CueAnnotation,
    ScopeAnnotation,
    corpus_stats,
    load_corpus,
    parse_column_format,
    parse_inline_xml,
    read_canonical,
    save_corpus,
    segment_words,
    write_canonical,
)
from .encoding import (
    CueTaskInstance,
    ScopeTaskInstance,
    decode_cue_predictions,
    encode_cue_task,
    encode_scope_task,
    strip_markers,
)
from .errors import ScopeworksError
from .metrics import (
    MetricsReport,
    WordPredictions,
    average_runs,
    cross_matrix,
    exact_match_fraction,
    score_task,
)
from .model import (
    ClassifierConfig,
    ReplayBackend,
    TokenClassifier,
    TrainConfig,
    TrainedModel,
    default_class_weights,
    load_checkpoint,
    save_checkpoint,
    train,
    weighted_ce_loss,
    write_probability_file,
)
from .tokenization import (
    AGGREGATIONS,
    CUE_CLASS_ORDER,
    SCOPE_CLASS_ORDER,
    ProbTable,
    TokenizedInstance,
    WordPieceTokenizer,
    aggregate_average,
    aggregate_first,
    tokenize_instance,
    word_level_outputs,
)
from .experiment import (
    DatasetSpec,
    ExperimentConfig,
    SplitSpec,
    prepare_joint,
    run,
    split,
)
from .synthetic import make_rule_corpus

__all__ = [
    "__version__",
    # corpus
    "AnnotatedSentence", "Corpus", "CueAnnotation", "ScopeAnnotation",
    "parse_inline_xml", "parse_column_format", "corpus_stats",
    "read_canonical", "write_canonical", "load_corpus", "save_corpus", "segment_words",
    # encoding
    "CueTaskInstance", "ScopeTaskInstance", "encode_cue_task", "encode_scope_task",
    "decode_cue_predictions", "strip_markers",
    # tokenization
    "WordPieceTokenizer", "TokenizedInstance", "ProbTable", "tokenize_instance",
    "aggregate_average", "aggregate_first", "word_level_outputs", "AGGREGATIONS",
    "CUE_CLASS_ORDER", "SCOPE_CLASS_ORDER",
    # model
    "ClassifierConfig", "TokenClassifier", "TrainConfig", "TrainedModel", "train",
    "default_class_weights", "weighted_ce_loss", "save_checkpoint", "load_checkpoint",
    "ReplayBackend", "write_probability_file",
    # metrics
    "WordPredictions", "MetricsReport", "score_task", "cross_matrix", "average_runs",
    "exact_match_fraction",
    # experiment
    "SplitSpec", "DatasetSpec", "ExperimentConfig", "split", "prepare_joint", "run",
    # synthetic
    "make_rule_corpus",
    # errors
    "ScopeworksError",
]
