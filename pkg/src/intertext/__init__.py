"""Detection engine and benchmark harness for intertextual links.

Compares a chronologically later query document against an earlier source
document segment by segment, through rule-based n-gram matching, dense
retrieval, pair classification, or a retrieve-and-rerank cascade, and
evaluates pipelines with pair-grid error rates and ranked-retrieval metrics.
"""

from .corpus import (
    CorpusStats,
    Document,
    LinkCategory,
    LinkRecord,
    Role,
    Segment,
    corpus_stats,
    load_document,
    load_links,
    tokenize,
    write_document,
    write_links,
)
from .errors import (
    ConfigurationError,
    EmptyDocumentError,
    IntertextError,
    ProviderContractError,
    SchemaError,
    TransportError,
    UndefinedMetricError,
    ValidationError,
)
from .evaluation import (
    ConfusionCounts,
    EvalReport,
    FoldSpec,
    SamplingStrategy,
    TrainingPair,
    build_eval_docs,
    classification_metrics,
    confusion,
    evaluate_folds,
    evaluate_run,
    export_training_pairs,
    global_rates,
    ir_metrics,
    make_folds,
    per_query_mean,
    sample_negatives,
)
from .matcher import (
    FilterConfig,
    MatchParams,
    RawCandidate,
    apply_filters,
    default_stoplist,
    find_raw_candidates,
)
from .pipeline import (
    Architecture,
    CandidateMatch,
    RunConfig,
    execute,
    run_classification_only,
    run_ngram,
    run_retrieval_only,
    run_retrieve_rerank,
)
from .rerank import (
    Decision,
    Label,
    PairClassifierProvider,
    PairInput,
    TokenJaccardClassifier,
    build_pair_input,
    classify_pairs,
    decide,
)
from .retrieval import (
    EmbeddingProvider,
    HashEmbeddingProvider,
    RankedCandidate,
    VectorIndex,
    build_index,
    embed_segments,
    topk,
)

__version__ = "0.1.0"
