"""Right-heavy probabilistic grammars: support trees, specialized inside /
Viterbi charts, best-parse extraction, inside-outside training, and an
exhaustive enumeration oracle to check it all against."""

from .chart import InsideChart, inside, log_likelihood
from .checks import SuiteReport, equivalence_suite
from .corpus import (
    Corpus,
    CorpusRecord,
    load_corpus,
    load_vocab,
    make_bimodal,
    save_corpus,
    save_vocab,
)
from .decode import (
    DecodeResult,
    ViterbiTables,
    best_parse,
    decode,
    decode_length,
    max_tree_ratio,
    viterbi_tables,
)
from .errors import (
    EnumerationCapError,
    FileFormatError,
    GrammarDegenerateError,
    UnderivableError,
)
from .grammar import (
    EMISSION_ALL_NODES,
    EMISSION_LEAF_ONLY,
    DerivabilityReport,
    Grammar,
    GrammarPolicy,
    make_grammar,
    require_non_degenerate,
    validate_grammar,
)
from .oracle import (
    Enumeration,
    brute_best_parse,
    brute_loglik,
    brute_viterbi,
    count_trees,
    enumerate_all,
    parse_tie_key,
    viterbi_tie_key,
)
from .params import load_params, save_params
from .parse_tree import ParseTree, TreeNode, tree_to_dot, tree_to_text
from .scorers import (
    NEG_INF,
    RuleTable,
    TabularScorer,
    TrilinearScorer,
    init_tabular,
    init_trilinear,
    rule_table_from_tabular,
    rule_table_from_trilinear,
    sample,
)
from .support_tree import NO_NODE, SupportTree, SupportTreeConfig, build_support_tree
from .train import (
    ExpectedCounts,
    OutsideChart,
    TrainOptions,
    TrainResult,
    corpus_log_likelihood,
    em_step,
    expected_counts,
    loglik_gradient,
    outside,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CorpusRecord",
    "DecodeResult",
    "DerivabilityReport",
    "EMISSION_ALL_NODES",
    "EMISSION_LEAF_ONLY",
    "Enumeration",
    "EnumerationCapError",
    "ExpectedCounts",
    "FileFormatError",
    "Grammar",
    "GrammarDegenerateError",
    "GrammarPolicy",
    "InsideChart",
    "NEG_INF",
    "NO_NODE",
    "OutsideChart",
    "ParseTree",
    "RuleTable",
    "SuiteReport",
    "SupportTree",
    "SupportTreeConfig",
    "TabularScorer",
    "TrainOptions",
    "TrainResult",
    "TreeNode",
    "TrilinearScorer",
    "UnderivableError",
    "ViterbiTables",
    "best_parse",
    "brute_best_parse",
    "brute_loglik",
    "brute_viterbi",
    "build_support_tree",
    "corpus_log_likelihood",
    "count_trees",
    "decode",
    "decode_length",
    "em_step",
    "enumerate_all",
    "equivalence_suite",
    "expected_counts",
    "init_tabular",
    "init_trilinear",
    "inside",
    "load_corpus",
    "load_params",
    "load_vocab",
    "log_likelihood",
    "loglik_gradient",
    "make_bimodal",
    "make_grammar",
    "max_tree_ratio",
    "outside",
    "parse_tie_key",
    "require_non_degenerate",
    "rule_table_from_tabular",
    "rule_table_from_trilinear",
    "sample",
    "save_corpus",
    "save_params",
    "save_vocab",
    "train",
    "tree_to_dot",
    "tree_to_text",
    "validate_grammar",
    "viterbi_tables",
    "viterbi_tie_key",
]
