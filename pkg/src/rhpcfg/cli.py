"""Command-line interface.

Commands: info, train, loglik, parse, decode, sample, oracle-check.
Results go to stdout as JSON lines; the resolved configuration and
diagnostics go to stderr.  Exit codes: 0 success, 1 usage error, 2 data
error (bad files, degenerate grammar, underivable input), 3 oracle-check
property violation.  Every command is deterministic given its flags, seeds
included, so identical invocations produce byte-identical stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .chart import inside
from .checks import equivalence_suite
from .corpus import load_corpus, load_vocab
from .decode import DECODE_MODES, best_parse, decode
from .errors import FileFormatError, GrammarDegenerateError, UnderivableError
from .fileio import atomic_write_text
from .grammar import (
    EMISSION_ALL_NODES,
    EMISSION_LEAF_ONLY,
    make_grammar,
    validate_grammar,
)
from .parse_tree import tree_to_dot, tree_to_text
from .params import load_params, save_params
from .scorers import (
    init_tabular,
    init_trilinear,
    rule_table_from_tabular,
    rule_table_from_trilinear,
    sample,
    TabularScorer,
)
from .train import TrainOptions, train

NEG_INF = float("-inf")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; this CLI reserves 2 for
    # data errors, so route usage problems through an exception instead
    def error(self, message):
        raise _UsageError(message)


def _emit(obj, stream=None):
    print(json.dumps(obj, sort_keys=True, separators=(",", ":")), file=stream or sys.stdout)


def _log_config(args):
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    _emit({"resolved": resolved}, stream=sys.stderr)


def _json_float(value):
    return None if value == NEG_INF else float(value)


def _add_grammar_flags(parser):
    parser.add_argument("--src-len", type=int, default=None, help="source length")
    parser.add_argument(
        "--lambda", dest="upsample", type=int, default=4, help="upsample factor (default 4)"
    )
    parser.add_argument(
        "--layers", dest="depth", type=int, default=1, help="prefix-tree depth (default 1)"
    )
    parser.add_argument("--closure", choices=("on", "off"), default="off")
    parser.add_argument(
        "--emission", choices=("leaf", "all"), default="leaf", help="which nodes may end a branch"
    )
    parser.add_argument("--vocab", default=None, help="vocabulary file (one token per line)")
    parser.add_argument(
        "--vocab-size", type=int, default=None, help="vocabulary size when no --vocab is given"
    )


def _read_vocab(args):
    if args.vocab is not None:
        return load_vocab(args.vocab)
    return None


def _grammar_from_flags(args, vocab):
    if args.src_len is None:
        raise _UsageError("--src-len is required when no parameter file provides the grammar")
    if vocab is not None:
        vocab_size = len(vocab)
    elif args.vocab_size is not None:
        vocab_size = args.vocab_size
    else:
        raise _UsageError("need --vocab or --vocab-size to size the grammar")
    return make_grammar(
        src_len=args.src_len,
        upsample=args.upsample,
        depth=args.depth,
        vocab_size=vocab_size,
        closure=args.closure == "on",
        emission=EMISSION_LEAF_ONLY if args.emission == "leaf" else EMISSION_ALL_NODES,
    )


def _init_scorer(grammar, args):
    if args.scorer == "tabular":
        return init_tabular(grammar, seed=args.seed)
    return init_trilinear(grammar, hidden_dim=args.hidden_dim, seed=args.seed)


def _table_for(grammar, scorer):
    if isinstance(scorer, TabularScorer):
        return rule_table_from_tabular(grammar, scorer)
    return rule_table_from_trilinear(grammar, scorer)


def _load_model(args, vocab):
    """(grammar, scorer) from --params when given, else a seeded random
    scorer over the flag-built grammar."""
    if args.params is not None:
        grammar, scorer = load_params(args.params)
        if vocab is not None and len(vocab) != grammar.vocab_size:
            raise FileFormatError(
                "vocabulary has %d tokens but the parameter file says %d"
                % (len(vocab), grammar.vocab_size)
            )
        return grammar, scorer
    grammar = _grammar_from_flags(args, vocab)
    return grammar, _init_scorer(grammar, args)


def cmd_info(args):
    _log_config(args)
    vocab = _read_vocab(args)
    grammar = _grammar_from_flags(args, vocab)
    report = validate_grammar(grammar)
    _emit(
        {
            "node_count": grammar.node_count,
            "prefix_cap": grammar.tree.prefix_cap,
            "main_chain": list(grammar.tree.main_chain),
            "rule_space_size": grammar.rule_space_size(),
            "degenerate": report.degenerate,
            "derivable": list(report.derivable),
            "min_len": list(report.min_len),
            "max_len": list(report.max_len),
        }
    )
    return 2 if report.degenerate else 0


def cmd_train(args):
    _log_config(args)
    if args.algo == "em" and args.scorer != "tabular":
        raise _UsageError("--algo em requires --scorer tabular")
    vocab = load_vocab(args.vocab)
    grammar = _grammar_from_flags(args, vocab)
    corpus = load_corpus(args.corpus, vocab)
    sentences = corpus.sentences()
    scorer = _init_scorer(grammar, args)
    result = train(
        grammar,
        scorer,
        sentences,
        TrainOptions(algo=args.algo, iters=args.iters, learning_rate=args.lr, seed=args.seed),
    )
    save_params(args.params, grammar, result.scorer)
    if args.trace_out is not None:
        lines = ["iteration,loglik"]
        lines += ["%d,%r" % (i, value) for i, value in enumerate(result.trace)]
        atomic_write_text(args.trace_out, "\n".join(lines) + "\n")
    _emit(
        {
            "algo": args.algo,
            "iterations": args.iters,
            "sentences": len(sentences),
            "initial_loglik": result.trace[0],
            "final_loglik": result.trace[-1],
            "params": args.params,
        }
    )
    return 0


def cmd_loglik(args):
    _log_config(args)
    vocab = load_vocab(args.vocab)
    grammar, scorer = _load_model(args, vocab)
    table = _table_for(grammar, scorer)
    corpus = load_corpus(args.corpus, vocab)
    for index, record in enumerate(corpus.records):
        value = inside(grammar, table, record.tokens).root_loglik
        _emit({"index": index, "loglik": _json_float(value)})
    return 0


def cmd_parse(args):
    _log_config(args)
    vocab = load_vocab(args.vocab)
    grammar, scorer = _load_model(args, vocab)
    table = _table_for(grammar, scorer)
    corpus = load_corpus(args.corpus, vocab)
    if args.dot_out is not None:
        os.makedirs(args.dot_out, exist_ok=True)
    for index, record in enumerate(corpus.records):
        try:
            tree = best_parse(grammar, table, record.tokens)
        except UnderivableError:
            raise UnderivableError("sentence %d has no parse under this grammar" % index)
        total = inside(grammar, table, record.tokens).root_loglik
        _emit(
            {
                "index": index,
                "loglik": total,
                "best_parse_loglik": tree.log_prob,
                "max_tree_ratio": float(np.exp(tree.log_prob - total)),
                "alignment": list(tree.alignment),
                "tree": tree_to_text(tree, vocab),
            }
        )
        if args.dot_out is not None:
            path = os.path.join(args.dot_out, "parse_%d.dot" % index)
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(tree_to_dot(tree, vocab))
    return 0


def cmd_decode(args):
    _log_config(args)
    vocab = _read_vocab(args)
    grammar, scorer = _load_model(args, vocab)
    table = _table_for(grammar, scorer)
    report = validate_grammar(grammar)
    max_len = args.length_max if args.length_max is not None else report.max_len[1]
    min_len = args.length_min
    result = decode(grammar, table, min_len, max_len, mode=args.rerank)
    tokens = [vocab[t] for t in result.tokens] if vocab is not None else list(result.tokens)
    _emit(
        {
            "length": result.length,
            "log_prob": result.log_prob,
            "score": result.score,
            "mode": result.mode,
            "tokens": tokens,
        }
    )
    return 0


def cmd_sample(args):
    _log_config(args)
    vocab = _read_vocab(args)
    grammar, scorer = _load_model(args, vocab)
    table = _table_for(grammar, scorer)
    for index in range(args.num_samples):
        tree = sample(grammar, table, seed=args.seed + index)
        tokens = [vocab[t] for t in tree.tokens] if vocab is not None else list(tree.tokens)
        _emit({"index": index, "log_prob": tree.log_prob, "tokens": tokens})
    return 0


def cmd_oracle_check(args):
    _log_config(args)
    report = equivalence_suite(instances=args.instances, seed=args.seed)
    for name in sorted(report.max_deviation):
        _emit({"property": name, "max_abs_deviation": report.max_deviation[name]})
    _emit(
        {
            "instances": report.instances,
            "skipped_degenerate": report.skipped_degenerate,
            "policies_seen": sorted(
                "%s/%s" % ("on" if c else "off", e) for c, e in report.policies_seen
            ),
            "mismatches": report.mismatches,
            "ok": report.ok(),
        }
    )
    return 0 if report.ok() else 3


def _build_parser():
    parser = _Parser(prog="rhpcfg", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("info", parents=[], help="grammar geometry and derivability report")
    _add_grammar_flags(p)
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("train", help="fit a scorer to a corpus")
    _add_grammar_flags(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--scorer", choices=("tabular", "trilinear"), default="tabular")
    p.add_argument("--hidden-dim", type=int, default=16)
    p.add_argument("--algo", choices=("em", "sgd"), default="em")
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", required=True, help="output parameter file")
    p.add_argument("--trace-out", default=None, help="per-iteration log-likelihood CSV")
    p.set_defaults(func=cmd_train)

    for name, handler in (("loglik", cmd_loglik), ("parse", cmd_parse)):
        p = sub.add_parser(name, help="score (and for parse, analyze) each corpus sentence")
        _add_grammar_flags(p)
        p.add_argument("--corpus", required=True)
        p.add_argument("--params", default=None, help="parameter file (else a seeded random scorer)")
        p.add_argument("--scorer", choices=("tabular", "trilinear"), default="tabular")
        p.add_argument("--hidden-dim", type=int, default=16)
        p.add_argument("--seed", type=int, default=0)
        if name == "parse":
            p.add_argument("--dot-out", default=None, help="directory for Graphviz trees")
        p.set_defaults(func=handler)
    # loglik/parse read the vocabulary through --vocab; make it mandatory there
    # by validating inside the handlers (argparse default is None)

    p = sub.add_parser("decode", help="best string by length-conditioned Viterbi")
    _add_grammar_flags(p)
    p.add_argument("--params", default=None)
    p.add_argument("--scorer", choices=("tabular", "trilinear"), default="tabular")
    p.add_argument("--hidden-dim", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length-min", type=int, default=1)
    p.add_argument("--length-max", type=int, default=None)
    p.add_argument("--rerank", choices=DECODE_MODES, default="per_token")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sample", help="draw parse trees from the model")
    _add_grammar_flags(p)
    p.add_argument("--params", default=None)
    p.add_argument("--scorer", choices=("tabular", "trilinear"), default="tabular")
    p.add_argument("--hidden-dim", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-samples", type=int, default=1)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("oracle-check", help="cross-check charts against enumeration")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print("usage error: %s" % err, file=sys.stderr)
        return 1
    except SystemExit as err:  # --help
        return 0 if err.code in (None, 0) else 1
    if not hasattr(args, "func"):
        print("usage error: a command is required (see --help)", file=sys.stderr)
        return 1
    try:
        if args.func in (cmd_train, cmd_loglik, cmd_parse) and args.vocab is None:
            raise _UsageError("--vocab is required for this command")
        return args.func(args)
    except _UsageError as err:
        print("usage error: %s" % err, file=sys.stderr)
        return 1
    except (
        FileFormatError,
        GrammarDegenerateError,
        UnderivableError,
        OSError,
        ValueError,
    ) as err:
        print("error: %s" % err, file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
