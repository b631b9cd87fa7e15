"""Top-level acceptance checks, one test per numbered criterion.

Every test records a one-line PASS/FAIL verdict that the terminal summary
prints after the run, then asserts on the same condition, so a red criterion
is visible both in the summary block and as a failing test.
"""

import json
import subprocess
import sys
import time

import numpy as np
import pytest
from conftest import record_acceptance, uniform_tabular

from rhpcfg import (
    EMISSION_ALL_NODES,
    EMISSION_LEAF_ONLY,
    TrainOptions,
    best_parse,
    build_support_tree,
    corpus_log_likelihood,
    decode_length,
    enumerate_all,
    equivalence_suite,
    init_tabular,
    init_trilinear,
    inside,
    load_params,
    loglik_gradient,
    make_bimodal,
    make_grammar,
    max_tree_ratio,
    rule_table_from_tabular,
    rule_table_from_trilinear,
    save_corpus,
    save_params,
    train,
    viterbi_tables,
)

CMD = [sys.executable, "-m", "rhpcfg"]


def record(number, passed, detail):
    record_acceptance(number, passed, detail)
    print("criterion %d %s: %s" % (number, "PASS" if passed else "FAIL", detail))
    return passed


@pytest.fixture(scope="session")
def oracle_suite():
    """200 seeded oracle-vs-DP instances shared by criteria 3 through 6."""
    t0 = time.perf_counter()
    report = equivalence_suite(instances=200, seed=0)
    elapsed = time.perf_counter() - t0
    return report, elapsed


def mismatches_for(report, *prefixes):
    return [m for m in report.mismatches if m.startswith(prefixes)]


def test_criterion_01_structure():
    t0 = time.perf_counter()
    failures = []
    rng = np.random.default_rng(101)
    for _ in range(50):
        src_len = int(rng.integers(1, 9))
        upsample = int(rng.integers(1, 5))
        depth = int(rng.integers(0, 4))
        tree = build_support_tree(src_len, upsample, depth)
        want = src_len * upsample * 2**depth + 2
        if tree.node_count != want:
            failures.append("(%d,%d,%d): %d != %d" % (
                src_len, upsample, depth, tree.node_count, want))
    ref = build_support_tree(3, 1, 2)
    if ref.node_count != 14:
        failures.append("reference node count %d != 14" % ref.node_count)
    if ref.main_chain != (1, 5, 9, 13):
        failures.append("reference main chain %r" % (ref.main_chain,))
    elapsed = time.perf_counter() - t0
    if elapsed >= 1.0:
        failures.append("took %.3f s (bound 1 s)" % elapsed)
    passed = record(
        1, not failures,
        failures[0] if failures else
        "50 seeded configs match the closed form; 14-node reference chain "
        "(1, 5, 9, 13); %.3f s" % elapsed,
    )
    assert passed, failures


def test_criterion_02_reference_derivation_replay():
    # eight-token sentence, nine distinct rules, exact tree recovery
    g = make_grammar(3, 1, 2, 8, closure=False, emission=EMISSION_LEAF_ONLY)
    failures = []
    ternary = {1: (0, 5), 5: (3, 9), 3: (0, 4), 9: (7, 10), 7: (0, 8)}
    for parent, pair in ternary.items():
        if pair not in g.child_set(parent):
            failures.append("pair %r illegal at node %d" % (pair, parent))
    for leaf in (4, 8, 10):
        if not g.can_emit(leaf):
            failures.append("node %d cannot take the unary rule" % leaf)
    if g.can_emit(0) or g.child_set(0) != ():
        failures.append("node 0 must rewrite only to the empty string")

    scorer = uniform_tabular(g)
    emitted_token = {1: 0, 3: 1, 4: 2, 5: 3, 7: 4, 8: 5, 9: 6, 10: 7}
    for node, token in emitted_token.items():
        scorer.emit_logits[node - 1, token] = 50.0
    for parent, pair in ternary.items():
        scorer.child_logits[parent][g.pair_index(parent, pair)] = 50.0
    table = rule_table_from_tabular(g, scorer)

    empty = (0, None, None, None)
    expected = (
        1, 0, empty,
        (5, 3,
         (3, 1, empty, (4, 2, None, None)),
         (9, 6,
          (7, 4, empty, (8, 5, None, None)),
          (10, 7, None, None))),
    )
    tree = best_parse(g, table, tuple(range(8)))
    if tree.as_nested() != expected:
        failures.append("best parse differs from the reference tree")
    if tuple(tree.alignment) != (1, 3, 4, 5, 7, 8, 9, 10):
        failures.append("alignment %r" % (tree.alignment,))
    passed = record(
        2, not failures,
        failures[0] if failures else
        "all nine rules legal; best parse reproduces the reference tree with "
        "alignment (1, 3, 4, 5, 7, 8, 9, 10)",
    )
    assert passed, failures


def test_criterion_03_inside_matches_oracle(oracle_suite):
    report, elapsed = oracle_suite
    dev = report.max_deviation.get("inside_vs_enum", 0.0)
    bad = mismatches_for(report, "inside_vs_enum")
    passed = (
        report.instances == 200
        and dev <= 1e-9
        and not bad
        and len(report.policies_seen) == 4
        and elapsed < 60.0
    )
    passed = record(
        3, passed,
        "200 instances, all four policies, both scorers: max |inside - "
        "oracle| = %.2e, %d finite/-inf disagreements, %.1f s" % (
            dev, len(bad), elapsed),
    )
    assert passed


def test_criterion_04_tree_distribution_normalizes(oracle_suite):
    report, _ = oracle_suite
    dev = report.max_deviation.get("tree_sum", 0.0)
    passed = record(
        4, dev <= 1e-9,
        "max |log sum over enumerated trees| = %.2e across %d non-degenerate "
        "instances (%d degenerate draws skipped)" % (
            dev, report.instances, report.skipped_degenerate),
    )
    assert passed


def test_criterion_05_viterbi_matches_oracle(oracle_suite):
    report, _ = oracle_suite
    dev_m = report.max_deviation.get("viterbi_vs_enum", 0.0)
    dev_a = report.max_deviation.get("viterbi_attained", 0.0)
    bad = mismatches_for(
        report, "viterbi_vs_enum", "viterbi_attained", "decode_length"
    )
    passed = dev_m <= 1e-9 and dev_a <= 1e-9 and not bad
    passed = record(
        5, passed,
        "lengths 1..6 on every instance: max |max-prob table - oracle| = "
        "%.2e, decoded string attains it to %.2e, %d structure mismatches" % (
            dev_m, dev_a, len(bad)),
    )
    assert passed


def test_criterion_06_best_parse_matches_oracle(oracle_suite):
    report, _ = oracle_suite
    dev_b = report.max_deviation.get("best_parse_vs_enum", 0.0)
    dev_s = report.max_deviation.get("tree_share_vs_enum", 0.0)
    dev_u = report.max_deviation.get("tree_share_unique", 0.0)
    bad = mismatches_for(report, "best_parse")
    range_ok = True
    g = make_grammar(2, 1, 1, 2, closure=False, emission=EMISSION_ALL_NODES)
    table = rule_table_from_tabular(g, init_tabular(g, seed=77))
    for tokens in sorted(enumerate_all(g, table).by_string)[:10]:
        ratio = max_tree_ratio(g, table, tokens)
        if not (0.0 < ratio <= 1.0 + 1e-12):
            range_ok = False
    passed = (
        dev_b <= 1e-9 and dev_s <= 1e-9 and dev_u <= 1e-12
        and not bad and range_ok
    )
    passed = record(
        6, passed,
        "argmax tree matches the oracle (max dev %.2e, %d tree mismatches); "
        "probability share in (0, 1], equals oracle to %.2e, unique-parse "
        "share off by %.2e" % (dev_b, len(bad), dev_s, dev_u),
    )
    assert passed


def test_criterion_07_gradients_match_finite_differences():
    g = make_grammar(2, 1, 1, 3, closure=False, emission=EMISSION_ALL_NODES)
    sents = [(0, 1), (2, 1, 0), (1,), (0, 2)]
    step = 1e-5
    worst = 0.0

    def check_blocks(scorer, blocks):
        nonlocal worst
        rng = np.random.default_rng(1234)
        is_trilinear = hasattr(scorer, "embeddings")

        def objective():
            if is_trilinear:
                table = rule_table_from_trilinear(g, scorer)
            else:
                table = rule_table_from_tabular(g, scorer)
            return corpus_log_likelihood(g, table, sents)

        grad = loglik_gradient(g, scorer, sents)
        nodes_with_pairs = [
            i for i in range(g.node_count) if len(g.child_set(i)) > 0
        ]
        for name in blocks:
            for _ in range(20):
                if name == "child_logits":
                    node = int(rng.choice(nodes_with_pairs))
                    idx = int(rng.integers(scorer.child_logits[node].size))
                    analytic = grad.child_logits[node][idx]
                    param = scorer.child_logits[node]
                else:
                    param = getattr(scorer, name).reshape(-1)
                    idx = int(rng.integers(param.size))
                    analytic = np.asarray(getattr(grad, name)).reshape(-1)[idx]
                orig = param[idx]
                param[idx] = orig + step
                hi = objective()
                param[idx] = orig - step
                lo = objective()
                param[idx] = orig
                fd = (hi - lo) / (2 * step)
                rel = abs(analytic - fd) / max(abs(analytic), abs(fd), 1e-6)
                worst = max(worst, rel)

    check_blocks(
        init_tabular(g, seed=5, scale=0.5),
        ("emit_logits", "child_logits", "split_logits"),
    )
    check_blocks(
        init_trilinear(g, hidden_dim=5, seed=5),
        ("embeddings", "w_out", "w_parent", "w_left", "w_right", "split_logits"),
    )
    passed = record(
        7, worst <= 1e-4,
        "central differences (step 1e-5), 20 coordinates per block, both "
        "scorers: worst relative error %.2e" % worst,
    )
    assert passed


def test_criterion_08_em_behavior():
    t0 = time.perf_counter()
    corpus = make_bimodal(
        ("A", "B", "C"), ("A", "B", "C"), ("C", "B", "A"), 50, seed=0
    )
    sents = corpus.sentences()
    g = make_grammar(3, 1, 1, 3, closure=False, emission=EMISSION_ALL_NODES)
    result = train(
        g, init_tabular(g, seed=0, scale=0.3), sents,
        TrainOptions(algo="em", iters=20),
    )
    trace = np.asarray(result.trace)
    worst_step = float(np.diff(trace).min())
    monotone = worst_step >= -1e-9

    # independent per-slot categorical baseline, fit on the same corpus
    lengths = {len(s) for s in sents}
    assert lengths == {3}
    baseline = 0.0
    for slot in range(3):
        counts = np.zeros(len(corpus.vocab))
        for s in sents:
            counts[s[slot]] += 1
        probs = counts / counts.sum()
        baseline += float((counts * np.log(np.where(probs > 0, probs, 1.0))).sum())
    baseline /= len(sents)
    model = float(trace[-1]) / len(sents)
    gap = model - baseline
    beats_baseline = gap >= 0.1

    table = rule_table_from_tabular(g, result.scorer)
    decoded = decode_length(viterbi_tables(g, table, 3), 3)
    modes = {(0, 1, 2), (2, 1, 0)}
    decodes_mode = decoded.tokens in modes

    elapsed = time.perf_counter() - t0
    in_time = elapsed < 30.0
    passed = monotone and beats_baseline and decodes_mode and in_time
    detail = (
        "monotone %s (worst step %.1e); per-sentence %.5f vs per-slot "
        "baseline %.5f, gap %.1e needs >= 0.1 (the start symbol emits the "
        "first token independently of the rest, so on this corpus the "
        "grammar's optimum equals the baseline and the gap is unattainable); "
        "decode at L=3 %s a mode; %.1f s" % (
            "yes" if monotone else "NO", worst_step, model, baseline, gap,
            "hits" if decodes_mode else "MISSES", elapsed)
    )
    passed = record(8, passed, detail)
    assert passed


def test_criterion_09_inside_scales_linearly():
    g = make_grammar(10, 4, 1, 12, closure=False, emission=EMISSION_ALL_NODES)
    assert g.node_count == 82
    table = rule_table_from_tabular(g, init_tabular(g, seed=0))
    rng = np.random.default_rng(0)

    def median_time(n, runs=20):
        times = []
        for _ in range(runs):
            tokens = rng.integers(0, 12, size=n)
            start = time.perf_counter()
            inside(g, table, tokens)
            times.append(time.perf_counter() - start)
        return float(np.median(times))

    median_time(16, runs=3)  # warm up
    t16 = median_time(16)
    t32 = median_time(32)
    ratio = t32 / t16
    passed = record(
        9, ratio <= 3.0 and t32 < 0.05,
        "82-node grammar: median inside %.2f ms at n=16, %.2f ms at n=32, "
        "ratio %.2f (bound 3), single run under 50 ms" % (
            t16 * 1e3, t32 * 1e3, ratio),
    )
    assert passed


def test_criterion_10_determinism_and_round_trips(tmp_path):
    failures = []

    # corpus writing is reproducible
    for name in ("c1.jsonl", "c2.jsonl"):
        save_corpus(
            make_bimodal(("A", "B"), ("A", "B"), ("B", "A"), 5, seed=3),
            tmp_path / name,
        )
    if (tmp_path / "c1.jsonl").read_bytes() != (tmp_path / "c2.jsonl").read_bytes():
        failures.append("corpus bytes differ across identical runs")

    # parameter files round-trip bit-exactly for both scorer kinds
    g = make_grammar(2, 1, 1, 3, closure=True, emission=EMISSION_ALL_NODES)
    for tag, scorer in (
        ("tab", init_tabular(g, seed=8)),
        ("tri", init_trilinear(g, hidden_dim=5, seed=8)),
    ):
        p1 = tmp_path / ("%s1.bin" % tag)
        p2 = tmp_path / ("%s2.bin" % tag)
        save_params(p1, g, scorer)
        g2, s2 = load_params(p1)
        save_params(p2, g2, s2)
        if p1.read_bytes() != p2.read_bytes():
            failures.append("%s params not byte-stable over save/load/save" % tag)

    # every command's stdout (and written files) byte-identical across reruns
    (tmp_path / "vocab.txt").write_text("A\nB\nC\n", encoding="utf-8")
    save_corpus(
        make_bimodal(("A", "B", "C"), ("A", "B", "C"), ("C", "B", "A"), 5, seed=0),
        tmp_path / "corpus.jsonl",
    )
    gflags = ["--src-len", "3", "--lambda", "1", "--layers", "1",
              "--emission", "all"]
    base = gflags + ["--seed", "7"]
    commands = {
        "info": ["info"] + gflags + ["--vocab", "vocab.txt"],
        "train": ["train"] + base + [
            "--vocab", "vocab.txt", "--corpus", "corpus.jsonl", "--algo", "em",
            "--iters", "5", "--params", "params.bin", "--trace-out", "trace.csv",
        ],
        "loglik": ["loglik"] + base + [
            "--vocab", "vocab.txt", "--corpus", "corpus.jsonl"],
        "parse": ["parse"] + base + [
            "--vocab", "vocab.txt", "--corpus", "corpus.jsonl"],
        "decode": ["decode"] + base + [
            "--vocab", "vocab.txt", "--length-min", "1", "--length-max", "5"],
        "sample": ["sample"] + base + ["--vocab", "vocab.txt",
                                       "--num-samples", "4"],
        "oracle-check": ["oracle-check", "--instances", "4", "--seed", "1"],
    }
    for name, args in commands.items():
        outs = []
        files = []
        for _ in range(2):
            res = subprocess.run(
                CMD + args, cwd=tmp_path, capture_output=True, timeout=300
            )
            if res.returncode != 0:
                failures.append("%s exited %d" % (name, res.returncode))
            outs.append(res.stdout)
            if name == "train":
                files.append(
                    ((tmp_path / "params.bin").read_bytes(),
                     (tmp_path / "trace.csv").read_bytes())
                )
        if outs[0] != outs[1]:
            failures.append("%s stdout differs across identical runs" % name)
        if files and files[0] != files[1]:
            failures.append("trained parameter/trace files differ across runs")

    passed = record(
        10, not failures,
        failures[0] if failures else
        "corpora, trained parameters, and all seven command outputs are "
        "byte-identical across reruns; save/load round-trips exact",
    )
    assert passed, failures
