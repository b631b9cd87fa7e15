"""Rule tables: normalization, derivability masking, mixing, sampling."""

import numpy as np
import pytest
from conftest import uniform_table, uniform_tabular

from rhpcfg import (
    EMISSION_ALL_NODES,
    EMISSION_LEAF_ONLY,
    GrammarDegenerateError,
    NEG_INF,
    init_tabular,
    init_trilinear,
    make_grammar,
    rule_table_from_tabular,
    rule_table_from_trilinear,
    sample,
    validate_grammar,
)


def seeded_tables(seed=0):
    """A few (grammar, table) pairs across policies and scorer kinds."""
    out = []
    rng = np.random.default_rng(seed)
    combos = [
        (1, 1, 1, 2, True, EMISSION_ALL_NODES),
        (2, 1, 1, 3, False, EMISSION_LEAF_ONLY),
        (1, 2, 1, 2, False, EMISSION_ALL_NODES),
        (1, 1, 2, 3, True, EMISSION_LEAF_ONLY),
        (3, 1, 0, 2, False, EMISSION_ALL_NODES),
    ]
    for idx, (s, u, d, v, closure, emission) in enumerate(combos):
        g = make_grammar(s, u, d, v, closure=closure, emission=emission)
        seed_i = int(rng.integers(0, 2**31))
        if idx % 2 == 0:
            table = rule_table_from_tabular(g, init_tabular(g, seed=seed_i))
        else:
            table = rule_table_from_trilinear(
                g, init_trilinear(g, hidden_dim=6, seed=seed_i)
            )
        out.append((g, table))
    return out


def test_emission_rows_normalize():
    # a node gets an emission distribution only when it has at least one live
    # rule: it can emit directly, or some child pair is itself derivable
    for g, table in seeded_tables():
        assert np.all(table.emit_logprob[0] == NEG_INF)
        for i in range(1, g.node_count):
            row = table.emit_logprob[i]
            usable = g.can_emit(i) or bool(np.isfinite(table.pair_logprob[i]).any())
            if usable:
                assert abs(np.logaddexp.reduce(row)) < 1e-12
            else:
                assert np.all(row == NEG_INF)


def test_live_pairs_normalize_dead_pairs_masked():
    for g, table in seeded_tables():
        report = validate_grammar(g)
        for i in range(g.node_count):
            pairs = g.child_set(i)
            if not pairs:
                assert table.pair_logprob[i].shape == (0,)
                continue
            live = [report.live_pair(g, i, p) for p in pairs]
            lp = table.pair_logprob[i]
            for idx, is_live in enumerate(live):
                if not is_live:
                    assert lp[idx] == NEG_INF
            if any(live):
                assert abs(np.logaddexp.reduce(lp)) < 1e-12


def test_masked_pair_anchor():
    # last chain node is dead under leaf_only, so its parent's pairs with
    # k = 5 carry no probability and the rest renormalize
    g = make_grammar(2, 1, 1, 2, closure=False, emission=EMISSION_LEAF_ONLY)
    table = uniform_table(g)
    pairs = g.child_set(3)
    assert pairs == ((0, 4), (0, 5), (2, 4), (2, 5))
    lp = table.pair_logprob[3]
    assert lp[1] == NEG_INF and lp[3] == NEG_INF
    assert lp[0] == pytest.approx(np.log(0.5), abs=1e-12)
    assert lp[2] == pytest.approx(np.log(0.5), abs=1e-12)


def test_family_split_semantics():
    g = make_grammar(1, 1, 1, 2, closure=True, emission=EMISSION_ALL_NODES)
    scorer = uniform_tabular(g)
    scorer.split_logits[:] = 0.7
    table = rule_table_from_tabular(g, scorer)
    # node 1 has both families: sigmoid(0.7) to the unary side
    s = 1.0 / (1.0 + np.exp(-0.7))
    assert table.emit_choice_logprob[1] == pytest.approx(np.log(s), abs=1e-12)
    assert table.child_choice_logprob[1] == pytest.approx(np.log(1 - s), abs=1e-12)
    # nodes 2 and 3 only emit
    for i in (2, 3):
        assert table.emit_choice_logprob[i] == 0.0
        assert table.child_choice_logprob[i] == NEG_INF
    assert table.emit_choice_logprob[0] == NEG_INF
    assert table.child_choice_logprob[0] == NEG_INF


def test_ternary_only_nodes_under_leaf_only():
    g = make_grammar(3, 1, 2, 2, closure=False, emission=EMISSION_LEAF_ONLY)
    table = uniform_table(g)
    for i in (1, 3, 5, 7, 9, 11):
        assert table.emit_choice_logprob[i] == NEG_INF
        assert table.child_choice_logprob[i] == 0.0


def test_flat_rule_arrays_cover_live_rules():
    for g, table in seeded_tables():
        report = validate_grammar(g)
        live = 0
        for i in range(g.node_count):
            for pos, pair in enumerate(g.child_set(i)):
                if report.live_pair(g, i, pair):
                    live += 1
                    idx = g.pair_index(i, pair)
                    assert idx == pos
        assert table.rule_count == live
        for r in range(table.rule_count):
            i = int(table.rule_parent[r])
            pair = (int(table.rule_left[r]), int(table.rule_right[r]))
            pos = g.pair_index(i, pair)
            expected = table.child_choice_logprob[i] + table.pair_logprob[i][pos]
            assert table.rule_logprob[r] == expected
            assert table.rule_pair_pos[r] == pos


def test_trilinear_table_matches_naive_formula():
    g = make_grammar(2, 1, 1, 3, closure=False, emission=EMISSION_ALL_NODES)
    scorer = init_trilinear(g, hidden_dim=5, seed=11)
    table = rule_table_from_trilinear(g, scorer)
    h = scorer.embeddings

    def log_softmax(v):
        v = np.asarray(v, dtype=float)
        mx = v.max()
        return v - mx - np.log(np.exp(v - mx).sum())

    for i in range(1, g.node_count):
        expected_emit = log_softmax(scorer.w_out @ h[i])
        assert np.allclose(table.emit_logprob[i], expected_emit, atol=1e-12)
        pairs = g.child_set(i)
        if not pairs:
            continue
        p = scorer.w_parent @ h[i]
        scores = []
        for j, k in pairs:
            l = scorer.w_left @ h[j]
            r = scorer.w_right @ h[k]
            scores.append(l @ p + r @ p + l @ r)
        assert np.allclose(table.pair_logprob[i], log_softmax(scores), atol=1e-12)


def test_sample_log_prob_replays_exactly():
    for g, table in seeded_tables(seed=5):
        if validate_grammar(g).degenerate:
            continue
        for s in range(6):
            tree = sample(g, table, seed=s)
            assert tree.replay_log_prob(g, table) == tree.log_prob
            assert len(tree.tokens) == len(tree.alignment)


def test_sample_frequencies_match_probabilities():
    g = make_grammar(1, 1, 1, 2, closure=True, emission=EMISSION_ALL_NODES)
    table = uniform_table(g)
    # exact tree distribution: two 1-token trees at 1/4, four 2-token at 1/8
    n = 4000
    counts = {}
    for s in range(n):
        tree = sample(g, table, seed=s)
        counts[tree.tokens] = counts.get(tree.tokens, 0) + 1
    expected = {
        (0,): 0.25,
        (1,): 0.25,
        (0, 0): 0.125,
        (0, 1): 0.125,
        (1, 0): 0.125,
        (1, 1): 0.125,
    }
    assert set(counts) == set(expected)
    for tokens, p in expected.items():
        freq = counts[tokens] / n
        assert abs(freq - p) < 4 * np.sqrt(p * (1 - p) / n)


def test_sample_rejects_degenerate():
    g = make_grammar(1, 1, 1, 2, closure=True, emission=EMISSION_LEAF_ONLY)
    with pytest.raises(GrammarDegenerateError):
        sample(g, uniform_table(g), seed=0)


def test_init_shapes_and_copy_independence():
    g = make_grammar(2, 1, 1, 3)
    tab = init_tabular(g, seed=1)
    assert tab.emit_logits.shape == (g.node_count - 1, 3)
    assert len(tab.child_logits) == g.node_count
    assert tab.split_logits.shape == (g.node_count - 1,)
    clone = tab.copy()
    clone.emit_logits[0, 0] += 1.0
    assert tab.emit_logits[0, 0] != clone.emit_logits[0, 0]

    tri = init_trilinear(g, hidden_dim=4, seed=1)
    assert tri.embeddings.shape == (g.node_count, 4)
    assert tri.w_out.shape == (3, 4)
    assert tri.hidden_dim == 4
    tclone = tri.copy()
    tclone.embeddings[0, 0] += 1.0
    assert tri.embeddings[0, 0] != tclone.embeddings[0, 0]


def test_tabular_shape_mismatch_rejected():
    g = make_grammar(2, 1, 1, 3)
    other = make_grammar(2, 1, 1, 2)
    with pytest.raises(ValueError):
        rule_table_from_tabular(g, init_tabular(other, seed=0))
