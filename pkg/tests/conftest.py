"""Shared test helpers plus the acceptance-criteria summary hook."""

import numpy as np

from rhpcfg import TabularScorer, rule_table_from_tabular

# (criterion number, passed, detail) tuples appended by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    ACCEPTANCE_LINES.append((int(number), bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_LINES):
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line("criterion %2d %s: %s" % (number, verdict, detail))


def uniform_tabular(grammar):
    """All-zero logits: uniform emissions, uniform live pairs, even
    unary/ternary split wherever both families exist."""
    m = grammar.node_count
    return TabularScorer(
        emit_logits=np.zeros((m - 1, grammar.vocab_size)),
        child_logits=tuple(
            np.zeros(len(grammar.child_set(i))) for i in range(m)
        ),
        split_logits=np.zeros(m - 1),
    )


def uniform_table(grammar):
    return rule_table_from_tabular(grammar, uniform_tabular(grammar))


def central_fd(fn, array, index, step=1e-5):
    """Central finite difference of scalar fn at one coordinate of array,
    restoring the coordinate afterwards."""
    orig = array[index]
    array[index] = orig + step
    hi = fn()
    array[index] = orig - step
    lo = fn()
    array[index] = orig
    return (hi - lo) / (2.0 * step)
