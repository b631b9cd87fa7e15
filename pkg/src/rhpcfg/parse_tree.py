"""Concrete parse trees over the support skeleton.

Nodes live in a flat list; children are list indices.  Node 0 of the grammar
(the empty-yield nonterminal) appears explicitly as a childless node with
token None, so a ternary expansion always has both children present in the
tree.  The in-order walk of the tree gives the token sequence, and the
nonterminal emitting position p is the alignment at p.

Builders produce nested tuples (nonterminal, token, left, right) with None
for missing parts; ParseTree.from_nested flattens them and derives yield and
alignment in one walk.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import UnderivableError


@dataclass
class TreeNode:
    nonterminal: int
    token: int | None
    left: int | None
    right: int | None


@dataclass
class ParseTree:
    nodes: list
    root: int
    log_prob: float
    tokens: tuple
    alignment: tuple

    @classmethod
    def from_nested(cls, nested, log_prob):
        nodes = []
        tokens = []
        alignment = []

        def walk(spec):
            nt, token, left_spec, right_spec = spec
            node = TreeNode(int(nt), None if token is None else int(token), None, None)
            idx = len(nodes)
            nodes.append(node)
            if left_spec is not None:
                node.left = walk(left_spec)
            if token is not None:
                alignment.append(int(nt))
                tokens.append(int(token))
            if right_spec is not None:
                node.right = walk(right_spec)
            return idx

        root = walk(nested)
        return cls(
            nodes=nodes,
            root=root,
            log_prob=float(log_prob),
            tokens=tuple(tokens),
            alignment=tuple(alignment),
        )

    def as_nested(self):
        def walk(idx):
            node = self.nodes[idx]
            left = walk(node.left) if node.left is not None else None
            right = walk(node.right) if node.right is not None else None
            return (node.nonterminal, node.token, left, right)

        return walk(self.root)

    def replay_log_prob(self, grammar, table) -> float:
        """Re-score the tree against a rule table, checking every step is a
        legal rule of the grammar.  Returns the summed log-probability."""
        total = 0.0

        def walk(idx):
            nonlocal total
            node = self.nodes[idx]
            nt = node.nonterminal
            if nt == 0:
                if node.token is not None or node.left is not None or node.right is not None:
                    raise UnderivableError("node 0 must be a childless, tokenless leaf")
                return
            if node.token is None:
                raise UnderivableError("nonterminal %d must emit a token" % nt)
            if not 0 <= node.token < grammar.vocab_size:
                raise UnderivableError("token %d outside the vocabulary" % node.token)
            if node.left is None and node.right is None:
                if not grammar.can_emit(nt):
                    raise UnderivableError("emission policy forbids V_%d -> token" % nt)
                total += table.emit_choice_logprob[nt] + table.emit_logprob[nt, node.token]
                return
            if node.left is None or node.right is None:
                raise UnderivableError("ternary node %d needs both children" % nt)
            pair = (self.nodes[node.left].nonterminal, self.nodes[node.right].nonterminal)
            try:
                pidx = grammar.pair_index(nt, pair)
            except KeyError:
                raise UnderivableError("illegal expansion V_%d -> V_%d tok V_%d" % (nt, *pair))
            total += (
                table.child_choice_logprob[nt]
                + table.pair_logprob[nt][pidx]
                + table.emit_logprob[nt, node.token]
            )
            walk(node.left)
            walk(node.right)

        walk(self.root)
        return total


def _label(node, vocab):
    if node.token is None:
        return "V_%d" % node.nonterminal
    if vocab is not None:
        return "V_%d : %s" % (node.nonterminal, vocab[node.token])
    return "V_%d : %d" % (node.nonterminal, node.token)


def tree_to_text(tree: ParseTree, vocab=None) -> str:
    """Indented one-node-per-line rendering, left child before right."""
    lines = []

    def walk(idx, depth, tag):
        node = tree.nodes[idx]
        pad = "  " * depth
        lines.append("%s%s%s" % (pad, tag, _label(node, vocab)))
        if node.left is not None:
            walk(node.left, depth + 1, "L ")
        if node.right is not None:
            walk(node.right, depth + 1, "R ")

    walk(tree.root, 0, "")
    return "\n".join(lines)


def tree_to_dot(tree: ParseTree, vocab=None) -> str:
    """Graphviz rendering: one node per tree node labeled "V_i : token",
    edges labeled left / right."""

    def quote(text):
        return text.replace("\\", "\\\\").replace('"', '\\"')

    lines = ["digraph parse {"]
    for idx, node in enumerate(tree.nodes):
        lines.append('  n%d [label="%s"];' % (idx, quote(_label(node, vocab))))
    for idx, node in enumerate(tree.nodes):
        if node.left is not None:
            lines.append('  n%d -> n%d [label="left"];' % (idx, node.left))
        if node.right is not None:
            lines.append('  n%d -> n%d [label="right"];' % (idx, node.right))
    lines.append("}")
    return "\n".join(lines) + "\n"
