"""Deterministic right-heavy support trees.

A support tree is the fixed skeleton that every parse tree must follow.  It
is determined by three integers (source length, upsample factor, prefix
depth) and indexed by in-order traversal position, so node i's left subtree
occupies exactly the index interval [lo, i-1] and its right subtree [i+1, hi].
That makes reachability questions interval checks, which is what the grammar
layer builds on.

Shape: node 1 is the root and the first node of the main chain; its left
child is node 0, the only node allowed to derive the empty string.  Each
further main-chain node hangs off the previous one's right link and carries a
complete binary tree of 2**depth - 1 nodes as its left subtree (no left
subtree when depth == 0).  The last main-chain node has no right child.

With chain_len = src_len * upsample, the node count is
chain_len * 2**depth + 2 and the main chain sits at indices
{t * 2**depth + 1 : t = 0..chain_len}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NO_NODE = -1


@dataclass(frozen=True)
class SupportTreeConfig:
    src_len: int
    upsample: int
    depth: int

    def __post_init__(self):
        if self.src_len < 1:
            raise ValueError("src_len must be >= 1, got %r" % (self.src_len,))
        if self.upsample < 1:
            raise ValueError("upsample must be >= 1, got %r" % (self.upsample,))
        if self.depth < 0:
            raise ValueError("depth must be >= 0, got %r" % (self.depth,))

    @property
    def prefix_cap(self) -> int:
        """2**depth: strict upper bound on the yield length of any local
        prefix subtree (a prefix tree has prefix_cap - 1 nodes)."""
        return 1 << self.depth

    @property
    def chain_len(self) -> int:
        """Number of main-chain nodes besides the root."""
        return self.src_len * self.upsample

    @property
    def node_count(self) -> int:
        return self.chain_len * self.prefix_cap + 2


def _attach_balanced(left, right, parent, lo, hi):
    """Build a complete binary tree over the inclusive index range [lo, hi]
    (odd size) and return its root index."""
    mid = (lo + hi) // 2
    if lo < mid:
        sub = _attach_balanced(left, right, parent, lo, mid - 1)
        left[mid] = sub
        parent[sub] = mid
    if mid < hi:
        sub = _attach_balanced(left, right, parent, mid + 1, hi)
        right[mid] = sub
        parent[sub] = mid
    return mid


class SupportTree:
    """In-order-indexed right-heavy tree with O(1) structural predicates."""

    def __init__(self, config: SupportTreeConfig):
        self.config = config
        count = config.node_count
        cap = config.prefix_cap
        left = np.full(count, NO_NODE, dtype=np.int32)
        right = np.full(count, NO_NODE, dtype=np.int32)
        parent = np.full(count, NO_NODE, dtype=np.int32)
        main = np.zeros(count, dtype=bool)

        chain = [t * cap + 1 for t in range(config.chain_len + 1)]
        left[1] = 0
        parent[0] = 1
        for t, node in enumerate(chain):
            main[node] = True
            if t == 0:
                continue
            prev = chain[t - 1]
            right[prev] = node
            parent[node] = prev
            if config.depth >= 1:
                sub = _attach_balanced(left, right, parent, node - cap + 1, node - 1)
                left[node] = sub
                parent[sub] = node

        self.node_count = count
        self.left_child = left
        self.right_child = right
        self.parent = parent
        self.is_main_chain = main
        self.main_chain = tuple(chain)

        # subtree index intervals: in-order indexing makes them
        # [leftmost descendant, rightmost descendant]
        lo = np.arange(count, dtype=np.int32)
        hi = np.arange(count, dtype=np.int32)
        stack = [(1, False)]
        while stack:
            node, done = stack.pop()
            if done:
                if left[node] != NO_NODE:
                    lo[node] = lo[left[node]]
                if right[node] != NO_NODE:
                    hi[node] = hi[right[node]]
            else:
                stack.append((node, True))
                for child in (left[node], right[node]):
                    if child != NO_NODE:
                        stack.append((int(child), False))
        self.subtree_lo = lo
        self.subtree_hi = hi

    @property
    def prefix_cap(self) -> int:
        return self.config.prefix_cap

    def _check_index(self, i):
        if not 0 <= i < self.node_count:
            raise IndexError("node %r outside 0..%d" % (i, self.node_count - 1))

    def is_leaf(self, i) -> bool:
        self._check_index(i)
        return self.left_child[i] == NO_NODE and self.right_child[i] == NO_NODE

    def subtree_interval(self, i):
        self._check_index(i)
        return int(self.subtree_lo[i]), int(self.subtree_hi[i])

    def in_left_reach(self, j, i) -> bool:
        """True when node j lies inside node i's left subtree."""
        self._check_index(i)
        self._check_index(j)
        left = self.left_child[i]
        if left == NO_NODE:
            return False
        return bool(self.subtree_lo[left] <= j <= self.subtree_hi[left])

    def in_right_reach(self, k, i, closure=False) -> bool:
        """True when node k lies inside node i's right subtree; with closure
        on, a main-chain parent additionally requires a main-chain k."""
        self._check_index(i)
        self._check_index(k)
        right = self.right_child[i]
        if right == NO_NODE:
            return False
        if not self.subtree_lo[right] <= k <= self.subtree_hi[right]:
            return False
        if closure and self.is_main_chain[i] and not self.is_main_chain[k]:
            return False
        return True

    def in_order(self):
        """Yield node indices by explicit left-root-right traversal; the
        result must equal 0..node_count-1 (checked by tests, relied on by
        everything)."""
        stack = []
        node = 1
        while stack or node != NO_NODE:
            while node != NO_NODE:
                stack.append(node)
                node = int(self.left_child[node])
            node = stack.pop()
            yield node
            node = int(self.right_child[node])

    def __repr__(self):
        c = self.config
        return "SupportTree(src_len=%d, upsample=%d, depth=%d, nodes=%d)" % (
            c.src_len,
            c.upsample,
            c.depth,
            self.node_count,
        )


def build_support_tree(src_len, upsample, depth) -> SupportTree:
    return SupportTree(SupportTreeConfig(src_len, upsample, depth))
