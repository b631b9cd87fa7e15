"""Parameter files: one JSON header line, then a raw float64 payload.

The header carries everything needed to rebuild the grammar and the scorer
shell (grammar geometry, vocabulary size, policy, scorer kind, split logits);
the payload packs the remaining parameter blocks little-endian row-major in a
fixed order.  Floats in the header survive JSON exactly (shortest-round-trip
repr), the payload is raw bytes, so save -> load -> save is byte-identical.

Payload order:
  tabular    emission logits (m-1, vocab), then child-pair logits per
             nonterminal ascending, child_set order within
  trilinear  embeddings (m, hidden), w_out (vocab, hidden), then w_parent,
             w_left, w_right (hidden, hidden each)
"""

from __future__ import annotations

import json

import numpy as np

from .errors import FileFormatError
from .fileio import atomic_write_bytes
from .grammar import EMISSION_POLICIES, Grammar, make_grammar
from .scorers import TabularScorer, TrilinearScorer

FORMAT_VERSION = 1


def _blocks_tabular(grammar, scorer):
    yield scorer.emit_logits
    for i in range(grammar.node_count):
        yield scorer.child_logits[i]


def _blocks_trilinear(scorer):
    yield scorer.embeddings
    yield scorer.w_out
    yield scorer.w_parent
    yield scorer.w_left
    yield scorer.w_right


def save_params(path, grammar: Grammar, scorer):
    config = grammar.tree.config
    header = {
        "format_version": FORMAT_VERSION,
        "src_len": config.src_len,
        "upsample": config.upsample,
        "depth": config.depth,
        "vocab_size": grammar.vocab_size,
        "closure": bool(grammar.policy.closure),
        "emission": grammar.policy.emission,
        "split_logits": [float(v) for v in scorer.split_logits],
    }
    if isinstance(scorer, TabularScorer):
        header["kind"] = "tabular"
        blocks = _blocks_tabular(grammar, scorer)
    elif isinstance(scorer, TrilinearScorer):
        header["kind"] = "trilinear"
        header["hidden_dim"] = scorer.hidden_dim
        blocks = _blocks_trilinear(scorer)
    else:
        raise TypeError("unknown scorer type %r" % type(scorer).__name__)
    payload = b"".join(np.ascontiguousarray(b, dtype="<f8").tobytes() for b in blocks)
    data = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    atomic_write_bytes(path, data + b"\n" + payload)


def _header_int(header, key, minimum):
    value = header.get(key)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise FileFormatError("header field %r must be an integer >= %d" % (key, minimum))
    return value


def load_params(path):
    """Returns (grammar, scorer) rebuilt from the file."""
    with open(path, "rb") as handle:
        data = handle.read()
    newline = data.find(b"\n")
    if newline < 0:
        raise FileFormatError("missing header line")
    try:
        header = json.loads(data[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise FileFormatError("bad header: %s" % err)
    if not isinstance(header, dict):
        raise FileFormatError("header must be a JSON object")
    if header.get("format_version") != FORMAT_VERSION:
        raise FileFormatError(
            "unsupported format_version %r" % (header.get("format_version"),)
        )
    kind = header.get("kind")
    if kind not in ("tabular", "trilinear"):
        raise FileFormatError("unknown scorer kind %r" % (kind,))
    emission = header.get("emission")
    if emission not in EMISSION_POLICIES:
        raise FileFormatError("unknown emission policy %r" % (emission,))
    if not isinstance(header.get("closure"), bool):
        raise FileFormatError("header field 'closure' must be a boolean")
    grammar = make_grammar(
        src_len=_header_int(header, "src_len", 1),
        upsample=_header_int(header, "upsample", 1),
        depth=_header_int(header, "depth", 0),
        vocab_size=_header_int(header, "vocab_size", 1),
        closure=header["closure"],
        emission=emission,
    )
    m = grammar.node_count
    split = header.get("split_logits")
    if (
        not isinstance(split, list)
        or len(split) != m - 1
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in split)
    ):
        raise FileFormatError("split_logits must hold %d numbers" % (m - 1,))
    split_logits = np.array([float(v) for v in split], dtype=np.float64)

    flat = np.frombuffer(data[newline + 1 :], dtype="<f8")
    cursor = 0

    def take(shape):
        nonlocal cursor
        size = int(np.prod(shape)) if shape else 1
        if cursor + size > flat.size:
            raise FileFormatError("payload too short for the declared shapes")
        out = flat[cursor : cursor + size].reshape(shape).astype(np.float64)
        cursor += size
        return out

    if kind == "tabular":
        emit = take((m - 1, grammar.vocab_size))
        child = tuple(take((len(grammar.child_set(i)),)) for i in range(m))
        scorer = TabularScorer(emit, child, split_logits)
    else:
        hidden = _header_int(header, "hidden_dim", 1)
        scorer = TrilinearScorer(
            embeddings=take((m, hidden)),
            w_out=take((grammar.vocab_size, hidden)),
            w_parent=take((hidden, hidden)),
            w_left=take((hidden, hidden)),
            w_right=take((hidden, hidden)),
            split_logits=split_logits,
        )
    if cursor != flat.size:
        raise FileFormatError(
            "payload holds %d extra values beyond the declared shapes"
            % (flat.size - cursor)
        )
    return grammar, scorer
