"""Corpus and vocabulary files.

Vocabulary: plain text, one token per line, token id == 0-based line number.
Corpus: JSON lines, each {"context": <int>, "target": [<token string>, ...]}.
Both serializers are canonical (fixed key order, compact separators, UTF-8),
so load/save round-trips are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import FileFormatError
from .fileio import atomic_write_text


@dataclass(frozen=True)
class CorpusRecord:
    context_id: int
    tokens: tuple  # token ids


@dataclass
class Corpus:
    records: list
    vocab: list

    def __len__(self):
        return len(self.records)

    def sentences(self):
        """Token-id sequences in corpus order (what the trainers consume)."""
        return [record.tokens for record in self.records]


def load_vocab(path) -> list:
    with open(path, "r", encoding="utf-8") as handle:
        content = handle.read()
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    seen = {}
    for lineno, token in enumerate(lines, 1):
        if token == "":
            raise FileFormatError("empty vocabulary entry", line=lineno)
        if token in seen:
            raise FileFormatError(
                "token %r already defined on line %d" % (token, seen[token]), line=lineno
            )
        seen[token] = lineno
    return lines


def save_vocab(vocab, path):
    for token in vocab:
        if "\n" in token or token == "":
            raise ValueError("vocabulary tokens must be non-empty, newline-free strings")
    atomic_write_text(path, "".join(token + "\n" for token in vocab))


def _encode_record(record: CorpusRecord, vocab) -> str:
    return json.dumps(
        {"context": record.context_id, "target": [vocab[t] for t in record.tokens]},
        ensure_ascii=False,
        separators=(",", ":"),
    )


def load_corpus(path, vocab) -> Corpus:
    index = {token: i for i, token in enumerate(vocab)}
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if line == "":
                raise FileFormatError("blank line in corpus", line=lineno)
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise FileFormatError("bad JSON: %s" % err, line=lineno)
            if not isinstance(obj, dict) or set(obj) != {"context", "target"}:
                raise FileFormatError(
                    'records need exactly the keys "context" and "target"', line=lineno
                )
            context = obj["context"]
            if isinstance(context, bool) or not isinstance(context, int) or context < 0:
                raise FileFormatError("context must be a non-negative integer", line=lineno)
            target = obj["target"]
            if not isinstance(target, list) or any(not isinstance(t, str) for t in target):
                raise FileFormatError("target must be a list of token strings", line=lineno)
            ids = []
            for token in target:
                if token not in index:
                    raise FileFormatError(
                        "token %r is not in the vocabulary" % token, line=lineno
                    )
                ids.append(index[token])
            records.append(CorpusRecord(context_id=context, tokens=tuple(ids)))
    return Corpus(records=records, vocab=list(vocab))


def save_corpus(corpus: Corpus, path):
    text = "".join(_encode_record(r, corpus.vocab) + "\n" for r in corpus.records)
    atomic_write_text(path, text)


def make_bimodal(vocab, mode_a, mode_b, n_each, seed=0) -> Corpus:
    """A two-mode corpus: n_each copies of each token-string mode, shuffled
    deterministically, all under context id 0."""
    index = {token: i for i, token in enumerate(vocab)}
    modes = []
    for mode in (mode_a, mode_b):
        try:
            modes.append(tuple(index[token] for token in mode))
        except KeyError as err:
            raise ValueError("mode token %s is not in the vocabulary" % err)
    records = [CorpusRecord(0, modes[0])] * n_each + [CorpusRecord(0, modes[1])] * n_each
    order = np.random.default_rng(seed).permutation(len(records))
    return Corpus(records=[records[i] for i in order], vocab=list(vocab))
