"""Word-pair mining, letter alignment, and the position-dependent rewrite model.

Confusable word pairs are read off confusion-network slots, aligned letter
to letter, and the alignment columns are pooled into two count tables:

* replace: how often source letter ``s`` at position ``i`` surfaces as
  letter ``t`` (``t == "*"`` records a deletion),
* insert: how often letter ``t`` is inserted right after source letter
  ``s`` at position ``i``.

The tables hold raw integer counts. Conditional distributions are derived
on demand, with identity rewrites (``t == s``) excluded from the replace
support, and fall back first to position-pooled counts and then to a
uniform distribution so that sampling is total over any input word.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable

from .cn import ConfusionNetwork
from .errors import ModelError

GAP = "*"
WORD_START = "^"  # insertion context before the first source letter

DEFAULT_POSITION_CAP = 16
EDIT_COUNT_RANGE = (1, 2, 3)
P_REPLACEMENT = 0.9
P_INSERTION = 0.1

_MODEL_FORMAT = "asrsim-rewrite-model"
_MODEL_VERSION = 1


@dataclass(frozen=True)
class WordPair:
    source: str
    target: str

    def __post_init__(self):
        for word in (self.source, self.target):
            if not word:
                raise ValueError("word pair members must be nonempty")
            if not word.isalpha() or not word.islower():
                raise ValueError(f"word pair member {word!r} is not lowercase letters")
        if self.source == self.target:
            raise ValueError(f"degenerate pair {self.source!r} -> itself")


@dataclass(frozen=True)
class LetterAlignment:
    """Minimal-cost letter alignment; ``*`` marks the absent side of a column."""

    columns: tuple[tuple[str, str], ...]
    cost: int

    def __post_init__(self):
        if any(col == (GAP, GAP) for col in self.columns):
            raise ValueError("alignment contains an empty column")
        mismatches = sum(1 for a, b in self.columns if a != b)
        if mismatches != self.cost:
            raise ValueError(f"cost {self.cost} != {mismatches} mismatching columns")

    def source(self) -> str:
        return "".join(a for a, _ in self.columns if a != GAP)

    def target(self) -> str:
        return "".join(b for _, b in self.columns if b != GAP)


def align_letters(source: str, target: str) -> LetterAlignment:
    """Align two words letter to letter at minimal unit cost.

    Traceback ties are broken deterministically, preferring match >
    substitution > deletion of a source letter > insertion into the source,
    resolved right to left.
    """
    if not source or not target:
        raise ValueError("cannot align an empty word")
    m, n = len(source), len(target)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        dp[i][0] = i
    for j in range(n + 1):
        dp[0][j] = j
    for i in range(1, m + 1):
        row, above = dp[i], dp[i - 1]
        for j in range(1, n + 1):
            sub = above[j - 1] + (source[i - 1] != target[j - 1])
            row[j] = min(sub, above[j] + 1, row[j - 1] + 1)

    columns: list[tuple[str, str]] = []
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and source[i - 1] == target[j - 1] and dp[i][j] == dp[i - 1][j - 1]:
            columns.append((source[i - 1], target[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + 1:
            columns.append((source[i - 1], target[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            columns.append((source[i - 1], GAP))
            i -= 1
        else:
            columns.append((GAP, target[j - 1]))
            j -= 1
    columns.reverse()
    return LetterAlignment(columns=tuple(columns), cost=dp[m][n])


def extract_confusion_pairs(
    cn: ConfusionNetwork, min_posterior: float = 0.0
) -> list[WordPair]:
    """Enumerate directed word pairs from every confusion slot.

    Within a slot no alternative is known to be the correct one, so every
    unordered pair contributes both directions. Reserved tokens are
    excluded; words are lowercased, and words containing non-letter
    characters are skipped (the letter tables have no home for them).
    ``min_posterior`` optionally drops low-confidence alternatives before
    pairing (off by default: all alternatives count equally).
    """
    pairs: list[WordPair] = []
    for slot in cn.slots:
        words: list[str] = []
        for alt in slot.alternatives:
            if alt.reserved:
                continue
            if alt.posterior is not None and alt.posterior < min_posterior:
                continue
            word = alt.word.lower()
            if word.isalpha() and word not in words:
                words.append(word)
        for a in words:
            for b in words:
                if a != b:
                    pairs.append(WordPair(source=a, target=b))
    return pairs


@dataclass(frozen=True)
class RewriteModel:
    """Position-dependent letter rewrite channel, stored as raw counts.

    Instances are frozen and safe to share across threads; estimation and
    merging build the count tables before construction.
    """

    replace_counts: dict[tuple[str, int], dict[str, int]]
    insert_counts: dict[tuple[str, int], dict[str, int]]
    alphabet: set[str]
    position_cap: int = DEFAULT_POSITION_CAP
    edit_count_range: tuple[int, ...] = EDIT_COUNT_RANGE
    p_replacement: float = P_REPLACEMENT
    p_insertion: float = P_INSERTION

    def position_bin(self, position: int) -> int:
        return min(position, self.position_cap - 1)

    def replace_distribution(self, letter: str, position: int) -> tuple[list[str], list[float]]:
        """Pr(t | s, i) over letters and ``*``, identity excluded.

        Backoff: exact (s, bin) counts, then position-pooled counts for s,
        then uniform over alphabet plus ``*`` minus s.
        """
        counts = self.replace_counts.get((letter, self.position_bin(position)))
        dist = _normalized(counts, exclude=letter)
        if dist:
            return dist
        pooled: dict[str, int] = {}
        for (s, _), table in self.replace_counts.items():
            if s == letter:
                for t, c in table.items():
                    pooled[t] = pooled.get(t, 0) + c
        dist = _normalized(pooled, exclude=letter)
        if dist:
            return dist
        support = sorted((self.alphabet | {GAP}) - {letter})
        return support, [1.0 / len(support)] * len(support)

    def insert_distribution(self, letter: str, position: int) -> tuple[list[str], list[float]]:
        """Pr_*(t | s, i) over letters inserted after s; same backoff chain."""
        counts = self.insert_counts.get((letter, self.position_bin(position)))
        dist = _normalized(counts)
        if dist:
            return dist
        pooled: dict[str, int] = {}
        for (s, _), table in self.insert_counts.items():
            if s == letter:
                for t, c in table.items():
                    pooled[t] = pooled.get(t, 0) + c
        dist = _normalized(pooled)
        if dist:
            return dist
        support = sorted(self.alphabet)
        return support, [1.0 / len(support)] * len(support)


def _normalized(
    counts: dict[str, int] | None, exclude: str | None = None
) -> tuple[list[str], list[float]] | None:
    if not counts:
        return None
    support = sorted(t for t, c in counts.items() if c > 0 and t != exclude)
    if not support:
        return None
    total = sum(counts[t] for t in support)
    return support, [counts[t] / total for t in support]


def estimate_model(
    pairs: Iterable[WordPair | tuple[str, str]],
    position_cap: int = DEFAULT_POSITION_CAP,
) -> RewriteModel:
    """Estimate the rewrite model from co-occurrence counts over word pairs.

    Each pair is letter-aligned; replacement columns are keyed by the source
    letter and its 0-based position (capped at ``position_cap - 1``),
    insertion columns by the nearest preceding source letter, or by the
    reserved word-start symbol when the insertion precedes every source
    letter. Plain (source, target) tuples are accepted alongside WordPair,
    which lets identical pairs flow in as pure identity observations.
    """
    if position_cap < 1:
        raise ValueError(f"position_cap must be >= 1, got {position_cap}")
    replace_counts: dict[tuple[str, int], dict[str, int]] = {}
    insert_counts: dict[tuple[str, int], dict[str, int]] = {}
    alphabet: set[str] = set()
    seen_any = False

    def bump(table, key, token):
        table.setdefault(key, {})
        table[key][token] = table[key].get(token, 0) + 1

    for pair in pairs:
        seen_any = True
        source, target = (pair.source, pair.target) if isinstance(pair, WordPair) else pair
        for word in (source, target):
            if not word or not word.isalpha() or not word.islower():
                raise ValueError(f"cannot estimate from non-letter word {word!r}")
        alphabet.update(source)
        alphabet.update(target)
        alignment = align_letters(source, target)
        src_pos = -1
        src_letter = WORD_START
        for a, b in alignment.columns:
            if a != GAP:
                src_pos += 1
                src_letter = a
                bump(replace_counts, (a, min(src_pos, position_cap - 1)), b)
            else:
                key_pos = 0 if src_pos < 0 else min(src_pos, position_cap - 1)
                bump(insert_counts, (src_letter, key_pos), b)

    if not seen_any:
        raise ValueError("cannot estimate a model from an empty pair list")
    return RewriteModel(
        replace_counts=replace_counts,
        insert_counts=insert_counts,
        alphabet=alphabet,
        position_cap=position_cap,
    )


def merge_models(models: Iterable[RewriteModel]) -> RewriteModel:
    """Merge count tables additively; shards of one estimation job commute."""
    models = list(models)
    if not models:
        raise ValueError("nothing to merge")
    caps = {m.position_cap for m in models}
    if len(caps) != 1:
        raise ModelError(f"cannot merge models with differing position caps {sorted(caps)}")
    replace_counts: dict[tuple[str, int], dict[str, int]] = {}
    insert_counts: dict[tuple[str, int], dict[str, int]] = {}
    alphabet: set[str] = set()
    for model in models:
        alphabet |= model.alphabet
        for dst, src in (
            (replace_counts, model.replace_counts),
            (insert_counts, model.insert_counts),
        ):
            for key, table in src.items():
                merged = dst.setdefault(key, {})
                for token, count in table.items():
                    merged[token] = merged.get(token, 0) + count
    return RewriteModel(
        replace_counts=replace_counts,
        insert_counts=insert_counts,
        alphabet=alphabet,
        position_cap=models[0].position_cap,
    )


# ---------------------------------------------------------------------------
# Persistence: versioned JSON holding integer counts, never probabilities
# ---------------------------------------------------------------------------

def _encode_counts(table: dict[tuple[str, int], dict[str, int]]) -> dict:
    return {f"{s}|{b}": dict(sorted(t.items())) for (s, b), t in sorted(table.items())}


def _decode_counts(raw: dict, position_cap: int, what: str) -> dict[tuple[str, int], dict[str, int]]:
    table: dict[tuple[str, int], dict[str, int]] = {}
    for key, counts in raw.items():
        symbol, _, bin_text = key.rpartition("|")
        if not symbol or not bin_text.isdigit():
            raise ModelError(f"bad {what} context key {key!r}")
        position_bin = int(bin_text)
        if position_bin >= position_cap:
            raise ModelError(f"{what} context {key!r} exceeds position cap {position_cap}")
        if not isinstance(counts, dict) or not counts:
            raise ModelError(f"{what} context {key!r} has no counts")
        for token, count in counts.items():
            if not isinstance(count, int) or count < 0:
                raise ModelError(f"{what} count for {key!r}/{token!r} is not a nonnegative integer")
        table[(symbol, position_bin)] = dict(counts)
    return table


def save_model(model: RewriteModel, sink: str | Path | IO[str]) -> None:
    if not model.alphabet:
        raise ModelError("refusing to save a model with an empty alphabet")
    payload = {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "position_cap": model.position_cap,
        "alphabet": sorted(model.alphabet),
        "edit_count_range": list(model.edit_count_range),
        "p_replacement": model.p_replacement,
        "p_insertion": model.p_insertion,
        "replace": _encode_counts(model.replace_counts),
        "insert": _encode_counts(model.insert_counts),
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="utf-8")
    else:
        sink.write(text)


def load_model(source: str | Path | IO[str]) -> RewriteModel:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file is not valid JSON: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != _MODEL_FORMAT:
        raise ModelError("not a rewrite model file")
    version = payload.get("version")
    if version != _MODEL_VERSION:
        raise ModelError(f"unsupported model version {version!r}, expected {_MODEL_VERSION}")
    try:
        position_cap = payload["position_cap"]
        alphabet = payload["alphabet"]
        edit_count_range = payload["edit_count_range"]
        p_replacement = payload["p_replacement"]
        p_insertion = payload["p_insertion"]
        replace_raw = payload["replace"]
        insert_raw = payload["insert"]
    except KeyError as exc:
        raise ModelError(f"model file is missing field {exc}") from None
    if not isinstance(position_cap, int) or position_cap < 1:
        raise ModelError(f"bad position_cap {position_cap!r}")
    if (
        not isinstance(alphabet, list)
        or not alphabet
        or any(not isinstance(ch, str) or len(ch) != 1 for ch in alphabet)
    ):
        raise ModelError("alphabet must be a nonempty list of single letters")
    return RewriteModel(
        replace_counts=_decode_counts(replace_raw, position_cap, "replace"),
        insert_counts=_decode_counts(insert_raw, position_cap, "insert"),
        alphabet=set(alphabet),
        position_cap=position_cap,
        edit_count_range=tuple(edit_count_range),
        p_replacement=float(p_replacement),
        p_insertion=float(p_insertion),
    )
