"""Parsing of ASR decoder outputs and confusion-network construction.

Two line-oriented UTF-8 input formats are supported:

N-best list::

    <utt_id> <rank> <score|-> <word> <word> ...

One hypothesis per line, records for one utterance contiguous, ranks
strictly increasing. A literal ``-`` marks an absent score.

Sausage (confusion network)::

    name <utt_id>            (optional header)
    align 0 <word> <p> ...
    align 1 <word> <p> ...

One slot per ``align`` line, slot indices consecutive from 0, alternatives
given as word/posterior pairs. ``numaligns`` and ``posterior`` header lines
emitted by common lattice tools are tolerated and ignored. Reserved tokens:
``<s>``, ``</s>`` (sentence boundaries) and ``*DELETE*`` (epsilon, i.e. the
"no word here" alternative).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParseError

EPSILON = "*DELETE*"
SENTENCE_START = "<s>"
SENTENCE_END = "</s>"
RESERVED_TOKENS = frozenset({EPSILON, SENTENCE_START, SENTENCE_END})

# Posteriors within a slot may sum to slightly above 1 from rounding.
_POSTERIOR_SLACK = 1e-6


def is_reserved(word: str) -> bool:
    return word in RESERVED_TOKENS


@dataclass(frozen=True)
class Hypothesis:
    rank: int
    score: float | None
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class NBestList:
    utterance_id: str
    hypotheses: tuple[Hypothesis, ...]

    def __post_init__(self):
        if not self.hypotheses:
            raise ValueError("an N-best list needs at least one hypothesis")
        previous = 0
        for hyp in self.hypotheses:
            if hyp.rank <= previous:
                raise ValueError(f"ranks must increase strictly from 1, got {hyp.rank}")
            previous = hyp.rank
            if any(tok == "" for tok in hyp.tokens):
                raise ValueError("hypothesis tokens must be nonempty")
        if self.hypotheses[0].rank != 1:
            raise ValueError("first hypothesis must have rank 1")


@dataclass(frozen=True)
class Alternative:
    word: str
    posterior: float | None = None

    @property
    def reserved(self) -> bool:
        return is_reserved(self.word)


@dataclass(frozen=True)
class ConfusionSlot:
    alternatives: tuple[Alternative, ...]

    def __post_init__(self):
        words = [alt.word for alt in self.alternatives]
        if len(set(words)) != len(words):
            raise ValueError(f"duplicate word within a slot: {words}")
        posteriors = [alt.posterior for alt in self.alternatives]
        for p in posteriors:
            if p is not None and not 0.0 <= p <= 1.0:
                raise ValueError(f"posterior {p} outside [0, 1]")
        known = [p for p in posteriors if p is not None]
        if known and sum(known) > 1.0 + _POSTERIOR_SLACK:
            raise ValueError(f"slot posteriors sum to {sum(known)} > 1")

    def words(self) -> list[str]:
        return [alt.word for alt in self.alternatives]

    def surface_words(self) -> list[str]:
        """Alternatives that are real words, i.e. not boundary/epsilon markers."""
        return [alt.word for alt in self.alternatives if not alt.reserved]


@dataclass(frozen=True)
class ConfusionNetwork:
    utterance_id: str
    slots: tuple[ConfusionSlot, ...] = field(default_factory=tuple)


# ---------------------------------------------------------------------------
# N-best parsing
# ---------------------------------------------------------------------------

def _parse_nbest_lines(lines: list[tuple[int, str]]) -> NBestList:
    utt_id = None
    hypotheses: list[Hypothesis] = []
    previous_rank = 0
    for lineno, line in lines:
        fields = line.split()
        if len(fields) < 4:
            raise ParseError(
                "expected '<utt_id> <rank> <score|-> <word> ...'", line=lineno
            )
        this_id, rank_text, score_text = fields[0], fields[1], fields[2]
        if utt_id is None:
            utt_id = this_id
        elif this_id != utt_id:
            raise ParseError(
                f"utterance id changed from {utt_id!r} to {this_id!r}; "
                "use parse_nbest_corpus for multi-utterance files",
                line=lineno,
            )
        try:
            rank = int(rank_text)
        except ValueError:
            raise ParseError(f"rank {rank_text!r} is not an integer", line=lineno) from None
        if rank < 1:
            raise ParseError(f"rank must be >= 1, got {rank}", line=lineno)
        if rank <= previous_rank:
            raise ParseError(
                f"explicit ranks must increase strictly ({previous_rank} then {rank})",
                line=lineno,
            )
        previous_rank = rank
        if score_text == "-":
            score = None
        else:
            try:
                score = float(score_text)
            except ValueError:
                raise ParseError(f"score {score_text!r} is not a number", line=lineno) from None
        hypotheses.append(
            Hypothesis(rank=len(hypotheses) + 1, score=score, tokens=tuple(fields[3:]))
        )
    assert utt_id is not None
    return NBestList(utterance_id=utt_id, hypotheses=tuple(hypotheses))


def parse_nbest(text: str) -> NBestList:
    """Parse a single utterance's N-best records.

    Hypotheses are kept in file order; the stored rank is the order of
    appearance (1-based). Explicit ranks in the file only have to be
    strictly increasing.
    """
    lines = [(i, ln) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise ParseError("empty input")
    return _parse_nbest_lines(lines)


def parse_nbest_corpus(text: str) -> list[NBestList]:
    """Parse a multi-utterance N-best file into one list per utterance.

    Records for one utterance must be contiguous; an id that reappears
    after another utterance is an error.
    """
    lines = [(i, ln) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise ParseError("empty input")
    groups: list[list[tuple[int, str]]] = []
    current_id = None
    for lineno, line in lines:
        fields = line.split()
        if not fields:
            continue
        if fields[0] != current_id:
            current_id = fields[0]
            groups.append([])
        groups[-1].append((lineno, line))
    result = [_parse_nbest_lines(group) for group in groups]
    seen: set[str] = set()
    for nbest in result:
        if nbest.utterance_id in seen:
            raise ParseError(
                f"records for utterance {nbest.utterance_id!r} are not contiguous"
            )
        seen.add(nbest.utterance_id)
    return result


# ---------------------------------------------------------------------------
# Sausage parsing and serialization
# ---------------------------------------------------------------------------

_IGNORED_SAUSAGE_HEADERS = ("numaligns", "posterior")


def _parse_sausage_lines(lines: list[tuple[int, str]]) -> ConfusionNetwork:
    utt_id = ""
    slots: list[ConfusionSlot] = []
    for lineno, line in lines:
        fields = line.split()
        keyword = fields[0]
        if keyword == "name":
            if slots:
                raise ParseError("name header must precede align lines", line=lineno)
            if utt_id:
                raise ParseError("duplicate name header", line=lineno)
            if len(fields) != 2:
                raise ParseError("expected 'name <utt_id>'", line=lineno)
            utt_id = fields[1]
        elif keyword in _IGNORED_SAUSAGE_HEADERS:
            continue
        elif keyword == "align":
            if len(fields) < 4 or len(fields) % 2 != 0:
                raise ParseError(
                    "expected 'align <k> <word> <posterior> ...'", line=lineno
                )
            try:
                k = int(fields[1])
            except ValueError:
                raise ParseError(f"slot index {fields[1]!r} is not an integer", line=lineno) from None
            if k != len(slots):
                raise ParseError(
                    f"slot index {k} out of order, expected {len(slots)}", line=lineno
                )
            alternatives = []
            for word, p_text in zip(fields[2::2], fields[3::2]):
                try:
                    posterior = float(p_text)
                except ValueError:
                    raise ParseError(f"posterior {p_text!r} is not a number", line=lineno) from None
                alternatives.append(Alternative(word=word, posterior=posterior))
            try:
                slots.append(ConfusionSlot(alternatives=tuple(alternatives)))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
        else:
            raise ParseError(f"unrecognized directive {keyword!r}", line=lineno)
    return ConfusionNetwork(utterance_id=utt_id, slots=tuple(slots))


def parse_confusion_network(text: str) -> ConfusionNetwork:
    """Parse a single sausage into a confusion network."""
    lines = [(i, ln) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise ParseError("empty input")
    return _parse_sausage_lines(lines)


def parse_sausage_corpus(text: str) -> list[ConfusionNetwork]:
    """Parse a file holding several sausages.

    A new sausage starts at each ``name`` line, or at an ``align 0`` line
    once the current sausage already has slots.
    """
    lines = [(i, ln) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise ParseError("empty input")
    blocks: list[list[tuple[int, str]]] = [[]]
    have_aligns = False
    for lineno, line in lines:
        fields = line.split()
        starts_new = fields[0] == "name" or (
            fields[0] == "align" and len(fields) > 1 and fields[1] == "0" and have_aligns
        )
        if starts_new and blocks[-1]:
            blocks.append([])
            have_aligns = False
        blocks[-1].append((lineno, line))
        if fields[0] == "align":
            have_aligns = True
    return [_parse_sausage_lines(block) for block in blocks]


def serialize_confusion_network(cn: ConfusionNetwork) -> str:
    """Render a confusion network in the sausage format.

    Floats are written with repr, so parse -> serialize is a fixed point
    after the first round trip.
    """
    lines = []
    if cn.utterance_id:
        lines.append(f"name {cn.utterance_id}")
    for k, slot in enumerate(cn.slots):
        parts = [f"align {k}"]
        for alt in slot.alternatives:
            if alt.posterior is None:
                raise ValueError(
                    f"slot {k}: alternative {alt.word!r} has no posterior; "
                    "the sausage format requires word/posterior pairs"
                )
            parts.append(f"{alt.word} {alt.posterior!r}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Pivot alignment of an N-best list into a confusion network
# ---------------------------------------------------------------------------

def _align_words(pivot: tuple[str, ...], hyp: tuple[str, ...]):
    """Minimal-edit alignment of ``hyp`` against ``pivot``.

    Unit costs (match 0, substitution/insertion/deletion 1). Traceback ties
    are broken preferring match > substitution > deletion-from-pivot >
    insertion-into-pivot, resolved from the right end.

    Returns ops as tuples: ("sub", pivot_pos, word) covers matches too,
    ("del", pivot_pos) marks a pivot word absent from hyp, ("ins", gap, word)
    inserts before pivot position ``gap``.
    """
    m, n = len(pivot), len(hyp)
    dp = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        dp[i][0] = i
    for j in range(n + 1):
        dp[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            sub = dp[i - 1][j - 1] + (pivot[i - 1] != hyp[j - 1])
            dp[i][j] = min(sub, dp[i - 1][j] + 1, dp[i][j - 1] + 1)

    ops = []
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and pivot[i - 1] == hyp[j - 1] and dp[i][j] == dp[i - 1][j - 1]:
            ops.append(("sub", i - 1, hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + 1:
            ops.append(("sub", i - 1, hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            ops.append(("del", i - 1))
            i -= 1
        else:
            ops.append(("ins", i, hyp[j - 1]))
            j -= 1
    ops.reverse()
    return ops


def align_nbest_to_cn(nbest: NBestList) -> ConfusionNetwork:
    """Align an N-best list into a confusion network around the top hypothesis.

    The rank-1 hypothesis is the pivot: every pivot token owns one slot, and
    each lower-ranked hypothesis is word-aligned to it. Substituted words
    join the pivot's slot; words inserted relative to the pivot open extra
    slots at the corresponding gap, with an epsilon alternative standing in
    for every hypothesis that has no word there. Posteriors are uniform over
    hypotheses (explicit scores are ignored).
    """
    pivot = nbest.hypotheses[0].tokens
    total = len(nbest.hypotheses)

    # Per-slot word counts; plain dicts keep first-seen order for stable output.
    pivot_slots: list[dict[str, int]] = [{tok: 1} for tok in pivot]
    gap_slots: dict[int, list[dict[str, int]]] = {}

    for hyp in nbest.hypotheses[1:]:
        ops = _align_words(pivot, hyp.tokens)
        pending_gap: dict[int, list[str]] = {}
        for op in ops:
            if op[0] == "sub":
                _, pos, word = op
                counts = pivot_slots[pos]
                counts[word] = counts.get(word, 0) + 1
            elif op[0] == "ins":
                _, gap, word = op
                pending_gap.setdefault(gap, []).append(word)
        for gap, words in pending_gap.items():
            sub_slots = gap_slots.setdefault(gap, [])
            for depth, word in enumerate(words):
                if depth == len(sub_slots):
                    sub_slots.append({})
                counts = sub_slots[depth]
                counts[word] = counts.get(word, 0) + 1

    def build_slot(counts: dict[str, int]) -> ConfusionSlot:
        missing = total - sum(counts.values())
        alternatives = [
            Alternative(word=w, posterior=c / total) for w, c in counts.items()
        ]
        if missing > 0:
            alternatives.append(Alternative(word=EPSILON, posterior=missing / total))
        return ConfusionSlot(alternatives=tuple(alternatives))

    slots: list[ConfusionSlot] = []
    for pos in range(len(pivot) + 1):
        for counts in gap_slots.get(pos, []):
            slots.append(build_slot(counts))
        if pos < len(pivot):
            slots.append(build_slot(pivot_slots[pos]))
    return ConfusionNetwork(utterance_id=nbest.utterance_id, slots=tuple(slots))
