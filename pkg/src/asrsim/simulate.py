"""Sampling of erroneous words and corpus corruption with corrective labels.

A word is corrupted by drawing an edit count uniformly from {1, 2, 3} and
then repeatedly picking a position uniformly over the current word, an edit
type (replacement 0.9 / insertion 0.1), and a letter from the model's
conditional distribution. Drawing ``*`` under replacement deletes the
letter. Edits apply to the evolving word; if it becomes empty, generation
stops early.

Utterance corruption picks up to two eligible tokens (length >= 2, all
letters) uniformly without replacement and replaces each with a sampled
erroneous version, recording (token_index, clean, noisy) corrective labels
for a downstream self-correcting trainer. Dataset corruption derives one
independent rng per (master_seed, dialogue_id, turn_index), so output is
reproducible bit for bit regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator

from .edit_model import GAP, RewriteModel
from .errors import ModelError, ParseError

REPLACE = "replace"
INSERT = "insert"
DELETE = "delete"


@dataclass(frozen=True)
class Edit:
    kind: str  # replace | insert | delete
    position: int
    src: str  # "*" for insertions
    dst: str  # "*" for deletions


@dataclass(frozen=True)
class EditTrace:
    edits: tuple[Edit, ...]


def replay_trace(word: str, trace: EditTrace) -> str:
    """Apply a trace to the clean word; reproduces the sampled noisy word."""
    current = word
    for edit in trace.edits:
        if edit.kind == INSERT:
            if not 0 <= edit.position < len(current):
                raise ValueError(f"insert position {edit.position} out of range in {current!r}")
            current = current[: edit.position + 1] + edit.dst + current[edit.position + 1 :]
            continue
        if not 0 <= edit.position < len(current):
            raise ValueError(f"edit position {edit.position} out of range in {current!r}")
        if current[edit.position] != edit.src:
            raise ValueError(
                f"trace expects {edit.src!r} at position {edit.position}, "
                f"found {current[edit.position]!r}"
            )
        if edit.kind == DELETE:
            current = current[: edit.position] + current[edit.position + 1 :]
        elif edit.kind == REPLACE:
            current = current[: edit.position] + edit.dst + current[edit.position + 1 :]
        else:
            raise ValueError(f"unknown edit kind {edit.kind!r}")
    return current


def _weighted_choice(rng: random.Random, tokens: list[str], probs: list[float]) -> str:
    point = rng.random()
    acc = 0.0
    for token, p in zip(tokens, probs):
        acc += p
        if point < acc:
            return token
    return tokens[-1]  # floating-point undershoot lands on the last token


def corrupt_word(word: str, model: RewriteModel, rng: random.Random) -> tuple[str, EditTrace]:
    """Sample an erroneous version of ``word`` from the channel model."""
    if not word:
        raise ValueError("cannot corrupt an empty word")
    if not word.isalpha():
        raise ValueError(f"cannot corrupt {word!r}: not all letters")
    if not model.alphabet:
        raise ModelError("cannot sample from a model with an empty alphabet")

    requested = rng.choice(model.edit_count_range)
    current = word
    edits: list[Edit] = []
    for _ in range(requested):
        if not current:
            break
        position = rng.randrange(len(current))
        letter = current[position]
        if rng.random() < model.p_replacement:
            tokens, probs = model.replace_distribution(letter, position)
            drawn = _weighted_choice(rng, tokens, probs)
            if drawn == GAP:
                edits.append(Edit(DELETE, position, letter, GAP))
                current = current[:position] + current[position + 1 :]
            else:
                edits.append(Edit(REPLACE, position, letter, drawn))
                current = current[:position] + drawn + current[position + 1 :]
        else:
            tokens, probs = model.insert_distribution(letter, position)
            drawn = _weighted_choice(rng, tokens, probs)
            edits.append(Edit(INSERT, position, GAP, drawn))
            current = current[: position + 1] + drawn + current[position + 1 :]
    return current, EditTrace(edits=tuple(edits))


# ---------------------------------------------------------------------------
# Utterance and dataset corruption
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Correction:
    token_index: int
    clean: str
    noisy: str


@dataclass(frozen=True)
class CorruptedUtterance:
    clean_tokens: tuple[str, ...]
    noisy_tokens: tuple[str, ...]
    corrections: tuple[Correction, ...]


@dataclass(frozen=True)
class CorruptionRecord:
    dialogue_id: str
    turn_index: int
    clean_tokens: tuple[str, ...]
    noisy_tokens: tuple[str, ...]
    corrections: tuple[Correction, ...]


def token_eligible(token: str) -> bool:
    return len(token) >= 2 and token.isalpha()


def corrupt_utterance(
    tokens: list[str] | tuple[str, ...],
    model: RewriteModel,
    rng: random.Random,
    max_corrupted_words: int = 2,
) -> CorruptedUtterance:
    """Corrupt up to ``max_corrupted_words`` eligible tokens of one utterance.

    Positions are drawn uniformly without replacement; tokens the channel
    cannot model (too short, punctuation, numerals) are never touched. A
    sampled word that happens to equal its clean form (edits can cancel)
    yields no correction entry.
    """
    if not tokens:
        raise ValueError("cannot corrupt an empty token list")
    if max_corrupted_words < 0:
        raise ValueError("max_corrupted_words must be >= 0")
    eligible = [i for i, tok in enumerate(tokens) if token_eligible(tok)]
    chosen = sorted(rng.sample(eligible, min(max_corrupted_words, len(eligible))))
    noisy = list(tokens)
    corrections = []
    for index in chosen:
        noisy_word, _ = corrupt_word(tokens[index], model, rng)
        if noisy_word != tokens[index]:
            noisy[index] = noisy_word
            corrections.append(Correction(index, tokens[index], noisy_word))
    return CorruptedUtterance(
        clean_tokens=tuple(tokens),
        noisy_tokens=tuple(noisy),
        corrections=tuple(corrections),
    )


@dataclass(frozen=True)
class Turn:
    speaker: str  # U | S
    text: str

    def __post_init__(self):
        if self.speaker not in ("U", "S"):
            raise ValueError(f"speaker must be U or S, got {self.speaker!r}")
        if not self.text.strip():
            raise ValueError("turn text must be nonempty")


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    turns: tuple[Turn, ...]


@dataclass(frozen=True)
class CorruptionPolicy:
    user_turns_only: bool = True
    last_user_turn_only: bool = True

    def select_turns(self, dialogue: Dialogue) -> list[tuple[int, Turn]]:
        candidates = [
            (index, turn)
            for index, turn in enumerate(dialogue.turns)
            if not self.user_turns_only or turn.speaker == "U"
        ]
        if self.last_user_turn_only:
            candidates = candidates[-1:]
        return candidates


def derive_turn_seed(master_seed: int, dialogue_id: str, turn_index: int) -> int:
    """Stable per-turn seed; hashlib keeps it independent of process salt."""
    material = f"{master_seed}\x1f{dialogue_id}\x1f{turn_index}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(material).digest(), "big")


def corrupt_dataset(
    dialogues: Iterable[Dialogue],
    model: RewriteModel,
    master_seed: int,
    policy: CorruptionPolicy | None = None,
    max_corrupted_words: int = 2,
    workers: int = 1,
) -> Iterator[CorruptionRecord]:
    """Corrupt the policy-selected turns of every dialogue, in input order.

    Each record's rng is derived from (master_seed, dialogue_id, turn_index),
    so a fixed master seed fixes the whole output regardless of ``workers``.
    """
    policy = policy or CorruptionPolicy()

    def checked(stream: Iterable[Dialogue]) -> Iterator[Dialogue]:
        seen: set[str] = set()
        for dialogue in stream:
            if dialogue.dialogue_id in seen:
                raise ParseError(
                    f"duplicate dialogue_id {dialogue.dialogue_id!r} breaks seed derivation"
                )
            seen.add(dialogue.dialogue_id)
            yield dialogue

    def corrupt_one(dialogue: Dialogue) -> list[CorruptionRecord]:
        records = []
        for turn_index, turn in policy.select_turns(dialogue):
            rng = random.Random(
                derive_turn_seed(master_seed, dialogue.dialogue_id, turn_index)
            )
            fragment = corrupt_utterance(turn.text.split(), model, rng, max_corrupted_words)
            records.append(
                CorruptionRecord(
                    dialogue_id=dialogue.dialogue_id,
                    turn_index=turn_index,
                    clean_tokens=fragment.clean_tokens,
                    noisy_tokens=fragment.noisy_tokens,
                    corrections=fragment.corrections,
                )
            )
        return records

    if workers <= 1:
        for dialogue in checked(dialogues):
            yield from corrupt_one(dialogue)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for records in pool.map(corrupt_one, checked(dialogues)):
                yield from records


# ---------------------------------------------------------------------------
# Line-delimited JSON dataset formats
# ---------------------------------------------------------------------------

def parse_dialogue(payload: dict, line: int | None = None) -> Dialogue:
    try:
        dialogue_id = payload["dialogue_id"]
        raw_turns = payload["turns"]
        turns = tuple(Turn(speaker=t["speaker"], text=t["text"]) for t in raw_turns)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed dialogue record: {exc}", line=line) from None
    except ValueError as exc:
        raise ParseError(str(exc), line=line) from None
    if not isinstance(dialogue_id, str) or not dialogue_id:
        raise ParseError("dialogue_id must be a nonempty string", line=line)
    return Dialogue(dialogue_id=dialogue_id, turns=turns)


def read_dialogues(lines: Iterable[str]) -> Iterator[Dialogue]:
    """Parse one dialogue per line: {dialogue_id, turns: [{speaker, text}]}."""
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from None
        yield parse_dialogue(payload, line=lineno)


def dialogue_to_json(dialogue: Dialogue) -> str:
    return json.dumps(
        {
            "dialogue_id": dialogue.dialogue_id,
            "turns": [{"speaker": t.speaker, "text": t.text} for t in dialogue.turns],
        }
    )


def record_to_json(record: CorruptionRecord) -> str:
    return json.dumps(
        {
            "dialogue_id": record.dialogue_id,
            "turn_index": record.turn_index,
            "clean_tokens": list(record.clean_tokens),
            "noisy_tokens": list(record.noisy_tokens),
            "corrections": [
                {"token_index": c.token_index, "clean": c.clean, "noisy": c.noisy}
                for c in record.corrections
            ],
        }
    )


def record_from_json(line: str, lineno: int | None = None) -> CorruptionRecord:
    try:
        payload = json.loads(line)
        return CorruptionRecord(
            dialogue_id=payload["dialogue_id"],
            turn_index=payload["turn_index"],
            clean_tokens=tuple(payload["clean_tokens"]),
            noisy_tokens=tuple(payload["noisy_tokens"]),
            corrections=tuple(
                Correction(c["token_index"], c["clean"], c["noisy"])
                for c in payload["corrections"]
            ),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed corruption record: {exc}", line=lineno) from None
