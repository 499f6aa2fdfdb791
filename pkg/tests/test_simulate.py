import json
import random

import pytest

from asrsim import (
    Dialogue,
    ModelError,
    ParseError,
    RewriteModel,
    Turn,
    corrupt_dataset,
    corrupt_utterance,
    corrupt_word,
    replay_trace,
)
from asrsim.simulate import (
    CorruptionPolicy,
    derive_turn_seed,
    read_dialogues,
    record_from_json,
    record_to_json,
)
from oracles import levenshtein_dp

TOY_MODEL = RewriteModel(
    replace_counts={("b", 1): {"c": 1}},
    insert_counts={},
    alphabet={"a", "b", "c"},
)


# ---------------------------------------------------------------------------
# Word corruption
# ---------------------------------------------------------------------------

def test_corrupt_word_rejects_bad_inputs(fixture_model):
    rng = random.Random(0)
    with pytest.raises(ValueError):
        corrupt_word("", fixture_model, rng)
    with pytest.raises(ValueError):
        corrupt_word("wi-fi", fixture_model, rng)
    empty = RewriteModel(replace_counts={}, insert_counts={}, alphabet=set())
    with pytest.raises(ModelError):
        corrupt_word("wifi", empty, rng)


def test_degenerate_deletion_model_empties_the_word():
    # sole replacement entry sends a -> *; replacement forced every draw
    model = RewriteModel(
        replace_counts={("a", 0): {"*": 1}},
        insert_counts={},
        alphabet={"a"},
        p_replacement=1.0,
        p_insertion=0.0,
    )
    for seed in range(30):
        noisy, trace = corrupt_word("a", model, random.Random(seed))
        assert noisy == ""
        assert len(trace.edits) == 1  # stops early once the word is gone
        assert trace.edits[0].kind == "delete"


def test_toy_model_single_edit_set():
    # every word reachable in exactly one nonzero-probability edit of "ab"
    reachable = {
        "ac",                       # the trained rewrite b -> c at position 1
        "bb", "cb", "b",            # backoff replacements/deletion at position 0
        "aab", "abb", "acb",        # insertions after position 0
        "aba", "abb", "abc",        # insertions after position 1
    }
    single_edit_outputs = set()
    for seed in range(400):
        noisy, trace = corrupt_word("ab", TOY_MODEL, random.Random(seed))
        if len(trace.edits) == 1:
            single_edit_outputs.add(noisy)
    assert single_edit_outputs <= reachable
    # pinned by seed search: seed 4 draws one edit and lands on the trained rewrite
    noisy, trace = corrupt_word("ab", TOY_MODEL, random.Random(4))
    assert noisy == "ac"
    assert [e.kind for e in trace.edits] == ["replace"]


def test_outputs_stay_within_three_edits(fixture_model):
    rng = random.Random(11)
    words = ["wifi", "alcohols", "deliver", "alimentum", "check"]
    for index in range(1000):
        word = words[index % len(words)]
        noisy, trace = corrupt_word(word, fixture_model, rng)
        assert levenshtein_dp(word, noisy) <= 3
        assert 1 <= len(trace.edits) <= 3


def test_traces_replay_to_the_noisy_word(fixture_model):
    rng = random.Random(23)
    for _ in range(500):
        noisy, trace = corrupt_word("alimentum", fixture_model, rng)
        assert replay_trace("alimentum", trace) == noisy


def test_insertion_trace_positions():
    model = RewriteModel(
        replace_counts={},
        insert_counts={("a", 0): {"x": 1}, ("a", 1): {"x": 1}},
        alphabet={"a", "x"},
        p_replacement=0.0,
        p_insertion=1.0,
    )
    noisy, trace = corrupt_word("aa", model, random.Random(1))
    assert replay_trace("aa", trace) == noisy
    first = trace.edits[0]
    assert first.kind == "insert"
    # inserted letter lands right after the drawn position
    assert noisy != "aa"


def test_corrupt_word_is_deterministic(fixture_model):
    first = [corrupt_word("deliver", fixture_model, random.Random(42)) for _ in range(5)]
    second = [corrupt_word("deliver", fixture_model, random.Random(42)) for _ in range(5)]
    assert first == second


def test_golden_utterance_at_seed_42(fixture_model):
    fragment = corrupt_utterance(["do", "they", "deliver", "food"], fixture_model, random.Random(42))
    assert fragment.noisy_tokens == ("d", "they", "deliver", "feod")
    assert [c.token_index for c in fragment.corrections] == [0, 3]


# ---------------------------------------------------------------------------
# Utterance corruption
# ---------------------------------------------------------------------------

def test_corrupt_utterance_two_tokens(fixture_model):
    rng = random.Random(7)
    for _ in range(50):
        fragment = corrupt_utterance(["do", "they", "deliver", "food"], fixture_model, rng)
        assert len(fragment.noisy_tokens) == 4
        changed = [
            i for i, (a, b) in enumerate(zip(fragment.clean_tokens, fragment.noisy_tokens))
            if a != b
        ]
        assert len(changed) <= 2
        assert [c.token_index for c in fragment.corrections] == changed
        assert fragment.corrections == tuple(sorted(fragment.corrections, key=lambda c: c.token_index))


def test_corrupt_utterance_no_eligible_tokens(fixture_model):
    fragment = corrupt_utterance(["a", "!"], fixture_model, random.Random(0))
    assert fragment.noisy_tokens == ("a", "!")
    assert fragment.corrections == ()


def test_corrupt_utterance_single_eligible_token(fixture_model):
    seen = 0
    for seed in range(20):
        fragment = corrupt_utterance(["hello"], fixture_model, random.Random(seed))
        assert len(fragment.corrections) <= 1
        seen += len(fragment.corrections)
    assert seen >= 18  # cancellation to the clean word is possible but rare


def test_corrupt_utterance_respects_max_words(fixture_model):
    tokens = ["alpha", "bravo", "charlie", "delta", "echo"]
    fragment = corrupt_utterance(tokens, fixture_model, random.Random(3), max_corrupted_words=4)
    changed = sum(a != b for a, b in zip(fragment.clean_tokens, fragment.noisy_tokens))
    assert changed <= 4
    fragment = corrupt_utterance(tokens, fixture_model, random.Random(3), max_corrupted_words=0)
    assert fragment.noisy_tokens == tuple(tokens)


def test_corrupt_utterance_rejects_empty(fixture_model):
    with pytest.raises(ValueError):
        corrupt_utterance([], fixture_model, random.Random(0))


# ---------------------------------------------------------------------------
# Dataset corruption
# ---------------------------------------------------------------------------

def _susd() -> Dialogue:
    return Dialogue(
        "dlg-1",
        (
            Turn("S", "welcome to the hotel"),
            Turn("U", "do they deliver food"),
            Turn("S", "yes they do"),
            Turn("U", "what is the check in time"),
        ),
    )


def test_default_policy_corrupts_last_user_turn_only(fixture_model):
    records = list(corrupt_dataset([_susd()], fixture_model, master_seed=42))
    assert len(records) == 1
    assert records[0].turn_index == 3
    assert records[0].clean_tokens == ("what", "is", "the", "check", "in", "time")


def test_all_user_turns_policy(fixture_model):
    policy = CorruptionPolicy(user_turns_only=True, last_user_turn_only=False)
    records = list(corrupt_dataset([_susd()], fixture_model, master_seed=42, policy=policy))
    assert [r.turn_index for r in records] == [1, 3]


def test_policy_selection_without_user_filter(fixture_model):
    policy = CorruptionPolicy(user_turns_only=False, last_user_turn_only=True)
    records = list(corrupt_dataset([_susd()], fixture_model, master_seed=42, policy=policy))
    assert [r.turn_index for r in records] == [3]


def test_dataset_is_deterministic(fixture_model, dialogue_corpus):
    first = list(corrupt_dataset(dialogue_corpus, fixture_model, master_seed=42))
    second = list(corrupt_dataset(dialogue_corpus, fixture_model, master_seed=42))
    assert first == second


def test_dataset_workers_do_not_change_output(fixture_model, dialogue_corpus):
    serial = list(corrupt_dataset(dialogue_corpus, fixture_model, master_seed=42, workers=1))
    parallel = list(corrupt_dataset(dialogue_corpus, fixture_model, master_seed=42, workers=4))
    assert serial == parallel


def test_duplicate_dialogue_id_rejected(fixture_model):
    dialogues = [_susd(), _susd()]
    with pytest.raises(ParseError, match="duplicate"):
        list(corrupt_dataset(dialogues, fixture_model, master_seed=42))


def test_golden_record_at_seed_42(fixture_model):
    dialogue = Dialogue(
        "dlg-x",
        (Turn("S", "welcome to the hotel"), Turn("U", "ok do they deliver food")),
    )
    (record,) = corrupt_dataset([dialogue], fixture_model, master_seed=42)
    assert json.loads(record_to_json(record)) == {
        "dialogue_id": "dlg-x",
        "turn_index": 1,
        "clean_tokens": ["ok", "do", "they", "deliver", "food"],
        "noisy_tokens": ["ok", "lv", "they", "deliver", "foo"],
        "corrections": [
            {"token_index": 1, "clean": "do", "noisy": "lv"},
            {"token_index": 4, "clean": "food", "noisy": "foo"},
        ],
    }


def test_turn_seed_derivation_separates_streams():
    seeds = {
        derive_turn_seed(42, "dlg-1", 1),
        derive_turn_seed(42, "dlg-1", 3),
        derive_turn_seed(42, "dlg-2", 1),
        derive_turn_seed(43, "dlg-1", 1),
    }
    assert len(seeds) == 4
    assert derive_turn_seed(42, "dlg-1", 1) == derive_turn_seed(42, "dlg-1", 1)


# ---------------------------------------------------------------------------
# Dataset formats
# ---------------------------------------------------------------------------

def test_read_dialogues_round_trip():
    line = json.dumps(
        {"dialogue_id": "d9", "turns": [{"speaker": "U", "text": "hi there"}]}
    )
    (dialogue,) = read_dialogues([line])
    assert dialogue.dialogue_id == "d9"
    assert dialogue.turns[0].speaker == "U"


def test_read_dialogues_errors_name_lines():
    with pytest.raises(ParseError, match="line 2"):
        list(read_dialogues(['{"dialogue_id": "a", "turns": []}', "{broken"]))
    with pytest.raises(ParseError, match="line 1"):
        list(read_dialogues(['{"turns": []}']))
    with pytest.raises(ParseError, match="speaker"):
        list(
            read_dialogues(
                ['{"dialogue_id": "a", "turns": [{"speaker": "X", "text": "hm"}]}']
            )
        )


def test_record_json_round_trip(fixture_model):
    (record,) = corrupt_dataset([_susd()], fixture_model, master_seed=1)
    assert record_from_json(record_to_json(record)) == record
