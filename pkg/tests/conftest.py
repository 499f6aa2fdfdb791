import random

import pytest

from asrsim import (
    Dialogue,
    Turn,
    estimate_model,
    extract_confusion_pairs,
    parse_confusion_network,
)

# Synthetic sausage over a small hotel/restaurant vocabulary, shaped like
# what a decoder produces on such dialogues: each slot holds acoustically
# close variants of one clean word.
SYNTHETIC_SAUSAGE = """\
name synthetic-vocab
align 0 alcohols 0.4 alchols 0.2 alcohos 0.2 alcohls 0.1 alchos 0.1
align 1 alimentum 0.4 alimentm 0.2 alimetum 0.2 alimenum 0.2
align 2 wifi 0.4 wifr 0.2 wivi 0.2 wrfi 0.1 wifie 0.1
align 3 delver 0.3 deliver 0.3 delo 0.1 over 0.1 lover 0.1 del 0.05 dolo 0.05
align 4 check 0.5 chek 0.3 cheek 0.2
align 5 in 0.6 kin 0.4
"""

_WORD_POOL = [
    "do", "they", "deliver", "food", "what", "is", "the", "check", "in",
    "time", "for", "that", "hotel", "offer", "free", "wifi", "good",
    "place", "large", "groups", "daily", "house", "keeping", "know",
    "possibly", "alcohols", "serve", "you", "it", "a", "£5", "ok!", "2",
]


@pytest.fixture(scope="session")
def fixture_model():
    cn = parse_confusion_network(SYNTHETIC_SAUSAGE)
    return estimate_model(extract_confusion_pairs(cn))


def make_dialogues(count: int, seed: int = 7) -> list[Dialogue]:
    """Deterministic dialogue corpus; every dialogue ends on a user turn."""
    rng = random.Random(seed)

    def sentence() -> str:
        return " ".join(rng.choice(_WORD_POOL) for _ in range(rng.randint(3, 8)))

    dialogues = []
    for index in range(count):
        turns = []
        for _ in range(rng.randint(1, 3)):
            turns.append(Turn("S", sentence()))
            turns.append(Turn("U", sentence()))
        dialogues.append(Dialogue(f"dlg-{index:04d}", tuple(turns)))
    return dialogues


@pytest.fixture(scope="session")
def dialogue_corpus():
    return make_dialogues(100)
