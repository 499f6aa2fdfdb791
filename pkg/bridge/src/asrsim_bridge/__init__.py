"""Training-loop bindings for the asrsim error channel.

ML data loaders shard and reorder work, so a stateful random stream across
this boundary would make batches irreproducible. Every operation here takes
an explicit per-call seed instead; outputs are bit-identical to the core
library (and its CLI) under the same (model, input, seed), in any process.
A loaded handle is immutable and safe to share across loader workers.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator

from asrsim import RewriteModel
from asrsim import load_model as _load_model
from asrsim.simulate import (
    CorruptedUtterance,
    EditTrace,
    corrupt_dataset,
    read_dialogues,
)
from asrsim.simulate import corrupt_utterance as _corrupt_utterance
from asrsim.simulate import corrupt_word as _corrupt_word

DEFAULT_SEED = 42

__all__ = ["BoundModel", "load", "corrupt_word", "corrupt_utterance", "example_batcher"]


@dataclass(frozen=True)
class BoundModel:
    """Immutable handle to a loaded rewrite model plus its default seed."""

    model: RewriteModel
    seed: int = DEFAULT_SEED


def load(model_path: str | Path | IO[str], seed: int = DEFAULT_SEED) -> BoundModel:
    """Load a model file into a shareable handle; raises on a corrupt file."""
    return BoundModel(model=_load_model(model_path), seed=seed)


def corrupt_word(
    handle: BoundModel, word: str, seed: int | None = None
) -> tuple[str, EditTrace]:
    """Sample one erroneous version of ``word``; the seed pins the outcome."""
    rng = random.Random(handle.seed if seed is None else seed)
    return _corrupt_word(word, handle.model, rng)


def corrupt_utterance(
    handle: BoundModel,
    tokens: list[str] | tuple[str, ...],
    seed: int | None = None,
    max_words: int = 2,
) -> CorruptedUtterance:
    """Corrupt up to ``max_words`` tokens, returning corrective labels."""
    rng = random.Random(handle.seed if seed is None else seed)
    return _corrupt_utterance(tokens, handle.model, rng, max_corrupted_words=max_words)


def example_batcher(
    dataset_path: str | Path,
    model_path: str | Path,
    batch_size: int,
    seed: int = DEFAULT_SEED,
    max_words: int = 2,
) -> Iterator[tuple[list[list[str]], list[list[str]], list[list[int]]]]:
    """Yield (noisy_tokens, clean_tokens, correction_mask) batches.

    Each batch holds up to ``batch_size`` corrupted utterances as three
    aligned lists; the mask is 1 exactly at corrected token indices — the
    supervision a double-headed trainer needs to restore corrupted tokens
    while classifying the utterance. A fixed seed fixes every batch.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    handle = load(model_path)
    with open(dataset_path, encoding="utf-8") as stream:
        dialogues = list(read_dialogues(stream))
    noisy_batch: list[list[str]] = []
    clean_batch: list[list[str]] = []
    mask_batch: list[list[int]] = []
    records = corrupt_dataset(
        dialogues, handle.model, master_seed=seed, max_corrupted_words=max_words
    )
    for record in records:
        mask = [0] * len(record.clean_tokens)
        for correction in record.corrections:
            mask[correction.token_index] = 1
        noisy_batch.append(list(record.noisy_tokens))
        clean_batch.append(list(record.clean_tokens))
        mask_batch.append(mask)
        if len(noisy_batch) == batch_size:
            yield noisy_batch, clean_batch, mask_batch
            noisy_batch, clean_batch, mask_batch = [], [], []
    if noisy_batch:
        yield noisy_batch, clean_batch, mask_batch
