"""Unsupervised grouping of knowledge-base titles into topic clusters.

Titles collapse to a normalization key (lowercase, punctuation stripped,
stopwords dropped, light plural stripping, tokens sorted); equal keys seed
the initial clusters, e.g. "Does it have free wifi?" and "Is the wifi free"
both key to "free wifi". Clusters are then merged iteratively: a pluggable
oracle scores cross title-body pairs in [0, 1], and two clusters combine
when the fraction of positively scored pairs clears a majority. A lexical
Jaccard oracle ships as the hermetic default; a trained pair classifier can
be dropped in through the same callable seam.

Cluster id 0 is reserved for the non-knowledge class and never merges.
"""

from __future__ import annotations

import json
import random
import string
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Callable, Iterable

from .errors import ClusterMergeError, ParseError

NON_KNOWLEDGE_CLUSTER_ID = 0

DocRef = tuple[str, str, str]  # (domain, entity_id, doc_id)

DEFAULT_STOPWORDS = frozenset(
    """
    a an the is are was were be been being am do does did doing have has had
    having can could will would shall should may might must it its this that
    these those there here i me my mine we us our ours you your yours he him
    his she her hers they them their theirs what which who whom whose when
    where why how and or but if then than so too very of for to in on at by
    with about as from into over under again please hi hello hey ok okay any
    some all much many more most other both each few no not only own same
    just dont doesnt didnt isnt arent wasnt werent cant wont im ive id ill
    youre youve whats theres thats
    """.split()
)

_PUNCT_TABLE = str.maketrans("", "", string.punctuation + "‘’“”")


def normalize_title(title: str, stopwords: frozenset[str] | set[str] | None = None) -> str:
    """Collapse a title to its sorted content-token key.

    All-stopword titles map to the empty key. Stopwords are re-checked after
    plural stripping so the result is a fixed point of this function.
    """
    stop = DEFAULT_STOPWORDS if stopwords is None else stopwords
    kept = []
    for token in title.lower().translate(_PUNCT_TABLE).split():
        if token in stop:
            continue
        if len(token) >= 4 and token.endswith("s") and not token.endswith("ss"):
            token = token[:-1]
        if token in stop:
            continue
        kept.append(token)
    return " ".join(sorted(kept))


@dataclass(frozen=True)
class KnowledgeEntry:
    domain: str
    entity_id: str
    doc_id: str
    title: str
    body: str

    def __post_init__(self):
        if not self.title:
            raise ValueError(f"entry {(self.domain, self.entity_id, self.doc_id)} has an empty title")

    @property
    def ref(self) -> DocRef:
        return (self.domain, self.entity_id, self.doc_id)


@dataclass(frozen=True)
class KnowledgeCluster:
    cluster_id: int
    key: str
    members: tuple[DocRef, ...]


@dataclass(frozen=True)
class PairExample:
    title: str
    body: str
    label: str  # positive | negative


def load_knowledge_base(text: str) -> list[KnowledgeEntry]:
    """Parse the nested domain -> entity -> docs knowledge-base JSON."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"knowledge base is not valid JSON: {exc.msg}") from None
    if not isinstance(payload, dict):
        raise ParseError("knowledge base must be an object keyed by domain")
    entries: list[KnowledgeEntry] = []
    for domain, entities in payload.items():
        if not isinstance(entities, dict):
            raise ParseError(f"domain {domain!r} must map entity ids to entities")
        for entity_id, entity in entities.items():
            docs = entity.get("docs") if isinstance(entity, dict) else None
            if not isinstance(docs, dict):
                raise ParseError(f"entity {domain}/{entity_id} has no docs map")
            for doc_id, doc in docs.items():
                if not isinstance(doc, dict) or "title" not in doc or "body" not in doc:
                    raise ParseError(f"doc {domain}/{entity_id}/{doc_id} needs title and body")
                try:
                    entries.append(
                        KnowledgeEntry(
                            domain=domain,
                            entity_id=str(entity_id),
                            doc_id=str(doc_id),
                            title=doc["title"],
                            body=doc["body"],
                        )
                    )
                except ValueError as exc:
                    raise ParseError(str(exc)) from None
    entries.sort(key=lambda e: e.ref)
    return entries


def initial_clusters(
    entries: Iterable[KnowledgeEntry],
    stopwords: frozenset[str] | set[str] | None = None,
) -> list[KnowledgeCluster]:
    """Group entries by normalization key.

    Entries whose key is empty are topically opaque and stay singletons.
    Ids run 1..N in deterministic key order; id 0 is the reserved
    non-knowledge cluster and is always present (and empty of entries).
    """
    keyed: dict[str, list[DocRef]] = {}
    singletons: list[DocRef] = []
    for entry in sorted(entries, key=lambda e: e.ref):
        key = normalize_title(entry.title, stopwords)
        if key:
            keyed.setdefault(key, []).append(entry.ref)
        else:
            singletons.append(entry.ref)
    clusters = [KnowledgeCluster(NON_KNOWLEDGE_CLUSTER_ID, "", ())]
    next_id = 1
    for key in sorted(keyed):
        clusters.append(KnowledgeCluster(next_id, key, tuple(sorted(keyed[key]))))
        next_id += 1
    for ref in singletons:
        clusters.append(KnowledgeCluster(next_id, "", (ref,)))
        next_id += 1
    return clusters


def generate_pair_dataset(
    entries: Iterable[KnowledgeEntry],
    clusters: Iterable[KnowledgeCluster],
    rng: random.Random,
) -> list[PairExample]:
    """Build the title-body pair dataset for an external pair classifier.

    Positives: every entry's own (title, body), plus cross-enumerated
    (title_a, body_b) over distinct entries of the same cluster. Negatives:
    each entry's body under a uniformly drawn different title from the same
    entity; entities with a single distinct title contribute none.
    """
    ordered = sorted(entries, key=lambda e: e.ref)
    by_ref = {e.ref: e for e in ordered}
    examples = [PairExample(e.title, e.body, "positive") for e in ordered]
    for cluster in sorted(clusters, key=lambda c: c.cluster_id):
        members = [by_ref[ref] for ref in cluster.members]
        for a in members:
            for b in members:
                if a.ref != b.ref:
                    examples.append(PairExample(a.title, b.body, "positive"))
    by_entity: dict[tuple[str, str], list[KnowledgeEntry]] = {}
    for entry in ordered:
        by_entity.setdefault((entry.domain, entry.entity_id), []).append(entry)
    for entry in ordered:
        others = sorted(
            {e.title for e in by_entity[(entry.domain, entry.entity_id)] if e.title != entry.title}
        )
        if others:
            examples.append(PairExample(rng.choice(others), entry.body, "negative"))
    return examples


def jaccard_oracle(
    stopwords: frozenset[str] | set[str] | None = None,
) -> Callable[[str, str], float]:
    """Default similarity oracle: token Jaccard over normalized title and body."""

    @lru_cache(maxsize=None)
    def tokens(text: str) -> frozenset[str]:
        return frozenset(normalize_title(text, stopwords).split())

    def judge(title: str, body: str) -> float:
        a, b = tokens(title), tokens(body)
        if not a and not b:
            return 1.0
        if not a or not b:
            return 0.0
        return len(a & b) / len(a | b)

    return judge


def merge_clusters(
    clusters: Iterable[KnowledgeCluster],
    entries: Iterable[KnowledgeEntry],
    oracle: Callable[[str, str], float],
    positive_threshold: float = 0.5,
    majority_fraction: float = 0.5,
    candidate_pairs: Iterable[tuple[int, int]] | None = None,
    progress: Callable[[int, list[KnowledgeCluster]], None] | None = None,
) -> list[KnowledgeCluster]:
    """Iteratively combine clusters whose cross pairs the oracle endorses.

    Per round, every cluster pair (optionally restricted to
    ``candidate_pairs``, e.g. from body_merge_proposals) is scored on all
    cross (title, body) combinations in both directions; pairs whose
    fraction of scores >= positive_threshold strictly exceeds
    majority_fraction become merge candidates. Candidates apply greedily by
    descending fraction (ties toward lower ids), each cluster merging at
    most once per round; the surviving cluster keeps the lower id and its
    key. Rounds repeat until none merge. ``progress`` is called with
    (round_number, clusters_after_round) after each round.

    An oracle exception or out-of-range score aborts with a
    ClusterMergeError carrying the clusters merged so far.
    """
    if not 0 < majority_fraction <= 1:
        raise ValueError(f"majority_fraction must be in (0, 1], got {majority_fraction}")
    by_ref = {e.ref: e for e in entries}
    state: dict[int, tuple[str, list[DocRef]]] = {
        c.cluster_id: (c.key, list(c.members)) for c in clusters
    }
    for key, members in state.values():
        for ref in members:
            if ref not in by_ref:
                raise ValueError(f"cluster member {ref} has no matching entry")
    allowed = (
        {tuple(sorted(pair)) for pair in candidate_pairs}
        if candidate_pairs is not None
        else None
    )

    def snapshot() -> list[KnowledgeCluster]:
        return [
            KnowledgeCluster(cid, state[cid][0], tuple(sorted(state[cid][1])))
            for cid in sorted(state)
        ]

    rounds = 0
    while True:
        active = sorted(
            cid
            for cid, (_, members) in state.items()
            if cid != NON_KNOWLEDGE_CLUSTER_ID and members
        )
        candidates: list[tuple[float, int, int]] = []
        for a, b in combinations(active, 2):
            if allowed is not None and (a, b) not in allowed:
                continue
            hits = 0
            total = 0
            for ref_a in state[a][1]:
                for ref_b in state[b][1]:
                    judgments = (
                        (by_ref[ref_a].title, by_ref[ref_b].body),
                        (by_ref[ref_b].title, by_ref[ref_a].body),
                    )
                    for title, body in judgments:
                        try:
                            score = oracle(title, body)
                        except Exception as exc:
                            raise ClusterMergeError(
                                f"oracle failed on cluster pair ({a}, {b}) after "
                                f"{rounds} completed rounds: {exc}",
                                partial=snapshot(),
                                rounds_completed=rounds,
                            ) from exc
                        if not isinstance(score, (int, float)) or not 0.0 <= score <= 1.0:
                            raise ClusterMergeError(
                                f"oracle returned {score!r} for cluster pair ({a}, {b}); "
                                "scores must lie in [0, 1]",
                                partial=snapshot(),
                                rounds_completed=rounds,
                            )
                        total += 1
                        hits += score >= positive_threshold
            if total and hits / total > majority_fraction:
                candidates.append((hits / total, a, b))

        candidates.sort(key=lambda item: (-item[0], item[1], item[2]))
        merged_ids: set[int] = set()
        merges = 0
        for _, a, b in candidates:
            if a in merged_ids or b in merged_ids:
                continue
            key_a, members_a = state[a]
            members_a.extend(state[b][1])
            del state[b]
            merged_ids.update((a, b))
            merges += 1
        rounds += 1
        if progress is not None:
            progress(rounds, snapshot())
        if merges == 0:
            break
    return snapshot()


def body_merge_proposals(
    entries: Iterable[KnowledgeEntry],
    clusters: Iterable[KnowledgeCluster],
    stopwords: frozenset[str] | set[str] | None = None,
    min_tokens: int = 3,
) -> set[tuple[int, int]]:
    """Cluster pairs whose members share a normalized body key.

    A shared body usually implies a shared topic, so these pairs are good
    merge candidates; bodies normalizing to fewer than ``min_tokens`` tokens
    carry too little signal and are ignored. Proposals never merge anything
    by themselves; feed them to merge_clusters as candidate_pairs.
    """
    ref_to_cluster = {ref: c.cluster_id for c in clusters for ref in c.members}
    groups: dict[str, set[int]] = {}
    for entry in entries:
        key = normalize_title(entry.body, stopwords)
        if len(key.split()) < min_tokens:
            continue
        groups.setdefault(key, set()).add(ref_to_cluster[entry.ref])
    proposals: set[tuple[int, int]] = set()
    for ids in groups.values():
        proposals.update(combinations(sorted(ids), 2))
    return proposals


def apply_overrides(
    clusters: Iterable[KnowledgeCluster],
    overrides: Iterable[tuple[DocRef, int]],
) -> list[KnowledgeCluster]:
    """Move documents to forced cluster ids (the manual-adjustment hook).

    Target clusters are created on demand with an empty key; clusters other
    than 0 that end up empty are dropped. The result is still a partition.
    """
    state: dict[int, tuple[str, set[DocRef]]] = {
        c.cluster_id: (c.key, set(c.members)) for c in clusters
    }
    location = {ref: cid for cid, (_, members) in state.items() for ref in members}
    for ref, target in overrides:
        ref = tuple(ref)
        if ref not in location:
            raise ParseError(f"override references unknown doc {ref}")
        if target < 0:
            raise ParseError(f"override cluster id must be >= 0, got {target}")
        state[location[ref]][1].discard(ref)
        if target not in state:
            state[target] = ("", set())
        state[target][1].add(ref)
        location[ref] = target
    return [
        KnowledgeCluster(cid, key, tuple(sorted(members)))
        for cid, (key, members) in sorted(state.items())
        if members or cid == NON_KNOWLEDGE_CLUSTER_ID
    ]


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def clusters_to_json(clusters: Iterable[KnowledgeCluster]) -> str:
    payload = [
        {"cluster_id": c.cluster_id, "key": c.key, "members": [list(ref) for ref in c.members]}
        for c in sorted(clusters, key=lambda c: c.cluster_id)
    ]
    return json.dumps(payload, indent=2) + "\n"


def clusters_from_json(text: str) -> list[KnowledgeCluster]:
    try:
        payload = json.loads(text)
        return [
            KnowledgeCluster(
                cluster_id=item["cluster_id"],
                key=item["key"],
                members=tuple(tuple(ref) for ref in item["members"]),
            )
            for item in payload
        ]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed clusters file: {exc}") from None


def parse_overrides(text: str) -> list[tuple[DocRef, int]]:
    try:
        payload = json.loads(text)
        return [
            (tuple(item["doc_ref"]), int(item["forced_cluster_id"])) for item in payload
        ]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed override file: {exc}") from None


def pair_example_to_json(example: PairExample) -> str:
    return json.dumps({"title": example.title, "body": example.body, "label": example.label})
