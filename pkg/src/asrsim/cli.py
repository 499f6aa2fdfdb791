"""Command-line pipeline: build a channel model, sample errors, corrupt
corpora, cluster a knowledge base, and report model statistics.

Exit codes: 0 success, 1 usage error, 2 data error. Output files are
written to a temporary sibling and renamed into place, so a failing run
never leaves a partial file behind.
"""

from __future__ import annotations

import argparse
import io
import os
import random
import sys
import tempfile
from pathlib import Path
from typing import Iterable

from . import kb
from .cn import align_nbest_to_cn, parse_nbest_corpus, parse_sausage_corpus
from .edit_model import (
    DEFAULT_POSITION_CAP,
    GAP,
    estimate_model,
    extract_confusion_pairs,
    load_model,
    save_model,
)
from .errors import ToolkitError
from .simulate import (
    CorruptionPolicy,
    corrupt_dataset,
    corrupt_word,
    read_dialogues,
    record_to_json,
    token_eligible,
)

DEFAULT_SEED = 42


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this toolkit reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _unit_fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def _atomic_write(path: Path, chunks: Iterable[str]) -> None:
    path = Path(path)
    handle = tempfile.NamedTemporaryFile(
        mode="w",
        encoding="utf-8",
        dir=path.parent or Path("."),
        prefix=path.name + ".",
        suffix=".tmp",
        delete=False,
    )
    try:
        with handle:
            for chunk in chunks:
                handle.write(chunk)
        os.replace(handle.name, path)
    except BaseException:
        os.unlink(handle.name)
        raise


def _collect_input_files(paths: list[str]) -> list[Path]:
    files: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            files.extend(sorted(p for p in path.iterdir() if p.is_file()))
        elif path.is_file():
            files.append(path)
        else:
            raise ToolkitError(f"input {raw!r} is not a file or directory")
    if not files:
        raise ToolkitError("no input files found")
    return files


def detect_format(text: str) -> str:
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        first = stripped.split()[0]
        return "sausage" if first in ("align", "name") else "nbest"
    raise ToolkitError("cannot detect format of an empty file")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_build(args) -> int:
    files = _collect_input_files(args.inputs)
    pairs = []
    networks = 0
    for path in files:
        text = path.read_text(encoding="utf-8")
        fmt = args.format if args.format != "auto" else detect_format(text)
        if fmt == "sausage":
            cns = parse_sausage_corpus(text)
        else:
            cns = [align_nbest_to_cn(nbest) for nbest in parse_nbest_corpus(text)]
        networks += len(cns)
        for cn in cns:
            pairs.extend(extract_confusion_pairs(cn))
    if not pairs:
        raise ToolkitError(
            "no usable confusion pairs: every slot had fewer than two plain-letter "
            "alternatives; check the input format and that slots carry alternatives"
        )
    model = estimate_model(pairs, position_cap=args.position_cap)
    buffer = io.StringIO()
    save_model(model, buffer)
    _atomic_write(Path(args.output), [buffer.getvalue()])
    print(f"networks: {networks}")
    print(f"confusion pairs: {len(pairs)}")
    print(f"alphabet size: {len(model.alphabet)}")
    print(f"replace contexts: {len(model.replace_counts)}")
    print(f"insert contexts: {len(model.insert_counts)}")
    print(f"model written to {args.output}")
    return 0


def _format_trace(trace) -> str:
    return " ".join(f"{e.kind}@{e.position}:{e.src}->{e.dst}" for e in trace.edits)


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    if not token_eligible(args.word):
        raise ToolkitError(
            f"word {args.word!r} is not corruptible: need >= 2 letters, letters only"
        )
    rng = random.Random(args.seed)
    for _ in range(args.count):
        noisy, trace = corrupt_word(args.word, model, rng)
        if args.verbose:
            print(f"{noisy}\t{_format_trace(trace)}")
        else:
            print(noisy)
    return 0


def cmd_corrupt(args) -> int:
    model = load_model(args.model)
    policy = CorruptionPolicy(user_turns_only=True, last_user_turn_only=args.last_turn_only)
    stats = {"dialogues": 0, "records": 0, "corrupted_tokens": 0}

    def dialogues():
        with open(args.dataset, encoding="utf-8") as handle:
            for dialogue in read_dialogues(handle):
                stats["dialogues"] += 1
                yield dialogue

    def lines():
        records = corrupt_dataset(
            dialogues(),
            model,
            master_seed=args.seed,
            policy=policy,
            max_corrupted_words=args.max_words,
            workers=args.workers,
        )
        for record in records:
            stats["records"] += 1
            stats["corrupted_tokens"] += len(record.corrections)
            yield record_to_json(record) + "\n"

    _atomic_write(Path(args.output), lines())
    print(f"dialogues: {stats['dialogues']}")
    print(f"records: {stats['records']}")
    print(f"corrupted tokens: {stats['corrupted_tokens']}")
    return 0


def cmd_cluster(args) -> int:
    entries = kb.load_knowledge_base(Path(args.kb).read_text(encoding="utf-8"))
    if getattr(args, "clusters", None):
        clusters = kb.clusters_from_json(Path(args.clusters).read_text(encoding="utf-8"))
    else:
        clusters = kb.initial_clusters(entries)

    if args.cluster_command == "init":
        _atomic_write(Path(args.output), [kb.clusters_to_json(clusters)])
        print(f"entries: {len(entries)}")
        print(f"clusters: {len(clusters)} (including reserved cluster 0)")
    elif args.cluster_command == "pairs":
        rng = random.Random(args.seed)
        examples = kb.generate_pair_dataset(entries, clusters, rng)
        _atomic_write(
            Path(args.output),
            (kb.pair_example_to_json(e) + "\n" for e in examples),
        )
        positives = sum(1 for e in examples if e.label == "positive")
        negatives = len(examples) - positives
        if negatives == 0:
            print(
                "warning: no negatives generated (every entity has a single title)",
                file=sys.stderr,
            )
        print(f"positives: {positives}")
        print(f"negatives: {negatives}")
    else:
        oracle = kb.jaccard_oracle()

        def report(round_number: int, state) -> None:
            print(f"round {round_number}: {len(state)} clusters")

        merged = kb.merge_clusters(
            clusters,
            entries,
            oracle,
            positive_threshold=args.threshold,
            majority_fraction=args.majority,
            progress=report,
        )
        if args.overrides:
            overrides = kb.parse_overrides(Path(args.overrides).read_text(encoding="utf-8"))
            merged = kb.apply_overrides(merged, overrides)
        _atomic_write(Path(args.output), [kb.clusters_to_json(merged)])
        print(f"final: {len(merged)} clusters")
    return 0


def cmd_stats(args) -> int:
    model = load_model(args.model)
    replace_events = sum(sum(t.values()) for t in model.replace_counts.values())
    insert_events = sum(sum(t.values()) for t in model.insert_counts.values())
    print(f"alphabet ({len(model.alphabet)}): {' '.join(sorted(model.alphabet))}")
    print(f"position_cap: {model.position_cap}")
    print(f"edit count range: {list(model.edit_count_range)}")
    print(f"p_replacement: {model.p_replacement}  p_insertion: {model.p_insertion}")
    print(f"replace contexts: {len(model.replace_counts)} ({replace_events} events)")
    print(f"insert contexts: {len(model.insert_counts)} ({insert_events} events)")
    print("rewrites by source letter (position-pooled, identity excluded):")
    pooled: dict[str, dict[str, int]] = {}
    for (letter, _), table in sorted(model.replace_counts.items()):
        for target, count in table.items():
            if target != letter:
                pooled.setdefault(letter, {})
                pooled[letter][target] = pooled[letter].get(target, 0) + count
    for letter in sorted(pooled):
        table = pooled[letter]
        total = sum(table.values())
        top = sorted(table.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
        rendered = ", ".join(f"{t} {c / total:.3f}" for t, c in top)
        deletion_mass = table.get(GAP, 0) / total
        print(f"  {letter}: {rendered} (deletion mass {deletion_mass:.3f})")
    return 0


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="asrsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_build = sub.add_parser("build", help="estimate a rewrite model from decoder outputs")
    p_build.add_argument("inputs", nargs="+", help="N-best or sausage files (or directories)")
    p_build.add_argument("-o", "--output", required=True, help="model file to write")
    p_build.add_argument("--position-cap", type=_positive_int, default=DEFAULT_POSITION_CAP)
    p_build.add_argument("--format", choices=("auto", "nbest", "sausage"), default="auto")
    p_build.set_defaults(func=cmd_build)

    p_sim = sub.add_parser("simulate", help="sample erroneous variants of a word")
    p_sim.add_argument("model")
    p_sim.add_argument("word")
    p_sim.add_argument("-n", "--count", type=_nonnegative_int, default=10)
    p_sim.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_sim.add_argument("--verbose", action="store_true", help="append the edit trace")
    p_sim.set_defaults(func=cmd_simulate)

    p_cor = sub.add_parser("corrupt", help="corrupt a dialogue dataset with corrective labels")
    p_cor.add_argument("model")
    p_cor.add_argument("dataset", help="line-delimited dialogue JSON")
    p_cor.add_argument("-o", "--output", required=True)
    p_cor.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_cor.add_argument("--max-words", type=_nonnegative_int, default=2)
    p_cor.add_argument("--workers", type=_positive_int, default=1)
    turns = p_cor.add_mutually_exclusive_group()
    turns.add_argument(
        "--last-turn-only", dest="last_turn_only", action="store_true", default=True
    )
    turns.add_argument("--all-user-turns", dest="last_turn_only", action="store_false")
    p_cor.set_defaults(func=cmd_corrupt)

    p_clu = sub.add_parser("cluster", help="knowledge-base clustering pipeline")
    clu_sub = p_clu.add_subparsers(dest="cluster_command", required=True, parser_class=_Parser)
    for name, description in (
        ("init", "group titles by normalization key"),
        ("pairs", "emit the positive/negative title-body pair dataset"),
        ("merge", "iteratively merge clusters under the similarity oracle"),
    ):
        p = clu_sub.add_parser(name, help=description)
        p.add_argument("kb", help="knowledge base JSON file")
        p.add_argument("-o", "--output", required=True)
        if name != "init":
            p.add_argument("--clusters", help="cluster file from a previous step")
        if name == "pairs":
            p.add_argument("--seed", type=int, default=DEFAULT_SEED)
        if name == "merge":
            p.add_argument("--threshold", type=_unit_fraction, default=0.5)
            p.add_argument("--majority", type=_unit_fraction, default=0.5)
            p.add_argument("--overrides", help="manual adjustment file")
        p.set_defaults(func=cmd_cluster)

    p_stats = sub.add_parser("stats", help="report a model's contents")
    p_stats.add_argument("model")
    p_stats.set_defaults(func=cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ToolkitError, OSError, ValueError) as exc:
        print(f"asrsim: error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
