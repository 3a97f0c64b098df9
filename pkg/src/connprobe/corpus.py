"""Task datasets: descriptor-driven loading, coordination-inversion generation, subsets."""

from __future__ import annotations

import configparser
import json
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .errors import (
    EmptyClause,
    MalformedRow,
    MissingSplit,
    MultipleConnectives,
    NoConnective,
    UnknownLabel,
)
from .lexicon import TaggedSentence, tokenize

log = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test")


class TaskKind(Enum):
    SINGLE_SENTENCE = "single_sentence"
    SENTENCE_PAIR = "sentence_pair"

    @property
    def arity(self) -> int:
        return 1 if self is TaskKind.SINGLE_SENTENCE else 2


@dataclass(frozen=True)
class Example:
    id: str
    texts: tuple[str, ...]
    label: str
    split: str


@dataclass(frozen=True)
class Dataset:
    name: str
    task: TaskKind
    labels: tuple[str, ...]
    examples: Mapping[str, tuple[Example, ...]]  # split -> examples

    def __post_init__(self):
        seen = set()
        for split, exs in self.examples.items():
            if split not in SPLITS:
                raise ValueError(f"unknown split {split!r}")
            for ex in exs:
                if ex.id in seen:
                    raise ValueError(f"duplicate example id {ex.id!r}")
                seen.add(ex.id)
                if len(ex.texts) != self.task.arity:
                    raise ValueError(f"example {ex.id!r} has {len(ex.texts)} texts for task {self.task.value}")
                if ex.label not in self.labels:
                    raise ValueError(f"example {ex.id!r} has undeclared label {ex.label!r}")

    def split(self, name: str) -> tuple[Example, ...]:
        return self.examples.get(name, ())

    @property
    def test(self) -> tuple[Example, ...]:
        return self.split("test")


@dataclass(frozen=True)
class Subset:
    """A named selection of test-split example ids."""

    dataset: str
    selector: str  # all | has_connective | connective:<lemma> | type:<name> | validity:<label>
    ids: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class DatasetSpec:
    """Declarative descriptor binding a dataset name to files on disk."""

    name: str
    task: TaskKind
    labels: tuple[str, ...]
    paths: dict[str, Path]  # split -> file
    columns: tuple[str, ...] = ()  # TSV field order, e.g. ("text", "label")
    exclusions: Path | None = None
    validation_fraction: float = 0.1
    carve_seed: int = 13

    @classmethod
    def from_file(cls, path) -> "DatasetSpec":
        """Parse an INI-style descriptor with a [dataset] section.

        Keys: name, task, labels, train, validation, test, columns, and
        optionally exclusions, validation_fraction, carve_seed. Relative
        file paths resolve against the descriptor's directory.
        """
        path = Path(path)
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise FileNotFoundError(path)
        if "dataset" not in parser:
            raise MalformedRow(0, f"{path} has no [dataset] section")
        sec = parser["dataset"]
        base = path.parent
        task = TaskKind(sec.get("task", "single_sentence").strip().lower())
        labels = tuple(x.strip() for x in sec.get("labels", "").split(",") if x.strip())
        if not labels:
            raise MalformedRow(0, f"{path} declares no labels")
        paths = {}
        for split in SPLITS:
            if sec.get(split):
                paths[split] = (base / sec[split]).resolve()
        columns = tuple(x.strip() for x in sec.get("columns", "").split(",") if x.strip())
        return cls(
            name=sec.get("name", path.stem),
            task=task,
            labels=labels,
            paths=paths,
            columns=columns,
            exclusions=(base / sec["exclusions"]).resolve() if sec.get("exclusions") else None,
            validation_fraction=sec.getfloat("validation_fraction", fallback=0.1),
            carve_seed=sec.getint("carve_seed", fallback=13),
        )


def _default_columns(task: TaskKind) -> tuple[str, ...]:
    return ("text", "label") if task is TaskKind.SINGLE_SENTENCE else ("text1", "text2", "label")


def _read_tsv(path: Path, spec: DatasetSpec, split: str) -> list[Example]:
    columns = spec.columns or _default_columns(spec.task)
    text_cols = [c for c in columns if c != "label"]
    if "label" not in columns or len(text_cols) != spec.task.arity:
        raise MalformedRow(0, f"column mapping {columns} does not fit task {spec.task.value}")
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != len(columns):
                raise MalformedRow(lineno, f"expected {len(columns)} fields, got {len(fields)}")
            row = dict(zip(columns, fields))
            label = row["label"].strip()
            if label not in spec.labels:
                raise UnknownLabel(label, lineno)
            texts = tuple(row[c] for c in text_cols)
            examples.append(Example(id=f"{spec.name}-{split}-{lineno}", texts=texts, label=label, split=split))
    return examples


def _read_jsonl(path: Path, spec: DatasetSpec, split: str) -> list[Example]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRow(lineno, str(exc)) from None
            # A combined file may carry several splits; keep rows matching ours.
            if obj.get("split", split) != split:
                continue
            try:
                texts = tuple(obj["texts"])
                label = str(obj["label"])
                ex_id = str(obj["id"])
            except (KeyError, TypeError) as exc:
                raise MalformedRow(lineno, f"missing field {exc}") from None
            if len(texts) != spec.task.arity:
                raise MalformedRow(lineno, f"expected {spec.task.arity} texts, got {len(texts)}")
            if label not in spec.labels:
                raise UnknownLabel(label, lineno)
            examples.append(Example(id=ex_id, texts=texts, label=label, split=split))
    return examples


def load_dataset(spec: DatasetSpec | str | Path, carve_validation: bool = True) -> Dataset:
    """Load and validate the splits declared by a descriptor.

    When no validation file is declared, a `validation_fraction` share of
    train is carved off deterministically by `carve_seed`.
    """
    if not isinstance(spec, DatasetSpec):
        spec = DatasetSpec.from_file(spec)
    if "test" not in spec.paths:
        raise MissingSplit("test", f"descriptor for {spec.name} declares no test file")
    examples: dict[str, tuple[Example, ...]] = {}
    for split, path in spec.paths.items():
        if not path.exists():
            raise MissingSplit(split, f"file not found: {path}")
        reader = _read_jsonl if path.suffix in (".jsonl", ".json") else _read_tsv
        examples[split] = tuple(reader(path, spec, split))

    if carve_validation and "validation" not in examples and "train" in examples and spec.validation_fraction > 0:
        train = list(examples["train"])
        k = int(round(spec.validation_fraction * len(train)))
        if 0 < k < len(train):
            rng = random.Random(spec.carve_seed)
            val_idx = set(rng.sample(range(len(train)), k))
            examples["validation"] = tuple(
                Example(ex.id, ex.texts, ex.label, "validation") for i, ex in enumerate(train) if i in val_idx
            )
            examples["train"] = tuple(ex for i, ex in enumerate(train) if i not in val_idx)

    return Dataset(name=spec.name, task=spec.task, labels=spec.labels, examples=examples)


def write_tsv(dataset: Dataset, split: str, path, columns: tuple[str, ...] = ()) -> None:
    """Serialize one split as canonical TSV (round-trips byte-identically)."""
    columns = columns or _default_columns(dataset.task)
    text_cols = [c for c in columns if c != "label"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for ex in dataset.split(split):
            row = dict(zip(text_cols, ex.texts))
            row["label"] = ex.label
            fh.write("\t".join(row[c] for c in columns) + "\n")


# --- coordination inversion ---

_PRONOUN_I = "i"


def invert_clauses(tagged: TaggedSentence, example_id: str = "?") -> str:
    """Swap the clauses around the single tagged connective.

    The spans left and right of the connective trade places verbatim;
    trailing punctuation stays at the end. The new first alphabetic
    character is uppercased and the old one lowercased, except that a
    standalone pronoun "I" keeps its capital.
    """
    if len(tagged.occurrences) == 0:
        raise NoConnective(example_id)
    if len(tagged.occurrences) > 1:
        raise MultipleConnectives(example_id)
    occ = tagged.occurrences[0]
    conn = tagged.tokens[occ.token_index]
    text = tagged.text
    left_raw = text[: conn.span[0]]
    right_raw = text[conn.span[1] :]

    # Peel terminal punctuation/whitespace off the right clause.
    tail_start = len(right_raw)
    while tail_start > 0 and not right_raw[tail_start - 1].isalnum():
        tail_start -= 1
    right_core, tail = right_raw[:tail_start], right_raw[tail_start:]

    lsep_start = len(left_raw)
    while lsep_start > 0 and left_raw[lsep_start - 1].isspace():
        lsep_start -= 1
    left_clause, lsep = left_raw[:lsep_start], left_raw[lsep_start:] or " "

    rsep_end = 0
    while rsep_end < len(right_core) and right_core[rsep_end].isspace():
        rsep_end += 1
    rsep, right_clause = right_core[:rsep_end] or " ", right_core[rsep_end:]

    if not left_clause.strip() or not right_clause.strip():
        raise EmptyClause(example_id)

    left_clause = _lower_leading(left_clause)
    right_clause = _upper_leading(right_clause)
    return right_clause + lsep + conn.surface + rsep + left_clause + tail


def _leading_alpha(s: str) -> int:
    for i, ch in enumerate(s):
        if ch.isalpha():
            return i
    return -1


def _upper_leading(s: str) -> str:
    i = _leading_alpha(s)
    return s if i < 0 else s[:i] + s[i].upper() + s[i + 1 :]


def _lower_leading(s: str) -> str:
    i = _leading_alpha(s)
    if i < 0:
        return s
    # "I" stays capitalized mid-sentence.
    j = i + 1
    while j < len(s) and (s[j].isalnum() or s[j] == "_"):
        j += 1
    if s[i:j] == "I" and (j >= len(s) or not s[j].isalpha()):
        return s
    return s[:i] + s[i].lower() + s[i + 1 :]


def generate_coordinv(
    sentences: Sequence[TaggedSentence],
    invert_fraction: float,
    seed: int,
    name: str = "coordinv",
    split: str = "test",
    ids: Sequence[str] | None = None,
) -> tuple[Dataset, list[str]]:
    """Build a valid/invalid clause-order dataset from two-clause sentences.

    Exactly round(invert_fraction * n) sentences, chosen uniformly by
    `seed`, get their clauses swapped and the label "invalid"; the rest
    keep their text and the label "valid". Returns the dataset and the
    ids of the inverted examples.
    """
    if not (0.0 <= invert_fraction <= 1.0):
        raise ValueError(f"invert_fraction must be in [0, 1], got {invert_fraction}")
    n = len(sentences)
    if ids is None:
        ids = [f"{name}-{split}-{i + 1}" for i in range(n)]
    if len(ids) != n:
        raise ValueError("ids and sentences length mismatch")

    k = int(round(invert_fraction * n))
    rng = random.Random(seed)
    inverted_idx = set(rng.sample(range(n), k))

    examples = []
    inverted_ids = []
    for i, (ex_id, tagged) in enumerate(zip(ids, sentences)):
        if i in inverted_idx:
            text = invert_clauses(tagged, example_id=ex_id)
            label = "invalid"
            inverted_ids.append(ex_id)
        else:
            # Validate the precondition for kept sentences too.
            if len(tagged.occurrences) == 0:
                raise NoConnective(ex_id)
            if len(tagged.occurrences) > 1:
                raise MultipleConnectives(ex_id)
            text = tagged.text
            label = "valid"
        examples.append(Example(id=ex_id, texts=(text,), label=label, split=split))

    dataset = Dataset(
        name=name,
        task=TaskKind.SINGLE_SENTENCE,
        labels=("invalid", "valid"),
        examples={split: tuple(examples)},
    )
    return dataset, inverted_ids


# --- evaluation subsets ---

VALIDITY_LABELS = frozenset({"valid", "invalid"})


def build_subsets(
    dataset: Dataset,
    tags: Mapping[str, tuple[TaggedSentence, ...]],
    retained: set[str],
) -> list[Subset]:
    """Form the test-split evaluation subsets.

    Emits `all`, `has_connective`, one subset per retained connective and
    per connective type occurring among them, and valid/invalid partitions
    when the label set is {valid, invalid}. A sentence with k distinct
    retained connectives lands in all k connective subsets.
    """
    test_ids = [ex.id for ex in dataset.test]
    for ex_id in test_ids:
        if ex_id not in tags:
            raise KeyError(f"no tags for test example {ex_id!r}")

    by_conn: dict[str, list[str]] = {c: [] for c in sorted(retained)}
    by_type: dict[str, list[str]] = {}
    has_conn: list[str] = []
    for ex in dataset.test:
        lemmas = set()
        types = set()
        for tagged in tags[ex.id]:
            for occ in tagged.occurrences:
                if occ.lemma in retained:
                    lemmas.add(occ.lemma)
                    types.add(occ.ctype.value)
        if lemmas:
            has_conn.append(ex.id)
        for lemma in lemmas:
            by_conn[lemma].append(ex.id)
        for tname in types:
            by_type.setdefault(tname, []).append(ex.id)

    subsets = [
        Subset(dataset.name, "all", tuple(test_ids)),
        Subset(dataset.name, "has_connective", tuple(has_conn)),
    ]
    for lemma in sorted(by_conn):
        subsets.append(Subset(dataset.name, f"connective:{lemma}", tuple(by_conn[lemma])))
    for tname in sorted(by_type):
        subsets.append(Subset(dataset.name, f"type:{tname}", tuple(by_type[tname])))

    if set(dataset.labels) == VALIDITY_LABELS:
        for label in sorted(VALIDITY_LABELS):
            ids = tuple(ex.id for ex in dataset.test if ex.label == label)
            subsets.append(Subset(dataset.name, f"validity:{label}", ids))

    for sub in subsets:
        if len(sub) == 0:
            log.warning("empty subset %s on dataset %s", sub.selector, dataset.name)
    return subsets
