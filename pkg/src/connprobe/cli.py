"""Command-line front end: tag, embed, perturb, train, score, report."""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

from .analysis import EvalRecord, append_records, ids_digest, read_store, render_report
from .corpus import (
    Dataset,
    DatasetSpec,
    Example,
    Subset,
    build_subsets,
    generate_coordinv,
    invert_clauses,
    load_dataset,
    write_tsv,
)
from .embed import EmbeddingSpace, load_vectors
from .encoders import EmbedderSpec, make_encoder
from .errors import (
    ConfigError,
    ConnprobeError,
    EmptyClause,
    IncompleteGrid,
)
from .lexicon import (
    ConnectiveLexicon,
    FrequencyFilterConfig,
    count_tokens,
    default_lexicon_path,
    filter_frequent,
    load_exclusions,
    load_lexicon,
    tag_text,
    tokenize,
)
from .perturb import ConditionPlan, ConditionVariant, Perturbation, apply_plan
from .probe import ProbeHyper, error_rate, train_probe

log = logging.getLogger(__name__)

ENDPOINT_ENV = "CONNPROBE_EMBED_ENDPOINT"
VECTOR_FORMATS = ("glove_text", "fasttext_vec")


@dataclass
class RunConfig:
    """Everything cmd_run needs, resolved and validated."""

    base_dir: Path
    lexicon: Path
    exclusions: Path | None
    dataset_specs: list[DatasetSpec]
    plan: ConditionPlan
    hyper: ProbeHyper
    runs: int
    seeds: list[int]
    out_dir: Path
    freq_quantile: float
    freq_splits: tuple[str, ...]
    spaces: dict[str, tuple[Path, str]]
    embedders: list[EmbedderSpec]
    report_format: str = "csv"


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else (base / p).resolve()


def _require_file(path: Path, key: str) -> Path:
    if not path.is_file():
        raise ConfigError(key, f"file not found: {path}")
    return path


def _getfloat(section, key: str, fallback: float, keypath: str) -> float:
    try:
        return section.getfloat(key, fallback=fallback)
    except ValueError as exc:
        raise ConfigError(keypath, str(exc)) from None


def _getint(section, key: str, fallback: int, keypath: str) -> int:
    try:
        return section.getint(key, fallback=fallback)
    except ValueError as exc:
        raise ConfigError(keypath, str(exc)) from None


def parse_run_config(path, out_override: str | None = None) -> RunConfig:
    path = Path(path)
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if not parser.read(path):
        raise ConfigError("run", f"cannot read config file {path}")
    if "run" not in parser:
        raise ConfigError("run", "missing [run] section")
    run = parser["run"]
    base = path.parent

    lexicon = (
        _require_file(_resolve(base, run["lexicon"]), "run/lexicon")
        if run.get("lexicon")
        else default_lexicon_path()
    )
    exclusions = (
        _require_file(_resolve(base, run["exclusions"]), "run/exclusions") if run.get("exclusions") else None
    )

    dataset_values = run.get("datasets", "").split()
    if not dataset_values:
        raise ConfigError("run/datasets", "at least one dataset descriptor is required")
    dataset_specs = []
    for value in dataset_values:
        p = _require_file(_resolve(base, value), "run/datasets")
        dataset_specs.append(DatasetSpec.from_file(p))
    names = [s.name for s in dataset_specs]
    if len(set(names)) != len(names):
        raise ConfigError("run/datasets", f"duplicate dataset names: {names}")

    plan = (
        ConditionPlan.from_file(_require_file(_resolve(base, run["plan"]), "run/plan"))
        if run.get("plan")
        else ConditionPlan.default()
    )
    descriptors = [p.descriptor() for p in plan.conditions.values()]
    if len(set(descriptors)) != len(descriptors):
        raise ConfigError("run/plan", f"duplicate condition descriptors: {descriptors}")

    runs = _getint(run, "runs", 5, "run/runs")
    if runs < 1:
        raise ConfigError("run/runs", f"runs must be >= 1, got {runs}")
    if run.get("seeds"):
        try:
            seeds = [int(x) for x in run["seeds"].split()]
        except ValueError as exc:
            raise ConfigError("run/seeds", str(exc)) from None
        if len(seeds) != runs or len(set(seeds)) != runs:
            raise ConfigError("run/seeds", f"need {runs} distinct seeds, got {seeds}")
    else:
        seeds = list(range(runs))

    out_dir = Path(out_override) if out_override else _resolve(base, run.get("out", "out"))
    freq_quantile = _getfloat(run, "frequency_quantile", 0.05, "run/frequency_quantile")
    freq_splits = tuple(run.get("frequency_splits", "train test").split())

    if "probe" in parser:
        sec = parser["probe"]
        batch_raw = sec.get("batch_size", "32").strip().lower()
        batch_size = None if batch_raw in ("", "none", "full") else _getint(sec, "batch_size", 32, "probe/batch_size")
        hyper = ProbeHyper(
            l2_lambda=_getfloat(sec, "l2_lambda", 1e-4, "probe/l2_lambda"),
            learning_rate=_getfloat(sec, "learning_rate", 0.1, "probe/learning_rate"),
            max_epochs=_getint(sec, "max_epochs", 1000, "probe/max_epochs"),
            tolerance=_getfloat(sec, "tolerance", 1e-6, "probe/tolerance"),
            standardize=sec.getboolean("standardize", fallback=True),
            batch_size=batch_size,
        )
    else:
        # Minibatch by default so distinct run seeds yield distinct probes.
        hyper = ProbeHyper(batch_size=32)

    spaces: dict[str, tuple[Path, str]] = {}
    embedders: list[EmbedderSpec] = []
    for section in parser.sections():
        if section.startswith("space:"):
            name = section.split(":", 1)[1]
            sec = parser[section]
            if not sec.get("path"):
                raise ConfigError(f"{section}/path", "vector file path is required")
            fmt = sec.get("format", "glove_text").strip()
            if fmt not in VECTOR_FORMATS:
                raise ConfigError(f"{section}/format", f"format must be one of {VECTOR_FORMATS}, got {fmt!r}")
            spaces[name] = (_require_file(_resolve(base, sec["path"]), f"{section}/path"), fmt)
        elif section.startswith("embedder:"):
            name = section.split(":", 1)[1]
            sec = parser[section]
            kind = sec.get("kind", "").strip()
            if not kind:
                raise ConfigError(f"{section}/kind", "kind is required (bow|sif|pmean|precomputed|remote)")
            spec = EmbedderSpec(
                name=name,
                kind=kind,
                family=sec.get("family", "").strip(),
                space=sec.get("space", "").strip(),
                spaces=tuple(sec.get("spaces", "").split()),
                max_power=_getint(sec, "max_power", 3, f"{section}/max_power"),
                sif_alpha=_getfloat(sec, "sif_alpha", 0.0003, f"{section}/sif_alpha"),
                sif_remove_pc=sec.getboolean("sif_remove_pc", fallback=False),
                store_path=str(_require_file(_resolve(base, sec["store"]), f"{section}/store")) if sec.get("store") else "",
                endpoint=sec.get("endpoint", "").strip(),
                model=sec.get("model", "").strip(),
            )
            embedders.append(spec)
    if not embedders:
        raise ConfigError("run", "no [embedder:*] sections defined")
    names = [e.name for e in embedders]
    if len(set(names)) != len(names):
        raise ConfigError("run", f"duplicate embedder names: {names}")

    for spec in embedders:
        key = f"embedder:{spec.name}"
        if spec.kind in ("bow", "sif") and spec.space not in spaces:
            raise ConfigError(f"{key}/space", f"unknown space {spec.space!r}")
        if spec.kind == "pmean":
            if not spec.spaces:
                raise ConfigError(f"{key}/spaces", "pmean needs at least one space")
            for s in spec.spaces:
                if s not in spaces:
                    raise ConfigError(f"{key}/spaces", f"unknown space {s!r}")
        if spec.kind == "precomputed" and not spec.store_path:
            raise ConfigError(f"{key}/store", "precomputed embedder needs a store file")
        if spec.kind == "remote" and not spec.endpoint and not os.environ.get(ENDPOINT_ENV):
            raise ConfigError(f"{key}/endpoint", f"remote embedder needs an endpoint (or {ENDPOINT_ENV})")

    return RunConfig(
        base_dir=base,
        lexicon=lexicon,
        exclusions=exclusions,
        dataset_specs=dataset_specs,
        plan=plan,
        hyper=hyper,
        runs=runs,
        seeds=seeds,
        out_dir=out_dir,
        freq_quantile=freq_quantile,
        freq_splits=freq_splits,
        spaces=spaces,
        embedders=embedders,
    )


# ---------------------------------------------------------------------------
# run command


@dataclass
class _Bundle:
    """One dataset prepared for the grid: tags, subsets, condition variants."""

    dataset: Dataset
    train_texts: list[tuple[str, ...]]
    train_ids: list[str]
    train_labels: list[str]
    test_ids: list[str]
    test_index: dict[str, int]
    test_labels: dict[str, str]
    subsets: dict[str, Subset]
    subset_order: list[str]
    subset_hash: dict[str, str]
    variants: dict[str, ConditionVariant]
    freq_table: dict[str, float]
    retained: set[str]

    def selectors_for(self, condition: str) -> list[str]:
        p = self.variants[condition].perturbation
        if p.variant == "baseline":
            return self.subset_order
        sel = p.eval_selector
        if sel not in self.subsets:
            log.warning(
                "dataset %s has no non-empty subset %r; skipping condition %r",
                self.dataset.name,
                sel,
                condition,
            )
            return []
        return [sel]


def _prepare_bundle(
    spec: DatasetSpec,
    lexicon: ConnectiveLexicon,
    exclusions: frozenset[str],
    plan: ConditionPlan,
    freq_cfg: FrequencyFilterConfig,
    strict: bool,
) -> _Bundle:
    dataset = load_dataset(spec)
    train = dataset.split("train")
    if not train:
        raise ConfigError("run/datasets", f"dataset {dataset.name!r} has no train split to fit the probe on")

    tags = {ex.id: tuple(tag_text(t, lexicon, exclusions) for t in ex.texts) for ex in dataset.test}

    count_seqs = []
    for split in freq_cfg.count_source:
        for ex in dataset.split(split):
            for text in ex.texts:
                count_seqs.append(tokenize(text))
    counts = count_tokens(count_seqs) if count_seqs else {}
    retained = filter_frequent(counts, lexicon, freq_cfg) if counts else set()

    train_counts = count_tokens(tokenize(t) for ex in train for t in ex.texts)
    total = sum(train_counts.values())
    freq_table = {w: c / total for w, c in train_counts.items()}

    subsets = {s.selector: s for s in build_subsets(dataset, tags, retained) if len(s) > 0}
    variants = apply_plan(dataset, tags, plan, lexicon, split="test", strict=strict)

    test_ids = [ex.id for ex in dataset.test]
    return _Bundle(
        dataset=dataset,
        train_texts=[ex.texts for ex in train],
        train_ids=[ex.id for ex in train],
        train_labels=[ex.label for ex in train],
        test_ids=test_ids,
        test_index={ex_id: i for i, ex_id in enumerate(test_ids)},
        test_labels={ex.id: ex.label for ex in dataset.test},
        subsets=subsets,
        subset_order=list(subsets),
        subset_hash={sel: ids_digest(s.ids) for sel, s in subsets.items()},
        variants=variants,
        freq_table=freq_table,
        retained=retained,
    )


def _cell_keys(espec: EmbedderSpec, bundle: _Bundle, seeds: Sequence[int]):
    for name in bundle.variants:
        cond = bundle.variants[name].perturbation.descriptor()
        for sel in bundle.selectors_for(name):
            for seed in seeds:
                yield (espec.name, bundle.dataset.name, cond, sel, seed)


def _evaluate_cell(
    espec: EmbedderSpec,
    bundle: _Bundle,
    spaces: Mapping[str, EmbeddingSpace],
    hyper: ProbeHyper,
    seeds: Sequence[int],
    existing: set,
    endpoint_override: str,
) -> list[EvalRecord]:
    if all(key in existing for key in _cell_keys(espec, bundle, seeds)):
        return []
    encoder = make_encoder(espec, spaces, bundle.freq_table, endpoint_override)
    train_x = encoder.encode_batch(bundle.train_texts, bundle.train_ids, "baseline")

    features = {}
    for name, variant in bundle.variants.items():
        if not bundle.selectors_for(name):
            continue
        texts = [variant.texts[ex_id] for ex_id in bundle.test_ids]
        features[name] = encoder.encode_batch(texts, bundle.test_ids, variant.perturbation.descriptor())

    records: list[EvalRecord] = []
    for seed in seeds:
        probe = train_probe(
            train_x, bundle.train_labels, replace(hyper, seed=seed), label_set=bundle.dataset.labels
        )
        for name in bundle.variants:
            if name not in features:
                continue
            cond = bundle.variants[name].perturbation.descriptor()
            x = features[name]
            for sel in bundle.selectors_for(name):
                key = (espec.name, bundle.dataset.name, cond, sel, seed)
                if key in existing:
                    continue
                subset = bundle.subsets[sel]
                rows = [bundle.test_index[ex_id] for ex_id in subset.ids]
                err = error_rate(probe, x[rows], [bundle.test_labels[ex_id] for ex_id in subset.ids])
                records.append(
                    EvalRecord(
                        model=espec.name,
                        family=espec.family,
                        dataset=bundle.dataset.name,
                        condition=cond,
                        subset=sel,
                        run=seed,
                        error=err,
                        n=len(rows),
                        ids_hash=bundle.subset_hash[sel],
                    )
                )
    return records


def cmd_run(args) -> int:
    cfg = parse_run_config(args.config, out_override=args.out)
    if args.format:
        cfg.report_format = args.format
    cfg.out_dir.mkdir(parents=True, exist_ok=True)

    lexicon = load_lexicon(cfg.lexicon)
    exclusions = load_exclusions(cfg.exclusions) if cfg.exclusions else frozenset()
    spaces = {name: load_vectors(p, fmt) for name, (p, fmt) in sorted(cfg.spaces.items())}
    freq_cfg = FrequencyFilterConfig(quantile=cfg.freq_quantile, count_source=cfg.freq_splits)

    bundles = [
        _prepare_bundle(spec, lexicon, exclusions, cfg.plan, freq_cfg, strict=args.strict)
        for spec in cfg.dataset_specs
    ]

    store_path = cfg.out_dir / "results.jsonl"
    existing = {r.key for r in read_store(store_path)}
    endpoint_override = os.environ.get(ENDPOINT_ENV, "")

    tasks = [(espec, bundle) for espec in cfg.embedders for bundle in bundles]

    def run_cell(task):
        espec, bundle = task
        return _evaluate_cell(espec, bundle, spaces, cfg.hyper, cfg.seeds, existing, endpoint_override)

    # Cells run in parallel; the store sees one ordered, serialized appender.
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            for cell_records in pool.map(run_cell, tasks):
                append_records(store_path, cell_records)
    else:
        for task in tasks:
            append_records(store_path, run_cell(task))

    report_dir = cfg.out_dir / "reports"
    paths = render_report(read_store(store_path), report_dir, cfg.report_format)
    for name in sorted(paths):
        print(f"report {name}: {paths[name]}")
    print(f"store: {store_path}")
    return 0


# ---------------------------------------------------------------------------
# tag command


def _census(examples: Sequence[Example], lexicon: ConnectiveLexicon, exclusions: frozenset[str]):
    with_conn = 0
    per_conn: dict[str, int] = {}
    per_type: dict[str, int] = {}
    for ex in examples:
        lemmas = set()
        types = set()
        for text in ex.texts:
            tagged = tag_text(text, lexicon, exclusions)
            for occ in tagged.occurrences:
                lemmas.add(occ.lemma)
                types.add(occ.ctype.value)
        if lemmas:
            with_conn += 1
        for lemma in lemmas:
            per_conn[lemma] = per_conn.get(lemma, 0) + 1
        for tname in types:
            per_type[tname] = per_type.get(tname, 0) + 1
    return with_conn, per_conn, per_type


def cmd_tag(args) -> int:
    spec = DatasetSpec.from_file(args.descriptor)
    lexicon = load_lexicon(args.lexicon) if args.lexicon else load_lexicon(default_lexicon_path())
    exclusions = load_exclusions(spec.exclusions) if spec.exclusions else frozenset()
    dataset = load_dataset(spec, carve_validation=False)

    groups = [(split, list(dataset.split(split))) for split in sorted(dataset.examples)]
    groups.append(("total", [ex for _, exs in groups for ex in exs]))
    for split, examples in groups:
        with_conn, per_conn, per_type = _census(examples, lexicon, exclusions)
        print(f"split={split} total={len(examples)} with_connective={with_conn}")
        for lemma, count in sorted(per_conn.items(), key=lambda kv: (-kv[1], kv[0])):
            ctype = lexicon.type_of(lemma).value
            print(f"split={split} connective={lemma} type={ctype} examples={count}")
        for tname, count in sorted(per_type.items(), key=lambda kv: (-kv[1], kv[0])):
            print(f"split={split} type={tname} examples={count}")
    return 0


# ---------------------------------------------------------------------------
# gen-coordinv command


def cmd_gen_coordinv(args) -> int:
    lexicon = load_lexicon(args.lexicon) if args.lexicon else load_lexicon(default_lexicon_path())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    eligible = []
    ids = []
    skipped = []
    n_lines = 0
    for lineno, raw in enumerate(Path(args.input).read_text(encoding="utf-8").splitlines(), start=1):
        n_lines += 1
        text = raw.strip()
        if not text:
            skipped.append({"line": lineno, "reason": "empty"})
            continue
        tagged = tag_text(text, lexicon)
        if len(tagged.occurrences) == 0:
            skipped.append({"line": lineno, "reason": "no_connective"})
            continue
        if len(tagged.occurrences) > 1:
            skipped.append({"line": lineno, "reason": "multiple_connectives"})
            continue
        try:
            invert_clauses(tagged, example_id=f"line-{lineno}")
        except EmptyClause:
            skipped.append({"line": lineno, "reason": "empty_clause"})
            continue
        eligible.append(tagged)
        ids.append(f"{args.name}-{lineno}")

    dataset, inverted_ids = generate_coordinv(
        eligible, args.fraction, args.seed, name=args.name, split="test", ids=ids
    )

    examples = list(dataset.test)
    train_ids: list[str] = []
    if args.train_fraction > 0:
        k = int(round(args.train_fraction * len(examples)))
        rng = random.Random(args.seed + 1)
        train_idx = set(rng.sample(range(len(examples)), k))
        train = [replace(examples[i], split="train") for i in sorted(train_idx)]
        test = [examples[i] for i in range(len(examples)) if i not in train_idx]
        train_ids = [ex.id for ex in train]
        dataset = Dataset(
            name=dataset.name,
            task=dataset.task,
            labels=dataset.labels,
            examples={"train": tuple(train), "test": tuple(test)},
        )

    files = {}
    for split in dataset.examples:
        out_path = out_dir / f"{split}.tsv"
        write_tsv(dataset, split, out_path)
        files[split] = out_path.name

    descriptor = out_dir / f"{args.name}.ini"
    lines = [
        "[dataset]",
        f"name = {args.name}",
        "task = single_sentence",
        "labels = invalid,valid",
        "columns = text,label",
    ]
    for split in sorted(files):
        lines.append(f"{split} = {files[split]}")
    descriptor.write_text("\n".join(lines) + "\n")

    manifest = {
        "name": args.name,
        "seed": args.seed,
        "fraction": args.fraction,
        "train_fraction": args.train_fraction,
        "input_lines": n_lines,
        "eligible": len(eligible),
        "inverted_ids": sorted(inverted_ids),
        "train_ids": sorted(train_ids),
        "skipped": skipped,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")

    print(f"descriptor: {descriptor}")
    print(f"eligible={len(eligible)} inverted={len(inverted_ids)} skipped={len(skipped)}")
    return 0


# ---------------------------------------------------------------------------
# report command


def cmd_report(args) -> int:
    records = read_store(args.store)
    paths = render_report(records, args.out, args.format)
    for name in sorted(paths):
        print(f"report {name}: {paths[name]}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="connprobe",
        description="Measure how sentence-embedding models use discourse connectives.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the models x datasets x conditions x runs grid")
    run.add_argument("--config", required=True, help="run configuration (INI)")
    run.add_argument("--workers", type=int, default=1, help="parallel grid cells")
    run.add_argument("--out", default=None, help="output directory (overrides config)")
    run.add_argument("--format", choices=("csv", "markdown", "json"), default=None)
    run.add_argument("--strict", action="store_true", help="fail on unmatched perturbation targets")

    tag = sub.add_parser("tag", help="print a connective census for a dataset")
    tag.add_argument("descriptor", help="dataset descriptor (INI)")
    tag.add_argument("--lexicon", default=None)

    gen = sub.add_parser("gen-coordinv", help="build a clause-inversion dataset")
    gen.add_argument("--input", required=True, help="one sentence per line")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--fraction", type=float, default=0.5, help="share of sentences to invert")
    gen.add_argument("--seed", type=int, default=13)
    gen.add_argument("--train-fraction", type=float, default=0.0, dest="train_fraction")
    gen.add_argument("--name", default="coordinv")
    gen.add_argument("--lexicon", default=None)

    rep = sub.add_parser("report", help="render report tables from a results store")
    rep.add_argument("--store", required=True, help="results JSON-lines file")
    rep.add_argument("--out", required=True, help="report directory")
    rep.add_argument("--format", choices=("csv", "markdown", "json"), default="csv")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    commands = {
        "run": cmd_run,
        "tag": cmd_tag,
        "gen-coordinv": cmd_gen_coordinv,
        "report": cmd_report,
    }
    try:
        return commands[args.command](args)
    except IncompleteGrid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConnprobeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
