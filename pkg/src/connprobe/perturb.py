"""Omission ([MASK]) and switch perturbations over tagged sentences."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Dataset
from .errors import NoMatchingConnective, TargetNotInLexicon
from .lexicon import ConnectiveLexicon, Occurrence, TaggedSentence, Token

DEFAULT_MASK = "[MASK]"


@dataclass(frozen=True)
class Perturbation:
    variant: str  # baseline | omit | switch
    target: str = "any"  # omit: lemma or "any"
    mask_token: str = DEFAULT_MASK
    from_lemma: str = ""
    to_lemma: str = ""

    @classmethod
    def parse(cls, descriptor: str) -> "Perturbation":
        """Parse `baseline`, `omit:any`, `omit:<lemma>`, or `switch:<a>><b>`."""
        descriptor = descriptor.strip()
        if descriptor == "baseline":
            return cls(variant="baseline")
        if descriptor.startswith("omit:"):
            return cls(variant="omit", target=descriptor[5:].strip().lower() or "any")
        if descriptor.startswith("switch:"):
            body = descriptor[7:]
            if ">" not in body:
                raise ValueError(f"switch descriptor needs `from>to`, got {descriptor!r}")
            a, b = body.split(">", 1)
            return cls(variant="switch", from_lemma=a.strip().lower(), to_lemma=b.strip().lower())
        raise ValueError(f"unknown perturbation descriptor {descriptor!r}")

    def descriptor(self) -> str:
        if self.variant == "baseline":
            return "baseline"
        if self.variant == "omit":
            return f"omit:{self.target}"
        return f"switch:{self.from_lemma}>{self.to_lemma}"

    @property
    def eval_selector(self) -> str | None:
        """Subset this condition is scored on; None means every subset."""
        if self.variant == "baseline":
            return None
        if self.variant == "omit":
            return "has_connective" if self.target == "any" else f"connective:{self.target}"
        return f"connective:{self.from_lemma}"


@dataclass
class ConditionPlan:
    """Named, ordered sequence of perturbations; baseline is mandatory."""

    conditions: dict[str, Perturbation]
    pair_scope: str = "both"  # both | first | second

    def __post_init__(self):
        if "baseline" not in self.conditions:
            raise ValueError("plan must include a `baseline` condition")
        if self.pair_scope not in ("both", "first", "second"):
            raise ValueError(f"pair_scope must be both/first/second, got {self.pair_scope!r}")

    @classmethod
    def default(cls) -> "ConditionPlan":
        return cls(conditions={"baseline": Perturbation(variant="baseline")})

    @classmethod
    def from_file(cls, path) -> "ConditionPlan":
        parser = configparser.ConfigParser()
        # Condition names are case-sensitive keys.
        parser.optionxform = str
        if not parser.read(Path(path)):
            raise FileNotFoundError(path)
        if "conditions" not in parser:
            raise ValueError(f"{path} has no [conditions] section")
        conditions = {name: Perturbation.parse(desc) for name, desc in parser["conditions"].items()}
        pair_scope = parser.get("plan", "pair_scope", fallback="both")
        return cls(conditions=conditions, pair_scope=pair_scope)

    def names(self) -> list[str]:
        return list(self.conditions)

    def validate_lexicon(self, lexicon: ConnectiveLexicon) -> None:
        for name, p in self.conditions.items():
            if p.variant == "switch" and p.to_lemma not in lexicon:
                raise TargetNotInLexicon(p.to_lemma)
            if p.variant == "switch" and p.from_lemma not in lexicon:
                raise TargetNotInLexicon(p.from_lemma)
            if p.variant == "omit" and p.target != "any" and p.target not in lexicon:
                raise TargetNotInLexicon(p.target)


def _rebuild(tagged: TaggedSentence, replacements: Mapping[int, str], lexicon: ConnectiveLexicon | None) -> TaggedSentence:
    """Splice replacement surfaces into the text and recompute tokens/occurrences.

    Token count is preserved by construction; untouched tokens and the
    separators between tokens are carried over byte-for-byte.
    """
    pieces = []
    new_tokens = []
    cursor = 0
    offset = 0
    for tok in tagged.tokens:
        start, end = tok.span
        pieces.append(tagged.text[cursor:start])
        surface = replacements.get(tok.index, tok.surface)
        pieces.append(surface)
        new_start = start + offset
        new_tokens.append(Token(surface=surface, norm=surface.lower(), index=tok.index, span=(new_start, new_start + len(surface))))
        offset += len(surface) - (end - start)
        cursor = end
    pieces.append(tagged.text[cursor:])
    new_text = "".join(pieces)

    occurrences = []
    old_by_index = {o.token_index: o for o in tagged.occurrences}
    for tok in new_tokens:
        if tok.index in replacements:
            if lexicon is not None and tok.norm in lexicon:
                occurrences.append(Occurrence(tok.index, tok.norm, lexicon.type_of(tok.norm)))
        elif tok.index in old_by_index:
            occurrences.append(old_by_index[tok.index])
    return TaggedSentence(text=new_text, tokens=tuple(new_tokens), occurrences=tuple(occurrences))


def omit_connective(
    tagged: TaggedSentence, target: str = "any", mask_token: str = DEFAULT_MASK
) -> tuple[str, TaggedSentence]:
    """Replace every matching connective occurrence with the mask token."""
    matches = [o for o in tagged.occurrences if target == "any" or o.lemma == target]
    if not matches:
        raise NoMatchingConnective(f"no occurrence of {target!r} in {tagged.text!r}")
    new = _rebuild(tagged, {o.token_index: mask_token for o in matches}, lexicon=None)
    return new.text, new


def switch_connective(
    tagged: TaggedSentence, from_lemma: str, to_lemma: str, lexicon: ConnectiveLexicon
) -> tuple[str, TaggedSentence]:
    """Replace every `from` occurrence with `to`, keeping sentence-initial capitals."""
    if to_lemma not in lexicon:
        raise TargetNotInLexicon(to_lemma)
    matches = [o for o in tagged.occurrences if o.lemma == from_lemma]
    if not matches:
        raise NoMatchingConnective(f"no occurrence of {from_lemma!r} in {tagged.text!r}")

    first_word = next((t.index for t in tagged.tokens if any(c.isalnum() for c in t.surface)), -1)
    replacements = {}
    for occ in matches:
        old_surface = tagged.tokens[occ.token_index].surface
        if old_surface.lower() == to_lemma:
            surface = old_surface  # identity switch stays byte-identical
        elif occ.token_index == first_word and old_surface[:1].isupper():
            surface = to_lemma[:1].upper() + to_lemma[1:]
        else:
            surface = to_lemma
        replacements[occ.token_index] = surface
    new = _rebuild(tagged, replacements, lexicon=lexicon)
    return new.text, new


@dataclass
class ConditionVariant:
    """One condition's view of a dataset: perturbed test texts plus retags."""

    condition: str
    perturbation: Perturbation
    texts: dict[str, tuple[str, ...]]
    tags: dict[str, tuple[TaggedSentence, ...]]
    matched_ids: tuple[str, ...]


def _apply_one(p: Perturbation, tagged: TaggedSentence, lexicon: ConnectiveLexicon) -> tuple[str, TaggedSentence] | None:
    try:
        if p.variant == "omit":
            return omit_connective(tagged, target=p.target, mask_token=p.mask_token)
        return switch_connective(tagged, p.from_lemma, p.to_lemma, lexicon)
    except NoMatchingConnective:
        return None


def apply_plan(
    dataset: Dataset,
    tags: Mapping[str, tuple[TaggedSentence, ...]],
    plan: ConditionPlan,
    lexicon: ConnectiveLexicon,
    split: str = "test",
    strict: bool = False,
) -> dict[str, ConditionVariant]:
    """Produce one dataset variant per plan condition over the given split.

    Examples lacking the targeted connective are carried through unchanged
    but left out of the condition's matched set; with strict on they raise
    instead. Pair examples are perturbed on the sides named by pair_scope.
    """
    plan.validate_lexicon(lexicon)
    variants: dict[str, ConditionVariant] = {}
    examples = dataset.split(split)
    for name, p in plan.conditions.items():
        texts: dict[str, tuple[str, ...]] = {}
        new_tags: dict[str, tuple[TaggedSentence, ...]] = {}
        matched: list[str] = []
        for ex in examples:
            sent_tags = tags[ex.id]
            if p.variant == "baseline":
                texts[ex.id] = ex.texts
                new_tags[ex.id] = sent_tags
                continue
            out_texts = list(ex.texts)
            out_tags = list(sent_tags)
            hit = False
            for pos, tagged in enumerate(sent_tags):
                if len(sent_tags) == 2 and plan.pair_scope != "both":
                    if (plan.pair_scope == "first") != (pos == 0):
                        continue
                result = _apply_one(p, tagged, lexicon)
                if result is not None:
                    out_texts[pos], out_tags[pos] = result
                    hit = True
            if hit:
                matched.append(ex.id)
            elif strict:
                raise NoMatchingConnective(f"{ex.id}: no target for condition {name!r}")
            texts[ex.id] = tuple(out_texts)
            new_tags[ex.id] = tuple(out_tags)
        variants[name] = ConditionVariant(
            condition=name,
            perturbation=p,
            texts=texts,
            tags=new_tags,
            matched_ids=tuple(matched),
        )
    return variants
