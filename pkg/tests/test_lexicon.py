"""Lexicon loading, tokenization, tagging, and the frequency filter."""

import math
import random

import pytest

from connprobe.errors import DuplicateEntry, EmptyCorpus, EmptyLexicon, UnknownType
from connprobe.lexicon import (
    ConnectiveType,
    FrequencyFilterConfig,
    count_tokens,
    default_lexicon_path,
    filter_frequent,
    load_lexicon,
    tag_connectives,
    tag_text,
    tokenize,
)


def test_load_two_entries(tmp_path):
    p = tmp_path / "lex.csv"
    p.write_text("and,additive\nbut,adversative\n")
    lex = load_lexicon(p)
    assert len(lex.entries) == 2
    assert lex.type_of("and") is ConnectiveType.ADDITIVE
    assert lex.type_of("but") is ConnectiveType.ADVERSATIVE


def test_load_empty_file(tmp_path):
    p = tmp_path / "lex.csv"
    p.write_text("")
    with pytest.raises(EmptyLexicon):
        load_lexicon(p)


def test_load_duplicate_word(tmp_path):
    p = tmp_path / "lex.csv"
    p.write_text("so,causal\nso,sequential\n")
    with pytest.raises(DuplicateEntry) as exc:
        load_lexicon(p)
    assert exc.value.word == "so"


def test_load_unknown_type(tmp_path):
    p = tmp_path / "lex.csv"
    p.write_text("and,conjunctive\n")
    with pytest.raises(UnknownType):
        load_lexicon(p)


def test_load_header_and_case(tmp_path):
    p = tmp_path / "lex.csv"
    p.write_text("word,type\nAnd,Additive\n")
    lex = load_lexicon(p)
    assert lex.words() == ["and"]


def test_default_lexicon_covers_reported_connectives(lexicon):
    needed = {"also", "and", "or", "so", "because", "then", "however", "although", "though", "but", "instead"}
    assert needed <= set(lexicon.words())
    assert {t for t in ConnectiveType} == {lexicon.type_of(w) for w in lexicon.words()}


def test_tokenize_basic():
    assert [t.norm for t in tokenize("I am sick.")] == ["i", "am", "sick", "."]


def test_tokenize_empty():
    assert tokenize("") == ()


def test_tokenize_ten_tokens():
    toks = tokenize("I go to the doctor because I am sick.")
    assert len(toks) == 10
    assert toks[5].norm == "because"


def test_tokenize_reconstructs_text():
    text = 'He said: "wait, then run!"  (twice).'
    toks = tokenize(text)
    rebuilt = []
    cursor = 0
    for t in toks:
        rebuilt.append(text[cursor : t.span[0]])
        rebuilt.append(t.surface)
        cursor = t.span[1]
    rebuilt.append(text[cursor:])
    assert "".join(rebuilt) == text
    assert all(t.norm == t.surface.lower() for t in toks)


def test_tag_single_causal(lexicon):
    tagged = tag_text("I go to the doctor because I am sick.", lexicon)
    assert [(o.token_index, o.lemma, o.ctype) for o in tagged.occurrences] == [
        (5, "because", ConnectiveType.CAUSAL)
    ]


def test_tag_no_connective(lexicon):
    assert tag_text("The lioness hunts the zebra.", lexicon).occurrences == ()


def test_tag_two_types(lexicon):
    tagged = tag_text("He sings and dances but never smiles.", lexicon)
    assert [(o.lemma, o.ctype) for o in tagged.occurrences] == [
        ("and", ConnectiveType.ADDITIVE),
        ("but", ConnectiveType.ADVERSATIVE),
    ]


def test_tag_exclusions(lexicon):
    tagged = tag_text("He was so tired.", lexicon, exclusions=frozenset({"so"}))
    assert tagged.occurrences == ()


def test_tag_idempotent(lexicon):
    first = tag_text("We left early because it rained.", lexicon)
    again = tag_connectives(first.tokens, lexicon, text=first.text)
    assert again.occurrences == first.occurrences


def test_tag_case_invariant(lexicon):
    lower = tag_text("because it rained", lexicon)
    upper = tag_text("Because it rained", lexicon)
    assert [(o.token_index, o.lemma) for o in lower.occurrences] == [
        (o.token_index, o.lemma) for o in upper.occurrences
    ]


def _hundred_type_counts():
    counts = {"and": 50, "the": 40, "albeit": 1}
    for i in range(97):
        counts[f"filler{i:02d}"] = 2 + (i % 7)
    return counts


def test_filter_frequent_derived_oracle(lexicon):
    counts = _hundred_type_counts()
    assert len(counts) == 100
    # independent oracle: rank types by (-count, word) and take the top 5%
    ranked = sorted(counts, key=lambda w: (-counts[w], w))
    cutoff = math.ceil(0.05 * len(ranked))
    threshold = counts[ranked[cutoff - 1]]
    expected = {w for w in counts if counts[w] >= threshold and w in lexicon}
    got = filter_frequent(counts, lexicon, FrequencyFilterConfig(quantile=0.05))
    assert got == expected
    assert "and" in got
    assert "albeit" not in got


def test_filter_frequent_full_quantile(lexicon):
    counts = {"and": 2, "but": 1, "zebra": 9}
    got = filter_frequent(counts, lexicon, FrequencyFilterConfig(quantile=1.0))
    assert got == {"and", "but"}


def test_filter_frequent_empty():
    with pytest.raises(EmptyCorpus):
        filter_frequent({}, load_lexicon(default_lexicon_path()))


def test_filter_frequent_monotone_in_quantile(lexicon):
    rng = random.Random(3)
    counts = {f"w{i}": rng.randint(1, 60) for i in range(80)}
    counts.update({"and": rng.randint(1, 60), "but": rng.randint(1, 60), "so": rng.randint(1, 60)})
    previous = set()
    for q in (0.02, 0.05, 0.1, 0.3, 0.6, 1.0):
        got = filter_frequent(counts, lexicon, FrequencyFilterConfig(quantile=q))
        assert previous <= got
        previous = got


def test_filter_frequent_ties_included(lexicon):
    # cutoff rank falls inside a tie group: every tied word stays
    counts = {"and": 5, "but": 5, "so": 5, "x1": 5, "x2": 4, "x3": 3, "x4": 2, "x5": 1}
    got = filter_frequent(counts, lexicon, FrequencyFilterConfig(quantile=0.25))
    assert got == {"and", "but", "so"}


def test_count_tokens(lexicon):
    seqs = [tokenize("the cat and the dog"), tokenize("The cat!")]
    counts = count_tokens(seqs)
    assert counts["the"] == 3
    assert counts["cat"] == 2
    assert counts["!"] == 1
