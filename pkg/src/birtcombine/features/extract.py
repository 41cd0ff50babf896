"""Per-essay features from six language-independent families."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from .config import ConnectiveLexicon, FeatureConfig
from .tokenize import TokenizedEssay

FAMILIES = ("descriptive", "lexical_diversity", "readability", "connectives", "referential", "sequential")

# kind: count, ratio (in [0, 1]), density (per 100 words), length, score
_BASE = (
    ("descriptive", "n_words", "count"),
    ("descriptive", "n_sentences", "count"),
    ("descriptive", "n_paragraphs", "count"),
    ("descriptive", "sentence_length_mean", "length"),
    ("descriptive", "sentence_length_sd", "length"),
    ("descriptive", "word_length_mean", "length"),
    ("descriptive", "long_word_ratio", "ratio"),
    ("descriptive", "sentences_per_paragraph", "length"),
    ("lexical_diversity", "ttr", "ratio"),
    ("lexical_diversity", "root_ttr", "score"),
    ("lexical_diversity", "mattr", "ratio"),
    ("readability", "flesch", "score"),
    ("readability", "syllables_per_word", "length"),
)
_TAIL = (
    ("referential", "sentence_overlap_mean", "ratio"),
    ("referential", "sentence_overlap_sd", "ratio"),
    ("referential", "paragraph_overlap_mean", "ratio"),
    ("referential", "pronoun_density", "density"),
    ("sequential", "sentence_cosine_mean", "ratio"),
    ("sequential", "sentence_cosine_min", "ratio"),
)
SINGLE_SENTENCE = "single_sentence"
SINGLE_PARAGRAPH = "single_paragraph"


@dataclass(frozen=True)
class FeatureRegistry:
    """Ordered feature names with their family and kind; shared by every row of a corpus."""

    names: tuple[str, ...]
    families: tuple[str, ...]
    kinds: tuple[str, ...]

    @classmethod
    def for_lexicon(cls, lexicon: ConnectiveLexicon) -> "FeatureRegistry":
        conn = [("connectives", f"connective_{c}", "density") for c in lexicon.categories]
        conn.append(("connectives", "connective_total", "density"))
        rows = (*_BASE, *conn, *_TAIL)
        return cls(*(tuple(r[k] for r in rows) for k in (1, 0, 2)))

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def to_dict(self) -> dict:
        return {"features": [{"name": n, "family": f, "kind": k}
                             for n, f, k in zip(self.names, self.families, self.kinds)]}

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureRegistry":
        rows = data["features"]
        return cls(tuple(r["name"] for r in rows), tuple(r["family"] for r in rows),
                   tuple(r["kind"] for r in rows))


@dataclass(frozen=True)
class FeatureVector:
    registry: FeatureRegistry
    values: np.ndarray
    flags: tuple[str, ...] = field(default=())

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.registry.index(name)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.registry.names, map(float, self.values)))

    def family(self, name: str) -> dict[str, float]:
        return {n: float(v) for n, f, v in zip(self.registry.names, self.registry.families, self.values)
                if f == name}


def syllables(word: str, vowels: str) -> int:
    """Vowel-group count, never below one."""
    return max(1, len(re.findall(f"[{re.escape(vowels)}]+", word)))


def mattr(tokens: list[str], window: int) -> float:
    w = min(window, len(tokens))
    counts = Counter(tokens[:w])
    total = len(counts)
    for k in range(w, len(tokens)):
        out, inc = tokens[k - w], tokens[k]
        counts[out] -= 1
        if counts[out] == 0:
            del counts[out]
        counts[inc] += 1
        total += len(counts)
    return total / (len(tokens) - w + 1) / w


def _jaccard(a: set, b: set) -> float:
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def _cosine(a: Counter, b: Counter) -> float:
    dot = sum(v * b[k] for k, v in a.items())
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    if na == 0 or nb == 0:
        return 0.0
    return min(1.0, dot / (na * nb))


def count_connectives(sentences, lexicon: ConnectiveLexicon) -> tuple[dict[str, int], int]:
    """Greedy longest match, left to right, never crossing a sentence boundary.

    An expression listed under several categories counts once in the total and
    once for each of its categories.
    """
    index: dict[tuple[str, ...], list[str]] = {}
    for cat, exprs in lexicon.categories.items():
        for e in exprs:
            index.setdefault(tuple(e.split()), []).append(cat)
    longest = max(len(k) for k in index)
    per = {c: 0 for c in lexicon.categories}
    total = 0
    for sent in sentences:
        i = 0
        while i < len(sent):
            for n in range(min(longest, len(sent) - i), 0, -1):
                cats = index.get(tuple(sent[i : i + n]))
                if cats:
                    for c in cats:
                        per[c] += 1
                    total += 1
                    i += n
                    break
            else:
                i += 1
    return per, total


def extract_features(
    essay: TokenizedEssay,
    lexicon: ConnectiveLexicon | None = None,
    config: FeatureConfig | None = None,
) -> FeatureVector:
    lexicon = lexicon or ConnectiveLexicon.default()
    config = config or FeatureConfig()
    sents = essay.sentences
    tokens = essay.words
    if not tokens:
        raise InputError("essay has no words")
    nw, ns, np_ = len(tokens), len(sents), len(essay.paragraphs)
    slen = np.array([len(s) for s in sents], dtype=float)
    wlen = np.array([len(w) for w in tokens], dtype=float)
    syl = np.array([syllables(w, config.vowels) for w in tokens], dtype=float)
    types = len(set(tokens))
    c0, c1, c2 = config.readability

    out: dict[str, float] = {
        "n_words": nw,
        "n_sentences": ns,
        "n_paragraphs": np_,
        "sentence_length_mean": float(slen.mean()),
        "sentence_length_sd": float(slen.std()),
        "word_length_mean": float(wlen.mean()),
        "long_word_ratio": float((wlen >= config.long_word).mean()),
        "sentences_per_paragraph": ns / np_,
        "ttr": types / nw,
        "root_ttr": types / math.sqrt(nw),
        "mattr": mattr(tokens, config.mattr_window),
        "flesch": c0 - c1 * (nw / ns) - c2 * float(syl.mean()),
        "syllables_per_word": float(syl.mean()),
    }
    per, total = count_connectives(sents, lexicon)
    for c, n in per.items():
        out[f"connective_{c}"] = 100.0 * n / nw
    out["connective_total"] = 100.0 * total / nw

    flags = []
    content = [{w for w in s if w not in config.stopwords} for s in sents]
    if ns > 1:
        ov = np.array([_jaccard(a, b) for a, b in zip(content, content[1:])])
        tf = [Counter(s) for s in sents]
        cos = np.array([_cosine(a, b) for a, b in zip(tf, tf[1:])])
        out["sentence_overlap_mean"] = float(ov.mean())
        out["sentence_overlap_sd"] = float(ov.std())
        out["sentence_cosine_mean"] = float(cos.mean())
        out["sentence_cosine_min"] = float(cos.min())
    else:
        flags.append(SINGLE_SENTENCE)
        for k in ("sentence_overlap_mean", "sentence_overlap_sd", "sentence_cosine_mean", "sentence_cosine_min"):
            out[k] = 0.0
    if np_ > 1:
        pc = [{w for s in p for w in s if w not in config.stopwords} for p in essay.paragraphs]
        out["paragraph_overlap_mean"] = float(np.mean([_jaccard(a, b) for a, b in zip(pc, pc[1:])]))
    else:
        flags.append(SINGLE_PARAGRAPH)
        out["paragraph_overlap_mean"] = 0.0
    out["pronoun_density"] = 100.0 * sum(w in config.pronouns for w in tokens) / nw

    reg = FeatureRegistry.for_lexicon(lexicon)
    values = np.array([out[n] for n in reg.names], dtype=float)
    if not np.all(np.isfinite(values)):
        raise InputError("non-finite feature value")
    values.setflags(write=False)
    return FeatureVector(reg, values, tuple(flags))
