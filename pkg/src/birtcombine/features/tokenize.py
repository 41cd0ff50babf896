"""Paragraph / sentence / word segmentation that needs no language model."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import InputError
from .config import FeatureConfig

WORD_RE = re.compile(r"[^\W\d_]+")
_PARA_RE = re.compile(r"\n\s*\n")
# sentence-final punctuation followed by whitespace or end of text
_END_RE = re.compile(r"[.!?…]+(?=\s|$)")


@dataclass(frozen=True)
class TokenizedEssay:
    paragraphs: tuple[tuple[tuple[str, ...], ...], ...]
    n_chars: int

    @property
    def sentences(self) -> list[tuple[str, ...]]:
        return [s for p in self.paragraphs for s in p]

    @property
    def words(self) -> list[str]:
        return [w for s in self.sentences for w in s]


def words(text: str) -> list[str]:
    return [w.lower() for w in WORD_RE.findall(text)]


def split_sentences(paragraph: str, abbreviations: frozenset[str]) -> list[str]:
    out, start = [], 0
    for m in _END_RE.finditer(paragraph):
        before = paragraph[start : m.start()]
        last = re.search(r"(\S+)$", before)
        if m.group() == "." and last is not None:
            token = last.group(1).lower().lstrip("(\"'")
            if token in abbreviations or token.rstrip(".") in abbreviations:
                continue
        out.append(paragraph[start : m.end()])
        start = m.end()
    out.append(paragraph[start:])
    return out


def tokenize(text: str, config: FeatureConfig | None = None) -> TokenizedEssay:
    config = config or FeatureConfig()
    if not text or not text.strip():
        raise InputError("essay text is empty")
    paragraphs = []
    for para in _PARA_RE.split(text.strip()):
        sents = tuple(
            tuple(ws) for ws in (words(s) for s in split_sentences(para, config.abbreviations)) if ws
        )
        if sents:
            paragraphs.append(sents)
    if not paragraphs:
        raise InputError("essay contains no words")
    return TokenizedEssay(tuple(paragraphs), len(text))
