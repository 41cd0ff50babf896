"""Feature configuration and the connective lexicon, both loaded from data files."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..errors import InputError

_DATA = "birtcombine.features.data"


def _read_list(text: str) -> frozenset[str]:
    return frozenset(
        ln.strip().lower() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")
    )


def _packaged(name: str) -> str:
    return resources.files(_DATA).joinpath(name).read_text(encoding="utf-8")


def load_word_list(path: str | Path | None, default: str) -> frozenset[str]:
    if path is None:
        return _read_list(_packaged(default))
    try:
        return _read_list(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read word list {path}: {exc}") from None


@dataclass(frozen=True)
class FeatureConfig:
    abbreviations: frozenset[str] = field(default_factory=lambda: load_word_list(None, "abbreviations.txt"))
    stopwords: frozenset[str] = field(default_factory=lambda: load_word_list(None, "stopwords.txt"))
    pronouns: frozenset[str] = field(default_factory=lambda: load_word_list(None, "pronouns.txt"))
    vowels: str = "aeiouyáéíóúâêîôûãõàèìòùäëïöü"
    # Flesch reading ease: c0 - c1 * words/sentence - c2 * syllables/word
    readability: tuple[float, float, float] = (206.835, 1.015, 84.6)
    mattr_window: int = 50
    long_word: int = 7

    @classmethod
    def from_dict(cls, data: dict | None) -> "FeatureConfig":
        data = dict(data or {})
        kw = {}
        for key, default in (("abbreviations", "abbreviations.txt"),
                             ("stopwords", "stopwords.txt"),
                             ("pronouns", "pronouns.txt")):
            if key in data:
                val = data.pop(key)
                kw[key] = (frozenset(w.lower() for w in val) if isinstance(val, list)
                           else load_word_list(val, default))
        if "readability" in data:
            kw["readability"] = tuple(float(c) for c in data.pop("readability"))
            if len(kw["readability"]) != 3:
                raise InputError("readability needs three coefficients")
        for key in ("vowels", "mattr_window", "long_word"):
            if key in data:
                kw[key] = data.pop(key)
        if data:
            raise InputError(f"unknown feature settings: {sorted(data)}")
        return cls(**kw)


@dataclass(frozen=True)
class ConnectiveLexicon:
    """Category name -> connective expressions (lower case, possibly multi-word)."""

    categories: dict[str, tuple[str, ...]]

    def __post_init__(self):
        if not self.categories:
            raise InputError("lexicon has no categories")
        clean = {}
        for cat, exprs in self.categories.items():
            norm = tuple(" ".join(e.lower().split()) for e in exprs)
            if not norm:
                raise InputError(f"lexicon category {cat!r} is empty")
            if any(not e for e in norm):
                raise InputError(f"lexicon category {cat!r} has a blank expression")
            if len(set(norm)) != len(norm):
                raise InputError(f"lexicon category {cat!r} lists an expression twice")
            clean[str(cat)] = norm
        object.__setattr__(self, "categories", clean)

    @classmethod
    def default(cls) -> "ConnectiveLexicon":
        return cls(json.loads(_packaged("lexicon_default.json")))

    @classmethod
    def load(cls, path: str | Path | None) -> "ConnectiveLexicon":
        if path is None:
            return cls.default()
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read lexicon {path}: {exc}") from None
        if not isinstance(data, dict):
            raise InputError("lexicon JSON must map categories to lists of expressions")
        return cls(data)
