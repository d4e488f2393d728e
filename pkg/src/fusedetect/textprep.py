"""Text translation to English and cleaning.

Cleaning order is fixed so the operation is idempotent: URL removal,
lower-casing, sigil stripping, whitespace tokenization, stopword filtering,
rejoin. Punctuation other than the @ and # sigils is retained.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Protocol

logger = logging.getLogger(__name__)

# scheme-prefixed or www-prefixed tokens count as URLs
_URL_TOKEN = re.compile(r"^(?:[a-z][a-z0-9+.-]*://|www\.)\S*$", re.IGNORECASE)


@dataclass(frozen=True)
class StopwordList:
    """Lower-cased stopword tokens for one language."""

    language: str
    words: frozenset[str]

    def __contains__(self, token: str) -> bool:
        return token.lower() in self.words

    @classmethod
    def from_file(cls, path: str | Path, language: str) -> "StopwordList":
        words = frozenset(
            line.strip().lower()
            for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()
        )
        return cls(language=language, words=words)

    @classmethod
    def english(cls) -> "StopwordList":
        with resources.as_file(resources.files("fusedetect.data") / "stopwords_en.txt") as p:
            return cls.from_file(p, "en")


class TranslationBackend(Protocol):
    """Adapter that translates one text from a source language into English."""

    name: str

    def translate(self, text: str, source_lang: str) -> str: ...


class IdentityTranslationBackend:
    """Returns input unchanged. Default when no translation service is configured."""

    name = "identity"

    def translate(self, text: str, source_lang: str) -> str:
        return text


class StaticTranslationBackend:
    """Translates via a fixed (source_lang, text) -> English mapping; raises on a miss.

    Used in tests and demos in place of a networked service.
    """

    name = "static"

    def __init__(self, mapping: dict[tuple[str, str], str]):
        self.mapping = dict(mapping)

    def translate(self, text: str, source_lang: str) -> str:
        try:
            return self.mapping[(source_lang, text)]
        except KeyError:
            raise LookupError(f"no translation for ({source_lang!r}, {text!r})")


class Translator:
    """Caching front for a translation backend.

    The cache is consulted before the backend is called. It persists as a
    line-delimited file ``lang TAB source TAB target`` with backslash-escaped
    tabs, newlines, and backslashes inside the text fields.
    """

    def __init__(self, backend: TranslationBackend, cache_path: Optional[str | Path] = None):
        self.backend = backend
        self.cache_path = Path(cache_path) if cache_path else None
        self.cache: dict[tuple[str, str], str] = {}
        self.backend_calls = 0
        if self.cache_path and self.cache_path.is_file():
            self._load_cache()

    @staticmethod
    def _escape(text: str) -> str:
        return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")

    @staticmethod
    def _unescape(text: str) -> str:
        out = []
        it = iter(text)
        for ch in it:
            if ch != "\\":
                out.append(ch)
                continue
            nxt = next(it, "")
            out.append({"t": "\t", "n": "\n", "\\": "\\"}.get(nxt, nxt))
        return "".join(out)

    def _load_cache(self) -> None:
        for line in self.cache_path.read_text(encoding="utf-8").splitlines():
            if not line:
                continue
            parts = line.split("\t", 2)
            if len(parts) != 3:
                continue
            lang, source, target = parts
            self.cache[(lang, self._unescape(source))] = self._unescape(target)

    def _append_cache(self, lang: str, source: str, target: str) -> None:
        if not self.cache_path:
            return
        self.cache_path.parent.mkdir(parents=True, exist_ok=True)
        with self.cache_path.open("a", encoding="utf-8") as fh:
            fh.write(f"{lang}\t{self._escape(source)}\t{self._escape(target)}\n")

    def translate(self, text: str, source_lang: str) -> str:
        key = (source_lang, text)
        if key in self.cache:
            return self.cache[key]
        translated = self.backend.translate(text, source_lang)
        self.backend_calls += 1
        self.cache[key] = translated
        self._append_cache(source_lang, text, translated)
        return translated


_TRANSLATION_BACKENDS: dict[str, type] = {"identity": IdentityTranslationBackend}


def register_translation_backend(name: str, factory: type) -> None:
    _TRANSLATION_BACKENDS[name] = factory


def create_translation_backend(name: str) -> TranslationBackend:
    if name not in _TRANSLATION_BACKENDS:
        raise KeyError(f"unknown translation backend {name!r}; known: {sorted(_TRANSLATION_BACKENDS)}")
    return _TRANSLATION_BACKENDS[name]()


def translate_to_english(text: str, lang: str, translator: Optional[Translator]) -> str:
    """English passthrough for lang 'en'; otherwise translate via the adapter.

    Adapter failure degrades to the original text with a logged warning.
    """
    if lang.lower().startswith("en") or not text:
        return text
    if translator is None:
        return text
    try:
        return translator.translate(text, lang)
    except Exception as exc:
        logger.warning("translation failed for lang=%s (%s); keeping original text", lang, exc)
        return text


def clean_text(text: str, stopwords: StopwordList) -> str:
    """Remove URLs and stopwords, lower-case, strip @/# sigils, normalize whitespace.

    Idempotent: cleaning already-clean text is a no-op.
    """
    kept: list[str] = []
    for token in text.split():
        if _URL_TOKEN.match(token):
            continue
        token = token.lower().replace("@", "").replace("#", "")
        # sigil stripping can expose a URL ("@http://..."), re-check
        if not token or _URL_TOKEN.match(token) or token in stopwords.words:
            continue
        kept.append(token)
    return " ".join(kept)
