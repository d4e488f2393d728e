import re

import pytest
from hypothesis import given, settings, strategies as st

from fusedetect.textprep import (
    IdentityTranslationBackend,
    StaticTranslationBackend,
    StopwordList,
    Translator,
    clean_text,
    create_translation_backend,
    translate_to_english,
)

EMPTY = StopwordList(language="en", words=frozenset())
URL_PATTERN = re.compile(r"^(?:[a-z][a-z0-9+.-]*://|www\.)", re.IGNORECASE)


class TestCleanText:
    def test_url_stopword_and_case_rules(self):
        sw = StopwordList(language="en", words=frozenset({"now"}))
        assert clean_text("Check https://x.co NOW", sw) == "check"

    def test_empty_input(self):
        assert clean_text("", EMPTY) == ""

    def test_sigils_stripped_words_kept(self):
        assert clean_text("#Vote @maria", EMPTY) == "vote maria"

    def test_www_prefixed_token_removed(self):
        assert clean_text("see WWW.example.com ok", EMPTY) == "see ok"

    def test_sigil_wrapped_url_removed(self):
        assert clean_text("@https://sneaky.example stay", EMPTY) == "stay"

    def test_whitespace_normalized(self):
        assert clean_text("  a \t b\n\nc  ", EMPTY) == "a b c"

    def test_punctuation_other_than_sigils_retained(self):
        assert clean_text("really?! yes.", EMPTY) == "really?! yes."

    @given(st.text(max_size=200))
    @settings(max_examples=200)
    def test_idempotent(self, text):
        sw = StopwordList(language="en", words=frozenset({"the", "a", "now"}))
        once = clean_text(text, sw)
        assert clean_text(once, sw) == once

    @given(st.text(max_size=200))
    def test_output_has_no_urls_and_no_stopwords(self, text):
        sw = StopwordList(language="en", words=frozenset({"the", "a", "now"}))
        for token in clean_text(text, sw).split():
            assert not URL_PATTERN.match(token)
            assert token not in sw.words


class TestStopwordList:
    def test_english_default_nonempty_and_case_insensitive(self):
        sw = StopwordList.english()
        assert "the" in sw.words
        assert "THE" in sw
        assert sw.language == "en"

    def test_from_file(self, tmp_path):
        path = tmp_path / "sw.txt"
        path.write_text("Foo\nbar\n\n")
        sw = StopwordList.from_file(path, "xx")
        assert sw.words == {"foo", "bar"}


class CountingBackend:
    name = "counting"

    def __init__(self, mapping):
        self.mapping = mapping
        self.calls = 0

    def translate(self, text, source_lang):
        self.calls += 1
        return self.mapping[(source_lang, text)]


class TestTranslation:
    def test_english_passthrough_is_identity(self):
        assert translate_to_english("hello", "en", None) == "hello"
        translator = Translator(StaticTranslationBackend({}))
        assert translate_to_english("hello", "en", translator) == "hello"

    def test_stub_mapping(self):
        translator = Translator(StaticTranslationBackend({("es", "hola"): "hello"}))
        assert translate_to_english("hola", "es", translator) == "hello"

    def test_adapter_failure_returns_original(self, caplog):
        translator = Translator(StaticTranslationBackend({}))
        with caplog.at_level("WARNING"):
            assert translate_to_english("bonjour", "fr", translator) == "bonjour"
        assert "translation failed" in caplog.text

    def test_cache_consulted_before_backend(self):
        backend = CountingBackend({("es", "hola"): "hello"})
        translator = Translator(backend)
        for _ in range(4):
            assert translator.translate("hola", "es") == "hello"
        assert backend.calls == 1

    def test_cache_file_round_trip_with_escaping(self, tmp_path):
        cache = tmp_path / "cache.tsv"
        tricky = "line\none\ttab\\slash"
        backend = CountingBackend({("es", tricky): "clean text"})
        Translator(backend, cache_path=cache).translate(tricky, "es")
        fresh_backend = CountingBackend({})
        translator = Translator(fresh_backend, cache_path=cache)
        assert translator.translate(tricky, "es") == "clean text"
        assert fresh_backend.calls == 0

    def test_identity_backend_registered(self):
        backend = create_translation_backend("identity")
        assert isinstance(backend, IdentityTranslationBackend)
        assert backend.translate("x", "fr") == "x"

    def test_unknown_backend_name(self):
        with pytest.raises(KeyError):
            create_translation_backend("nonexistent")
