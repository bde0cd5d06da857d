"""Shared tokenization for metrics and control-value computation.

The tokenizer splits punctuation from words the way MT evaluation tooling
does (periods and commas stay attached to digits, dashes split only after
digits) and lowercases by default. SARI, BLEU, and the word-frequency
controls all go through here so their views of a sentence agree.
"""

from __future__ import annotations

import re

_ESCAPES = (
    ("<skipped>", ""),
    ("-\n", ""),
    ("\n", " "),
    ("&quot;", '"'),
    ("&amp;", "&"),
    ("&lt;", "<"),
    ("&gt;", ">"),
)

_PUNCT = re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])")
_PERIOD_BEFORE = re.compile(r"([^0-9])([\.,])")
_PERIOD_AFTER = re.compile(r"([\.,])([^0-9])")
_DIGIT_DASH = re.compile(r"([0-9])(-)")
_SPACES = re.compile(r"\s+")


def normalize(text: str, lowercase: bool = True) -> str:
    """Punctuation-split, space-collapsed form of a sentence."""
    if lowercase:
        text = text.lower()
    for src, dst in _ESCAPES:
        text = text.replace(src, dst)
    text = f" {text} "
    text = _PUNCT.sub(r" \1 ", text)
    text = _PERIOD_BEFORE.sub(r"\1 \2 ", text)
    text = _PERIOD_AFTER.sub(r" \1 \2", text)
    text = _DIGIT_DASH.sub(r"\1 \2 ", text)
    return _SPACES.sub(" ", text).strip()


def tokens(text: str, lowercase: bool = True) -> list[str]:
    norm = normalize(text, lowercase=lowercase)
    return norm.split(" ") if norm else []


_ALNUM = re.compile(r"[^\W_]", re.UNICODE)


def word_tokens(text: str, lowercase: bool = True) -> list[str]:
    """Tokens that contain at least one letter or digit."""
    return [t for t in tokens(text, lowercase=lowercase) if _ALNUM.search(t)]
