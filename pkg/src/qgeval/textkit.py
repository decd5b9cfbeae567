"""Deterministic text primitives shared by all overlap metrics.

Tokenization here is intentionally simple (lowercase, whitespace split,
standalone punctuation stripped): the worked single-sentence scores this
package reproduces are only consistent with a punctuation-free token
stream, so that policy is the default and `keep_punct` is exposed for
experimentation only.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

PUNCT_CHARS = set(".,?!;:\"'()")


@dataclass(frozen=True)
class TokenSequence:
    """A tokenized sentence plus the raw string it came from."""

    tokens: tuple[str, ...]
    source: str = ""

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]


def tokenize(text: str, keep_punct: bool = False) -> TokenSequence:
    """Lowercase and whitespace-split `text`, peeling punctuation off token edges.

    Punctuation characters (.,?!;:"'()) at the edges of a whitespace chunk
    become separate tokens; tokens that are pure punctuation are dropped
    unless `keep_punct` is true. Interior punctuation (hyphens, apostrophes
    inside contractions) is left alone.
    """
    out: list[str] = []
    for chunk in text.lower().split():
        leading: list[str] = []
        while chunk and chunk[0] in PUNCT_CHARS:
            leading.append(chunk[0])
            chunk = chunk[1:]
        trailing: list[str] = []
        while chunk and chunk[-1] in PUNCT_CHARS:
            trailing.append(chunk[-1])
            chunk = chunk[:-1]
        parts = leading + ([chunk] if chunk else []) + list(reversed(trailing))
        for part in parts:
            if not keep_punct and all(c in PUNCT_CHARS for c in part):
                continue
            out.append(part)
    return TokenSequence(tokens=tuple(out), source=text)


def ngrams(seq: TokenSequence | tuple[str, ...] | list[str], n: int) -> Counter:
    """All contiguous n-grams of `seq` with multiplicity; empty when len < n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    toks = tuple(seq)
    return Counter(toks[i : i + n] for i in range(len(toks) - n + 1))


def lcs_length(a, b) -> int:
    """Length of the longest (not necessarily contiguous) common subsequence."""
    xs, ys = tuple(a), tuple(b)
    if not xs or not ys:
        return 0
    prev = [0] * (len(ys) + 1)
    for x in xs:
        cur = [0] * (len(ys) + 1)
        for j, y in enumerate(ys, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


# ---------------------------------------------------------------------------
# Porter stemmer (1980 algorithm). Words shorter than 3 characters are left
# unchanged, per the original implementation note.
# ---------------------------------------------------------------------------

_VOWELS = set("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    c = word[i]
    if c in _VOWELS:
        return False
    if c == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of VC sequences in the [C](VC)^m[V] form of `stem`."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        if _is_consonant(stem, i):
            if prev_vowel:
                m += 1
            prev_vowel = False
        else:
            prev_vowel = True
    return m


def _contains_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    # consonant-vowel-consonant where the final consonant is not w, x or y
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


_STEP2_RULES = (
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
)

_STEP3_RULES = (
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
)

_STEP4_SUFFIXES = (
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
)


def porter_stem(word: str) -> str:
    """Standard Porter (1980) stem of a lowercase token."""
    if not word:
        raise ValueError("cannot stem an empty token")
    w = word.lower()
    if len(w) <= 2:
        return w

    # step 1a
    if w.endswith("sses"):
        w = w[:-2]
    elif w.endswith("ies"):
        w = w[:-2]
    elif w.endswith("ss"):
        pass
    elif w.endswith("s"):
        w = w[:-1]

    # step 1b
    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            w = w[:-1]
    else:
        cleanup = False
        if w.endswith("ed") and _contains_vowel(w[:-2]):
            w = w[:-2]
            cleanup = True
        elif w.endswith("ing") and _contains_vowel(w[:-3]):
            w = w[:-3]
            cleanup = True
        if cleanup:
            if w.endswith(("at", "bl", "iz")):
                w += "e"
            elif _ends_double_consonant(w) and w[-1] not in "lsz":
                w = w[:-1]
            elif _measure(w) == 1 and _ends_cvc(w):
                w += "e"

    # step 1c
    if w.endswith("y") and _contains_vowel(w[:-1]):
        w = w[:-1] + "i"

    # step 2
    for suffix, repl in _STEP2_RULES:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 0:
                w = stem + repl
            break

    # step 3
    for suffix, repl in _STEP3_RULES:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if _measure(stem) > 0:
                w = stem + repl
            break

    # step 4
    for suffix in _STEP4_SUFFIXES:
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if suffix == "ion" and (not stem or stem[-1] not in "st"):
                continue
            if _measure(stem) > 1:
                w = stem
            break

    # step 5a
    if w.endswith("e"):
        stem = w[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            w = stem

    # step 5b
    if _measure(w) > 1 and _ends_double_consonant(w) and w.endswith("l"):
        w = w[:-1]

    return w
