"""Request normalization and multi-word term matching.

Requests and vocabulary terms go through the same pipeline (lowercase,
alias table, plural folding) so a term written once in singular form matches
"buses", "SUVs", "motorcyclists" and so on.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Sequence

_TOKEN = re.compile(r"[a-z0-9]+(?:\.[0-9]+)?")

Term = tuple[str, ...]


def fold_plural(token: str) -> str:
    if len(token) <= 3 or token.isdigit():
        return token
    if token.endswith("ies") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith(("sses", "shes", "ches", "xes", "zes", "uses")):
        return token[:-2]
    if token.endswith(("ss", "us", "is")):
        return token
    if token.endswith("s"):
        return token[:-1]
    return token


def normalize_token(token: str, aliases: Mapping[str, str]) -> str:
    token = token.lower()
    if token in aliases:
        return aliases[token]
    folded = fold_plural(token)
    return aliases.get(folded, folded)


def tokenize(text: str, aliases: Mapping[str, str] | None = None) -> list[str]:
    aliases = default_tables().aliases if aliases is None else aliases
    return [normalize_token(t, aliases) for t in _TOKEN.findall(text.lower())]


def normalize_term(term: str, aliases: Mapping[str, str] | None = None) -> Term:
    return tuple(tokenize(term, aliases))


def find_terms(tokens: Sequence[str], terms: Iterable[Term]) -> list[tuple[int, Term]]:
    """Every (position, term) occurrence of ``terms`` in ``tokens``.

    Overlapping occurrences all count, so "traffic jam" hits both the
    "traffic jam" and "jam" terms.
    """
    by_len: dict[int, set[Term]] = {}
    for term in terms:
        if term:
            by_len.setdefault(len(term), set()).add(term)
    hits = []
    for i in range(len(tokens)):
        for n, group in sorted(by_len.items(), reverse=True):
            gram = tuple(tokens[i : i + n])
            if len(gram) == n and gram in group:
                hits.append((i, gram))
    return hits


@dataclass(frozen=True)
class KeywordTables:
    """Parsed keyword data: per-tool match and limitation terms."""

    keywords: Mapping[str, frozenset[Term]]
    cannot: Mapping[str, frozenset[Term]]
    unsupported: frozenset[Term]
    aliases: Mapping[str, str]


def _split(value: str) -> list[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


def parse_keyword_tables(source: str) -> KeywordTables:
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(source)
    aliases = {k.lower(): v.strip().lower() for k, v in parser["aliases"].items()} if parser.has_section("aliases") else {}
    keywords, cannot = {}, {}
    for section in parser.sections():
        if section in ("aliases", "unsupported"):
            continue
        body = parser[section]
        keywords[section] = frozenset(normalize_term(t, aliases) for t in _split(body.get("keywords", "")))
        cannot[section] = frozenset(normalize_term(t, aliases) for t in _split(body.get("cannot", "")))
    unsupported = frozenset()
    if parser.has_section("unsupported"):
        unsupported = frozenset(normalize_term(t, aliases) for t in _split(parser["unsupported"].get("terms", "")))
    return KeywordTables(keywords, cannot, unsupported, aliases)


@lru_cache(maxsize=None)
def default_tables() -> KeywordTables:
    source = resources.files("semcom.data").joinpath("keywords.ini").read_text(encoding="utf-8")
    return parse_keyword_tables(source)


def load_template(name: str) -> str:
    return resources.files("semcom.data").joinpath(name).read_text(encoding="utf-8")
