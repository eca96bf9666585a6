"""Deterministic text cleaning and normalization for queries, titles, and category levels.

Sixteen techniques organized in four groups, applied in a fixed canonical
order:

  basic   - to_lower, clean_contractions, remove_control_chars
  symbol  - symbol_cleanup, nfkc, fractions_to_decimals, range_mul, percent_temp
  entity  - model_names, number_unit, thousand_separators
  noise   - remove_emoji, squeeze_repeats, trim_underscores, dedupe_tokens,
            remove_promo

Every operation is a pure function of (text, config); the composed
``normalize`` is idempotent and total. Dictionaries (contractions, model
aliases, units, promo phrases) are configuration data and can be loaded
from JSON.
"""
from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum

from .errors import ConfigError


class RuleId(str, Enum):
    """One identifier per cleaning technique, in canonical pipeline order."""

    TO_LOWER = "to_lower"
    CLEAN_CONTRACTIONS = "clean_contractions"
    REMOVE_CONTROL_CHARS = "remove_control_chars"
    SYMBOL_CLEANUP = "symbol_cleanup"
    NFKC = "nfkc"
    FRACTIONS_TO_DECIMALS = "fractions_to_decimals"
    RANGE_MUL = "range_mul"
    PERCENT_TEMP = "percent_temp"
    MODEL_NAMES = "model_names"
    NUMBER_UNIT = "number_unit"
    THOUSAND_SEPARATORS = "thousand_separators"
    REMOVE_EMOJI = "remove_emoji"
    SQUEEZE_REPEATS = "squeeze_repeats"
    TRIM_UNDERSCORES = "trim_underscores"
    DEDUPE_TOKENS = "dedupe_tokens"
    REMOVE_PROMO = "remove_promo"


CANONICAL_ORDER: tuple[RuleId, ...] = tuple(RuleId)

BASIC_RULES = CANONICAL_ORDER[0:3]
SYMBOL_RULES = CANONICAL_ORDER[3:8]
ENTITY_RULES = CANONICAL_ORDER[8:11]
NOISE_RULES = CANONICAL_ORDER[11:16]

DEFAULT_CONTRACTIONS: dict[str, str] = {
    "it's": "it is",
    "don't": "do not",
    "can't": "cannot",
    "won't": "will not",
    "i'm": "i am",
    "you're": "you are",
    "they're": "they are",
    "isn't": "is not",
    "aren't": "are not",
    "wasn't": "was not",
    "weren't": "were not",
    "doesn't": "does not",
    "didn't": "did not",
    "couldn't": "could not",
    "shouldn't": "should not",
    "wouldn't": "would not",
    "let's": "let us",
    "that's": "that is",
    "what's": "what is",
    "it'll": "it will",
}

DEFAULT_MODEL_ALIASES: dict[str, str] = {
    "i-phone": "iphone",
    "i phone": "iphone",
}

DEFAULT_UNITS: frozenset[str] = frozenset(
    "gb mb tb kb mah ml l kg g mg cm mm m km inch w kw v hz ghz mhz".split()
)

DEFAULT_PROMO_PHRASES: tuple[str, ...] = ("free shipping", "best seller")


def _validate_lower_keys(mapping: dict[str, str], what: str) -> None:
    for key in mapping:
        if key != key.lower():
            raise ConfigError(f"{what} key {key!r} must be lowercase")


@dataclass(frozen=True)
class NormConfig:
    """Immutable rule selection plus the dictionaries the rules consume.

    enabled_rules must be a subsequence of the canonical order; promo
    removal additionally requires promo_enabled (default off).
    """

    enabled_rules: tuple[RuleId, ...] = CANONICAL_ORDER
    contractions: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_CONTRACTIONS))
    model_aliases: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_MODEL_ALIASES))
    units: frozenset[str] = DEFAULT_UNITS
    promo_phrases: tuple[str, ...] = DEFAULT_PROMO_PHRASES
    promo_enabled: bool = False

    def __post_init__(self) -> None:
        order = {rule: i for i, rule in enumerate(CANONICAL_ORDER)}
        positions = [order[r] for r in self.enabled_rules]
        if len(set(positions)) != len(positions) or positions != sorted(positions):
            raise ConfigError("enabled_rules must be a subsequence of the canonical rule order")
        _validate_lower_keys(self.contractions, "contraction")
        _validate_lower_keys(self.model_aliases, "model alias")
        for alias, canon in self.model_aliases.items():
            if canon in self.model_aliases:
                raise ConfigError(f"alias target {canon!r} is itself an alias key")
        for unit in self.units:
            if not unit or any(c.isdigit() or c.isspace() for c in unit):
                raise ConfigError(f"unit {unit!r} must be non-empty with no digits or whitespace")
        for phrase in self.promo_phrases:
            if phrase != phrase.lower():
                raise ConfigError(f"promo phrase {phrase!r} must be lowercase")


def load_config(path: str) -> NormConfig:
    """Build a NormConfig from a JSON file; absent keys keep their defaults."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top-level JSON value must be an object")
    kwargs = {}
    if "enabled_rules" in raw:
        try:
            kwargs["enabled_rules"] = tuple(RuleId(name) for name in raw["enabled_rules"])
        except ValueError as exc:
            raise ConfigError(f"{path}: unknown rule id in enabled_rules: {exc}") from None
    if "contractions" in raw:
        kwargs["contractions"] = dict(raw["contractions"])
    if "model_aliases" in raw:
        kwargs["model_aliases"] = dict(raw["model_aliases"])
    if "units" in raw:
        kwargs["units"] = frozenset(raw["units"])
    if "promo_phrases" in raw:
        kwargs["promo_phrases"] = tuple(raw["promo_phrases"])
    if "promo_enabled" in raw:
        kwargs["promo_enabled"] = bool(raw["promo_enabled"])
    return NormConfig(**kwargs)


# --- basic text normalization -------------------------------------------------

# Curly apostrophes are accepted when matching contraction keys so that
# "it’s" expands even though symbol cleanup runs later in the pipeline.
_APOSTROPHES = "['\u2019\u2018\u02bc]"

_WS_CONTROL = dict.fromkeys(map(ord, "\t\n\r\x0b\x0c"), " ")


def _rule_to_lower(text: str, config: NormConfig) -> str:
    return text.lower()


def _contraction_pattern(contractions: dict[str, str]) -> re.Pattern[str] | None:
    if not contractions:
        return None
    alts = []
    for key in sorted(contractions, key=len, reverse=True):
        alts.append(re.escape(key).replace("'", _APOSTROPHES))
    return re.compile(r"\b(?:" + "|".join(alts) + r")\b")


def _rule_clean_contractions(text: str, config: NormConfig) -> str:
    pattern = _contraction_pattern(config.contractions)
    if pattern is None:
        return text

    def repl(match: re.Match[str]) -> str:
        key = re.sub(_APOSTROPHES, "'", match.group(0))
        return config.contractions[key]

    return pattern.sub(repl, text)


def _rule_remove_control_chars(text: str, config: NormConfig) -> str:
    text = text.translate(_WS_CONTROL)
    out = []
    for ch in text:
        if unicodedata.category(ch) in ("Cc", "Cf"):
            continue
        out.append(ch)
    return "".join(out)


# --- symbol & character normalization ----------------------------------------

_SYMBOL_MAP = {
    "“": '"',  # left double quote
    "”": '"',  # right double quote
    "„": '"',
    "‘": "'",
    "’": "'",
    "‚": "'",
    "–": "-",  # en dash
    "—": "-",  # em dash
    "―": "-",
    "‐": "-",
    "−": "-",  # minus sign
    "…": "...",
    "×": "x",  # multiplication sign; range_mul turns digit-x-digit into *
    "\u00a0": " ",  # no-break space
}
_SYMBOL_RE = re.compile("|".join(map(re.escape, _SYMBOL_MAP)))

_VULGAR_FRACTIONS = "¼½¾⅐⅑⅒⅓⅔⅕⅖⅗⅘⅙⅚⅛⅜⅝⅞↉"
_VULGAR_RE = re.compile("[" + _VULGAR_FRACTIONS + "]")
# NFKC decomposes vulgar fractions to single-digit numerators; the negative
# lookahead keeps a greedy denominator from swallowing an adjacent fraction
_SLASH_FRACTION_RE = re.compile(r"(\d)⁄(\d+)(?!⁄)")

_TILDE_RANGE_RE = re.compile(r"(?<=\d)\s*[~～]\s*(?=\d)")
_MUL_RE = re.compile(r"(?<=\d)(\s*)[xX×](\s*)(?=\d)")

_TEMP_C_RE = re.compile(r"(?<=\d)\s*(?:°\s*[cC]\b|℃)")
_TEMP_F_RE = re.compile(r"(?<=\d)\s*(?:°\s*[fF]\b|℉)")
_PERCENT_RE = re.compile(r"(?<=\d)\s*%")


def _rule_symbol_cleanup(text: str, config: NormConfig) -> str:
    return _SYMBOL_RE.sub(lambda m: _SYMBOL_MAP[m.group(0)], text)


def _rule_nfkc(text: str, config: NormConfig) -> str:
    return unicodedata.normalize("NFKC", text)


def _format_decimal(value: float) -> str:
    return f"{value:g}"


def _decomposed_fraction(match: re.Match[str]) -> str:
    denominator = int(match.group(2))
    if denominator == 0:
        return match.group(0)
    return _format_decimal(int(match.group(1)) / denominator)


def _rule_fractions_to_decimals(text: str, config: NormConfig) -> str:
    # NFKC rewrites vulgar fractions as digit + U+2044 + digit, so both the
    # single codepoints and the decomposed form are handled; iterate to a
    # fixed point because a literal fraction slash can chain rewrites
    for _ in range(50):
        new = _SLASH_FRACTION_RE.sub(_decomposed_fraction, text)
        if new == text:
            break
        text = new
    return _VULGAR_RE.sub(lambda m: _format_decimal(unicodedata.numeric(m.group(0))), text)


def _rule_range_mul(text: str, config: NormConfig) -> str:
    text = _TILDE_RANGE_RE.sub("-", text)
    return _MUL_RE.sub(r"\1*\2", text)


def _rule_percent_temp(text: str, config: NormConfig) -> str:
    text = _TEMP_C_RE.sub("c", text)
    text = _TEMP_F_RE.sub("f", text)
    return _PERCENT_RE.sub("%", text)


# --- domain-specific entity normalization ------------------------------------


def _alias_pattern(aliases: dict[str, str]) -> re.Pattern[str] | None:
    if not aliases:
        return None
    alts = []
    for key in sorted(aliases, key=len, reverse=True):
        alts.append(re.escape(key).replace(r"\ ", r"\s+"))
    return re.compile(r"\b(?:" + "|".join(alts) + r")\b")


def _rule_model_names(text: str, config: NormConfig) -> str:
    pattern = _alias_pattern(config.model_aliases)
    if pattern is None:
        return text

    def repl(match: re.Match[str]) -> str:
        key = re.sub(r"\s+", " ", match.group(0))
        return config.model_aliases[key]

    return pattern.sub(repl, text)


def _unit_pattern(units: frozenset[str]) -> re.Pattern[str] | None:
    if not units:
        return None
    alts = "|".join(sorted(units, key=len, reverse=True))
    return re.compile(r"(?<=\d)\s*(" + alts + r")\b", re.IGNORECASE)


def _rule_number_unit(text: str, config: NormConfig) -> str:
    pattern = _unit_pattern(config.units)
    if pattern is None:
        return text
    return pattern.sub(lambda m: m.group(1).lower(), text)


_THOUSAND_RE = re.compile(r"(?<!\d)(\d{1,3}(?:,\d{3})+)(?!\d)")


def _rule_thousand_separators(text: str, config: NormConfig) -> str:
    return _THOUSAND_RE.sub(lambda m: m.group(1).replace(",", ""), text)


# --- noise reduction ----------------------------------------------------------

_EMOJI_RE = re.compile(
    "["
    "\U0001f000-\U0001faff"  # emoticons, pictographs, transport, supplemental
    "\u2600-\u27bf"  # misc symbols and dingbats
    "\u2b00-\u2bff"  # arrows, stars (e.g. U+2B50)
    "\ufe0e\ufe0f"  # variation selectors
    "\u20e3"  # combining enclosing keycap
    "]+"
)

_WS_RUN_RE = re.compile(r"\s+")
_EDGE_UNDERSCORE_RE = re.compile(r"^[\s_]+|[\s_]+$")


def _rule_remove_emoji(text: str, config: NormConfig) -> str:
    return _EMOJI_RE.sub(" ", text)


def _rule_squeeze_repeats(text: str, config: NormConfig) -> str:
    out = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        j = i + 1
        while j < n and text[j] == ch:
            j += 1
        run = j - i
        if run >= 3 and ch.isalpha():
            # interior runs shrink to 2, runs at the end of a letter
            # sequence to 1; digits are never touched
            keep = 2 if (j < n and text[j].isalpha()) else 1
            out.append(ch * keep)
        else:
            out.append(text[i:j])
        i = j
    return _WS_RUN_RE.sub(" ", "".join(out))


def _rule_trim_underscores(text: str, config: NormConfig) -> str:
    return _EDGE_UNDERSCORE_RE.sub("", text)


def _rule_dedupe_tokens(text: str, config: NormConfig) -> str:
    out: list[str] = []
    for tok in text.split():
        if not out or tok != out[-1]:
            out.append(tok)
    return " ".join(out)


def _promo_pattern(phrases: tuple[str, ...]) -> re.Pattern[str] | None:
    if not phrases:
        return None
    alts = []
    for phrase in sorted(phrases, key=len, reverse=True):
        alts.append(re.escape(phrase).replace(r"\ ", r"\s+"))
    return re.compile(r"\b(?:" + "|".join(alts) + r")\b")


def _rule_remove_promo(text: str, config: NormConfig) -> str:
    pattern = _promo_pattern(config.promo_phrases)
    if pattern is None:
        return text
    # removal can splice the two halves of another phrase back together,
    # so iterate to a fixed point (each pass strictly shortens the text)
    for _ in range(100):
        new = pattern.sub(" ", text)
        if new == text:
            return text
        text = new
    return text


_RULE_FUNCS = {
    RuleId.TO_LOWER: _rule_to_lower,
    RuleId.CLEAN_CONTRACTIONS: _rule_clean_contractions,
    RuleId.REMOVE_CONTROL_CHARS: _rule_remove_control_chars,
    RuleId.SYMBOL_CLEANUP: _rule_symbol_cleanup,
    RuleId.NFKC: _rule_nfkc,
    RuleId.FRACTIONS_TO_DECIMALS: _rule_fractions_to_decimals,
    RuleId.RANGE_MUL: _rule_range_mul,
    RuleId.PERCENT_TEMP: _rule_percent_temp,
    RuleId.MODEL_NAMES: _rule_model_names,
    RuleId.NUMBER_UNIT: _rule_number_unit,
    RuleId.THOUSAND_SEPARATORS: _rule_thousand_separators,
    RuleId.REMOVE_EMOJI: _rule_remove_emoji,
    RuleId.SQUEEZE_REPEATS: _rule_squeeze_repeats,
    RuleId.TRIM_UNDERSCORES: _rule_trim_underscores,
    RuleId.DEDUPE_TOKENS: _rule_dedupe_tokens,
    RuleId.REMOVE_PROMO: _rule_remove_promo,
}


def apply_rule(text: str, rule: RuleId | str, config: NormConfig | None = None) -> str:
    """Apply exactly one technique. Unknown rule identifiers raise ConfigError."""
    if config is None:
        config = NormConfig()
    if isinstance(rule, str) and not isinstance(rule, RuleId):
        try:
            rule = RuleId(rule)
        except ValueError:
            raise ConfigError(f"unknown rule id: {rule!r}") from None
    func = _RULE_FUNCS.get(rule)
    if func is None:
        raise ConfigError(f"unknown rule id: {rule!r}")
    return func(text, config)


def _run_rules(
    text: str,
    rules: tuple[RuleId, ...],
    config: NormConfig,
    counts: dict[RuleId, int] | None = None,
) -> str:
    enabled = set(config.enabled_rules)
    for rule in rules:
        if rule not in enabled:
            continue
        if rule is RuleId.REMOVE_PROMO and not config.promo_enabled:
            continue
        new = _RULE_FUNCS[rule](text, config)
        if counts is not None and new != text:
            counts[rule] = counts.get(rule, 0) + 1
        text = new
    return text


def basic_normalize(text: str, config: NormConfig | None = None) -> str:
    """Lowercase, expand contractions, and strip control/zero-width characters."""
    config = config or NormConfig()
    return _run_rules(text, BASIC_RULES, config)


def symbol_normalize(text: str, config: NormConfig | None = None) -> str:
    """Fold quotes/dashes, NFKC, fractions, range/multiplication marks, percent and temperature."""
    config = config or NormConfig()
    return _run_rules(text, SYMBOL_RULES, config)


def entity_normalize(text: str, config: NormConfig | None = None) -> str:
    """Canonicalize model names, join number-unit pairs, drop thousand separators.

    Expects lowercase input (the pipeline guarantees it). When to_lower is
    enabled the invariant is restored here first: NFKC can surface cased
    ASCII from compatibility characters after the basic group already ran.
    """
    config = config or NormConfig()
    if RuleId.TO_LOWER in config.enabled_rules:
        text = text.lower()
    return _run_rules(text, ENTITY_RULES, config)


def reduce_noise(text: str, config: NormConfig | None = None) -> str:
    """Strip emoji, squeeze repeats, trim underscores, dedupe tokens, drop promo phrases."""
    config = config or NormConfig()
    counts: dict[RuleId, int] = {}
    text = _run_rules(text, NOISE_RULES, config, counts)
    if RuleId.REMOVE_PROMO in counts and RuleId.DEDUPE_TOKENS in config.enabled_rules:
        # promo removal can make two identical tokens adjacent
        text = _rule_dedupe_tokens(text, config)
    return _WS_RUN_RE.sub(" ", text).strip()


def _one_pass(text: str, config: NormConfig, counts: dict[RuleId, int] | None) -> str:
    text = _run_rules(text, BASIC_RULES, config, counts)
    text = _run_rules(text, SYMBOL_RULES, config, counts)
    if RuleId.TO_LOWER in config.enabled_rules:
        text = text.lower()
    noise_counts: dict[RuleId, int] = {}
    text = _run_rules(text, ENTITY_RULES, config, counts)
    text = _run_rules(text, NOISE_RULES, config, noise_counts)
    if RuleId.REMOVE_PROMO in noise_counts and RuleId.DEDUPE_TOKENS in config.enabled_rules:
        text = _rule_dedupe_tokens(text, config)
    if counts is not None:
        for rule, n in noise_counts.items():
            counts[rule] = counts.get(rule, 0) + n
    return _WS_RUN_RE.sub(" ", text).strip()


def normalize(
    text: str,
    config: NormConfig | None = None,
    counts: dict[RuleId, int] | None = None,
) -> str:
    """Full cleaning pipeline: basic -> symbol -> entity -> noise, to a fixed point.

    A noise-group rule can expose a pattern for an earlier group (removing
    an emoji between a number and its unit, say), so the pass repeats until
    the text is stable; almost all inputs settle in one pass. Total and
    idempotent; restricted to config.enabled_rules. When counts is given,
    it is incremented per rule application that changed the text.
    """
    config = config or NormConfig()
    for _ in range(4):
        new = _one_pass(text, config, counts)
        if new == text:
            return new
        text = new
    return text
