"""Record schema, JSONL/TSV readers and writers, per-language splits, translation providers.

Records carry one query-category (QC) or query-item (QI) sample:

    {"id": "...", "task"-implied fields, "language": "ko",
     "origin_query": "...", "cate_path": "..." (QC) | "item_title": "..." (QI),
     "label": 0|1?, "query_en"?: "...", "title_en"?: "..."}

JSONL is the primary interchange format; TSV with a header row is also
accepted. Translation is a pluggable provider boundary with identity and
lookup-table stubs plus a generic JSON-over-HTTP endpoint provider.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import urllib.request
from dataclasses import dataclass, replace
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DuplicateIdError,
    InvalidLabelError,
    MissingFieldError,
    ProviderContractError,
)

log = logging.getLogger(__name__)

TASKS = ("QC", "QI")


@dataclass(frozen=True)
class Record:
    id: str
    task: str
    language: str
    origin_query: str
    query_en: str | None = None
    cate_path: str | None = None
    item_title: str | None = None
    title_en: str | None = None
    label: int | None = None

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise DataError(f"record {self.id!r}: unknown task {self.task!r}")
        if not self.id:
            raise DataError("record id must be non-empty")
        if self.task == "QC" and not self.cate_path:
            raise MissingFieldError(f"record {self.id!r}: QC record without cate_path")
        if self.task == "QI" and not self.item_title:
            raise MissingFieldError(f"record {self.id!r}: QI record without item_title")
        if self.label is not None and self.label not in (0, 1):
            raise InvalidLabelError(f"record {self.id!r}: label must be 0 or 1, got {self.label!r}")

    def query_text(self) -> str:
        return self.query_en if self.query_en is not None else self.origin_query

    def target_text(self) -> str:
        if self.task == "QI":
            return self.title_en if self.title_en is not None else (self.item_title or "")
        return self.cate_path or ""


_RECORD_FIELDS = ("id", "language", "origin_query", "query_en", "cate_path", "item_title", "title_en", "label")


def _record_from_dict(raw: dict, task: str, where: str) -> Record:
    for required in ("id", "language", "origin_query"):
        if raw.get(required) in (None, ""):
            raise MissingFieldError(f"{where}: missing field {required!r}")
    label = raw.get("label")
    if label is not None:
        if isinstance(label, str):
            if label not in ("0", "1"):
                raise InvalidLabelError(f"{where}: label must be 0 or 1, got {label!r}")
            label = int(label)
        elif isinstance(label, bool) or not isinstance(label, int):
            raise InvalidLabelError(f"{where}: label must be 0 or 1, got {label!r}")
    try:
        return Record(
            id=str(raw["id"]),
            task=task,
            language=str(raw["language"]),
            origin_query=str(raw["origin_query"]),
            query_en=raw.get("query_en"),
            cate_path=raw.get("cate_path"),
            item_title=raw.get("item_title"),
            title_en=raw.get("title_en"),
            label=label,
        )
    except DataError as exc:
        raise type(exc)(f"{where}: {exc}") from None


@dataclass
class ReadReport:
    records: list[Record]
    skipped: list[tuple[int, str]]


def _iter_raw(path: str, fmt: str) -> Iterable[tuple[int, dict | None, str | None]]:
    """Yields (line number, parsed dict or None, parse-error message or None)."""
    if fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    if not isinstance(obj, dict):
                        yield lineno, None, "line is not a JSON object"
                    else:
                        yield lineno, obj, None
                except json.JSONDecodeError as exc:
                    yield lineno, None, f"invalid JSON: {exc}"
    elif fmt == "tsv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh, delimiter="\t")
            for lineno, row in enumerate(reader, start=2):
                yield lineno, {k: (v if v != "" else None) for k, v in row.items()}, None
    else:
        raise ConfigError(f"unknown records format {fmt!r} (expected jsonl or tsv)")


def read_records(path: str, task: str, fmt: str = "jsonl", strict: bool = True) -> ReadReport:
    """Parse and validate a records file.

    Strict mode raises on the first malformed line; lenient mode skips bad
    lines and reports them (with line numbers) in the returned report.
    """
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r} (expected QC or QI)")
    records: list[Record] = []
    skipped: list[tuple[int, str]] = []
    seen_ids: set[str] = set()
    for lineno, raw, parse_error in _iter_raw(path, fmt):
        where = f"{path}:{lineno}"
        try:
            if parse_error is not None:
                raise DataError(f"{where}: {parse_error}")
            record = _record_from_dict(raw, task, where)
            if record.id in seen_ids:
                raise DuplicateIdError(f"{where}: duplicate id {record.id!r}")
            seen_ids.add(record.id)
            records.append(record)
        except DataError as exc:
            if strict:
                raise
            skipped.append((lineno, str(exc)))
            log.warning("skipping record: %s", exc)
    return ReadReport(records=records, skipped=skipped)


def write_records(records: Iterable[Record], path: str) -> None:
    """JSONL, one record per line, omitting unset optional fields."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {name: getattr(r, name) for name in _RECORD_FIELDS}
            obj = {k: v for k, v in obj.items() if v is not None}
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=True) + "\n")


def split_validation(
    records: Sequence[Record], ratio: float = 0.9, seed: int = 42
) -> tuple[list[Record], list[Record]]:
    """Random train/validation split performed independently per language.

    Per language the train share is floor(ratio * n); a language with fewer
    than 2 records goes entirely to train (with a warning). Deterministic
    for a fixed seed regardless of how languages interleave in the input.
    """
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio={ratio} outside (0, 1)")
    by_language: dict[str, list[int]] = {}
    for i, r in enumerate(records):
        by_language.setdefault(r.language, []).append(i)
    train_idx: list[int] = []
    val_idx: list[int] = []
    for language in sorted(by_language):
        idx = by_language[language]
        if len(idx) < 2:
            log.warning("language %r has %d record(s); assigning all to train", language, len(idx))
            train_idx.extend(idx)
            continue
        lang_key = int.from_bytes(
            hashlib.blake2b(language.encode("utf-8"), digest_size=8).digest(), "little"
        )
        rng = np.random.default_rng([seed, lang_key])
        order = rng.permutation(len(idx))
        n_train = math.floor(ratio * len(idx))
        train_idx.extend(idx[i] for i in order[:n_train])
        val_idx.extend(idx[i] for i in order[n_train:])
    train_idx.sort()
    val_idx.sort()
    return [records[i] for i in train_idx], [records[i] for i in val_idx]


# --- translation providers ------------------------------------------------------


class TranslationProvider(Protocol):
    def translate_batch(self, texts: list[str]) -> list[str]: ...


class IdentityProvider:
    """Passes text through unchanged (the no-op stand-in for a real translator)."""

    def translate_batch(self, texts: list[str]) -> list[str]:
        return list(texts)


class LookupProvider:
    """Dictionary-backed translation; unknown strings pass through unchanged."""

    def __init__(self, table: dict[str, str]):
        self.table = dict(table)

    def translate_batch(self, texts: list[str]) -> list[str]:
        return [self.table.get(t, t) for t in texts]


class RemoteProvider:
    """POSTs {"texts": [...]} to a JSON endpoint answering {"translations": [...]}."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def translate_batch(self, texts: list[str]) -> list[str]:
        payload = json.dumps({"texts": texts}).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint, data=payload, headers={"Content-Type": "application/json"}
        )
        with urllib.request.urlopen(request, timeout=self.timeout) as response:
            body = json.loads(response.read().decode("utf-8"))
        return list(body["translations"])


def make_provider(config: dict) -> TranslationProvider:
    """Build a provider from {"provider": "identity"|"lookup"|"remote", ...}."""
    kind = config.get("provider")
    if kind == "identity":
        return IdentityProvider()
    if kind == "lookup":
        path = config.get("lookup_path")
        if not path:
            raise ConfigError("lookup provider requires lookup_path")
        with open(path, encoding="utf-8") as fh:
            return LookupProvider(json.load(fh))
    if kind == "remote":
        endpoint = config.get("endpoint")
        if not endpoint:
            raise ConfigError("remote provider requires endpoint")
        return RemoteProvider(endpoint)
    raise ConfigError(f"unknown provider kind {kind!r}")


def translate(
    records: Sequence[Record],
    provider: TranslationProvider,
    batch_size: int = 32,
) -> tuple[list[Record], int]:
    """Fill query_en (and title_en for QI) via the provider; already-translated rows are untouched.

    A failing batch is retried once, then its records are left untranslated;
    the count of such records is returned alongside the new record list.
    """
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    out = list(records)
    failed = 0

    # (record position, attribute to fill, source text)
    jobs: list[tuple[int, str, str]] = []
    for i, r in enumerate(out):
        if r.query_en is None:
            jobs.append((i, "query_en", r.origin_query))
        if r.task == "QI" and r.title_en is None and r.item_title is not None:
            jobs.append((i, "title_en", r.item_title))

    for lo in range(0, len(jobs), batch_size):
        batch = jobs[lo : lo + batch_size]
        texts = [text for _, _, text in batch]
        translations = None
        for attempt in (1, 2):
            try:
                translations = provider.translate_batch(texts)
                break
            except ProviderContractError:
                raise
            except Exception as exc:
                if attempt == 2:
                    log.warning("translation batch failed twice, leaving untranslated: %s", exc)
                else:
                    log.warning("translation batch failed (attempt 1), retrying: %s", exc)
        if translations is None:
            failed += len(batch)
            continue
        if len(translations) != len(texts):
            raise ProviderContractError(
                f"provider returned {len(translations)} translations for {len(texts)} texts"
            )
        for (i, attr, _), translated in zip(batch, translations):
            out[i] = replace(out[i], **{attr: translated})
    return out, failed


# --- predictions -----------------------------------------------------------------


@dataclass(frozen=True)
class Prediction:
    id: str
    prob: float
    leaf: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise DataError("prediction id must be non-empty")
        if not 0.0 <= self.prob <= 1.0:
            raise DataError(f"prediction {self.id!r}: prob={self.prob} outside [0, 1]")


def write_predictions(preds: Iterable[Prediction], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in preds:
            obj: dict = {"id": p.id, "prob": p.prob}
            if p.leaf is not None:
                obj["leaf"] = p.leaf
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_predictions(path: str) -> list[Prediction]:
    out: list[Prediction] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                out.append(Prediction(id=str(obj["id"]), prob=obj["prob"], leaf=obj.get("leaf")))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}:{lineno}: malformed prediction: {exc}") from None
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return out
