"""Synthetic query/title pairs whose label is containment >= 2/3 by construction.

Queries are three distinct vocabulary tokens. Positive pairs put 2 or 3 of
them in the title plus fillers drawn from a positive-only pool; negative
pairs share 0 or 1 query tokens and use a negative-only filler pool. The
filler pools make the set linearly separable for a bag-of-tokens model
while the containment rule stays exact.

Rendered record text carries random case and spacing noise that the
normalize pipeline removes without changing the token sets.
"""
from __future__ import annotations

import json
import random

VOCAB = [f"item{i}" for i in range(160)]
POS_FILLERS = [f"grade{i}" for i in range(40)]
NEG_FILLERS = [f"offal{i}" for i in range(40)]
LANGUAGES = ["en", "fr", "es", "ko", "pt", "ja"]


def make_pairs(
    n: int, seed: int, label_noise: float = 0.0
) -> list[tuple[str, str, int]]:
    """(query, title, label) triples; label_noise flips that fraction of labels."""
    rng = random.Random(seed)
    out = []
    for _ in range(n):
        query = rng.sample(VOCAB, 3)
        if rng.random() < 0.5:
            shared = rng.choice((2, 3))
            title = rng.sample(query, shared) + rng.sample(POS_FILLERS, 2)
            label = 1
        else:
            shared = rng.choice((0, 1))
            title = rng.sample(query, shared) + rng.sample(NEG_FILLERS, 3)
            label = 0
        rng.shuffle(title)
        if label_noise and rng.random() < label_noise:
            label = 1 - label
        out.append((" ".join(query), " ".join(title), label))
    return out


def _mangle(text: str, rng: random.Random) -> str:
    """Case and spacing noise that normalization undoes."""
    chars = []
    for ch in text:
        chars.append(ch.upper() if ch.isalpha() and rng.random() < 0.3 else ch)
        if ch == " " and rng.random() < 0.2:
            chars.append(" ")
    return "".join(chars)


def write_records_file(
    pairs: list[tuple[str, str, int]], path: str, seed: int, start_id: int = 0
) -> None:
    """Render pairs as QI records (JSONL) with rendering noise applied."""
    rng = random.Random(seed + 1)
    with open(path, "w", encoding="utf-8") as fh:
        for i, (query, title, label) in enumerate(pairs):
            row = {
                "id": str(start_id + i),
                "language": LANGUAGES[i % len(LANGUAGES)],
                "origin_query": _mangle(query, rng),
                "item_title": _mangle(title, rng),
                "label": label,
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
