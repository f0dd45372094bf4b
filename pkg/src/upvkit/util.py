"""Small shared helpers: stable hashing, file digests, JSON-lines IO."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Iterator, TextIO


def stable_hash_u64(*parts: object) -> int:
    """Platform- and run-stable 64-bit hash of the string forms of ``parts``.

    Python's builtin ``hash`` is salted per process, so anything that feeds a
    seed must go through here instead.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def read_jsonl(stream: TextIO) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, object) pairs, skipping blank lines."""
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise ValueError(f"line {lineno}: expected a JSON object")
        yield lineno, obj


def write_jsonl(stream: TextIO, records: Iterable[dict[str, Any]]) -> int:
    n = 0
    for rec in records:
        stream.write(json.dumps(rec, ensure_ascii=False, sort_keys=True))
        stream.write("\n")
        n += 1
    return n
