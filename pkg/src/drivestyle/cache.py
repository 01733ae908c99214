"""Keyed on-disk cache for remote text and embedding responses.

Records are UTF-8 text files named by their hex SHA-256 key.  Each file
holds a small header (``model_id``, ``source``, ``timestamp``), a blank
line, then the body.  Writes go through a temporary file and an atomic
rename, so concurrent writers of the same key serialize to a last-writer-
wins outcome and readers never observe partial records.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone

_HEX_KEY_LENGTH = 64


def text_key(*parts: str) -> str:
    """Stable hex SHA-256 key over the given string parts."""
    digest = hashlib.sha256()
    for part in parts:
        digest.update(part.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()


@dataclass
class CacheRecord:
    body: str
    model_id: str
    source: str  # "remote" or "fallback" or "local"
    timestamp: str = ""


class TextCache:
    """Directory-backed cache of :class:`CacheRecord` keyed by hex digests."""

    def __init__(self, directory: str):
        self.directory = directory
        os.makedirs(directory, exist_ok=True)

    def _path(self, key: str) -> str:
        if len(key) != _HEX_KEY_LENGTH or any(c not in "0123456789abcdef" for c in key):
            raise ValueError(f"cache key must be a hex sha256 digest, got {key!r}")
        return os.path.join(self.directory, key + ".txt")

    def get(self, key: str) -> CacheRecord | None:
        path = self._path(key)
        if not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
        header, _, body = raw.partition("\n\n")
        fields = {}
        for line in header.splitlines():
            name, _, value = line.partition(": ")
            fields[name] = value
        return CacheRecord(
            body=body,
            model_id=fields.get("model_id", ""),
            source=fields.get("source", ""),
            timestamp=fields.get("timestamp", ""),
        )

    def put(self, key: str, record: CacheRecord) -> None:
        path = self._path(key)
        stamp = record.timestamp or datetime.now(timezone.utc).isoformat()
        payload = (
            f"model_id: {record.model_id}\n"
            f"source: {record.source}\n"
            f"timestamp: {stamp}\n"
            f"\n"
            f"{record.body}"
        )
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)

    def __contains__(self, key: str) -> bool:
        return os.path.exists(self._path(key))

    def __len__(self) -> int:
        return sum(1 for n in os.listdir(self.directory) if n.endswith(".txt"))
