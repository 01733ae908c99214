"""Fixed 768-dimensional text embeddings, local or remote.

The local encoder hashes lowercase character n-grams (n in 3..5) into 768
signed buckets with FNV-1a and L2-normalizes the result; it needs no
network and is fully deterministic.  The remote encoder posts the text
(truncated to its first 256 whitespace tokens) to an embeddings endpoint.
Both produce unit-norm vectors of exactly 768 dimensions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._http import post_with_retries, require_api_key
from .cache import CacheRecord, TextCache, text_key
from .errors import (
    DataError,
    EmptyTextError,
    MalformedResponseError,
    WrongDimensionError,
)

EMBED_DIM = 768
LOCAL_ENCODER_ID = "hashed-ngram-v1"
MAX_REMOTE_TOKENS = 256

_NGRAM_SIZES = (3, 4, 5)
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF


@dataclass
class EmbedConfig:
    """Remote encoder settings; ``endpoint`` of None selects the local
    hashed n-gram encoder."""

    endpoint: str | None = None
    model_id: str = "roberta-base"
    api_key_env: str = "DRIVESTYLE_API_KEY"
    timeout_s: float = 30.0
    max_attempts: int = 3
    backoff_s: float = 1.0


@dataclass
class TextEmbedding:
    values: np.ndarray  # [768] float64
    encoder_id: str
    cached: bool = False


def _fnv1a(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _FNV_MASK
    return h


def _require_text(text: str) -> str:
    if not text or not text.strip():
        raise EmptyTextError()
    return text


def embed_local(text: str) -> np.ndarray:
    """Hash character n-grams of the lowercased text into a unit vector.

    Each n-gram lands in bucket ``fnv1a(gram) % 768`` with sign given by
    the parity of the hash's set bits.  Texts too short to produce any
    n-gram fall back to hashing the whole text as a single gram.
    """
    text = _require_text(text).lower()
    vec = np.zeros(EMBED_DIM, dtype=np.float64)
    grams = 0
    for n in _NGRAM_SIZES:
        for start in range(len(text) - n + 1):
            h = _fnv1a(text[start : start + n].encode("utf-8"))
            sign = 1.0 if (h.bit_count() & 1) == 0 else -1.0
            vec[h % EMBED_DIM] += sign
            grams += 1
    if grams == 0:
        h = _fnv1a(text.encode("utf-8"))
        vec[h % EMBED_DIM] = 1.0 if (h.bit_count() & 1) == 0 else -1.0
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        # pathological cancellation: fall back to a one-hot on the full text
        h = _fnv1a(text.encode("utf-8"))
        vec[:] = 0.0
        vec[h % EMBED_DIM] = 1.0
        norm = 1.0
    return vec / norm


def truncate_tokens(text: str, max_tokens: int = MAX_REMOTE_TOKENS) -> str:
    """Keep only the first ``max_tokens`` whitespace-separated tokens."""
    tokens = text.split()
    if len(tokens) <= max_tokens:
        return text
    return " ".join(tokens[:max_tokens])


def embed_remote(text: str, config: EmbedConfig, session=None, sleep=None) -> np.ndarray:
    """Fetch one embedding from a remote endpoint and validate its width."""
    text = truncate_tokens(_require_text(text))
    api_key = require_api_key(config.api_key_env)
    payload = {"model": config.model_id, "input": text}
    body = post_with_retries(
        url=config.endpoint,
        payload=payload,
        api_key=api_key,
        timeout_s=config.timeout_s,
        max_attempts=config.max_attempts,
        backoff_s=config.backoff_s,
        session=session,
        sleep=sleep,
    )
    try:
        values = body["data"][0]["embedding"]
    except (KeyError, IndexError, TypeError):
        raise MalformedResponseError("response missing data[0].embedding") from None
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != EMBED_DIM:
        raise WrongDimensionError(EMBED_DIM, int(arr.size))
    if not np.all(np.isfinite(arr)):
        raise MalformedResponseError("embedding contains non-finite values")
    return arr


def embedding_cache_key(text: str, model_id: str) -> str:
    return text_key("embedding-v1", text, model_id)


def embed_text(
    text: str,
    config: EmbedConfig | None = None,
    cache: TextCache | None = None,
    session=None,
    sleep=None,
) -> TextEmbedding:
    """Embed one text, consulting the cache first."""
    if config is None:
        config = EmbedConfig()
    remote = bool(config.endpoint)
    encoder_id = config.model_id if remote else LOCAL_ENCODER_ID
    key = embedding_cache_key(text, encoder_id)
    if cache is not None:
        record = cache.get(key)
        if record is not None:
            arr = np.asarray(json.loads(record.body), dtype=np.float64)
            if arr.shape[0] != EMBED_DIM:
                raise WrongDimensionError(EMBED_DIM, int(arr.size))
            return TextEmbedding(values=arr, encoder_id=record.model_id, cached=True)
    if remote:
        arr = embed_remote(text, config, session, sleep)
        source = "remote"
    else:
        arr = embed_local(text)
        source = "local"
    if cache is not None:
        body = json.dumps([float(v) for v in arr])
        cache.put(key, CacheRecord(body=body, model_id=encoder_id, source=source))
    return TextEmbedding(values=arr, encoder_id=encoder_id, cached=False)


def embed_batch(
    texts: list[str],
    config: EmbedConfig | None = None,
    cache: TextCache | None = None,
    session=None,
    sleep=None,
) -> np.ndarray:
    """Embed many texts into an ``[n, 768]`` matrix."""
    rows = [embed_text(t, config, cache, session, sleep).values for t in texts]
    if not rows:
        return np.empty((0, EMBED_DIM))
    return np.stack(rows)


def save_embeddings(path: str, ids: list[str], matrix: np.ndarray, encoder_id: str) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != EMBED_DIM:
        raise WrongDimensionError(EMBED_DIM, int(matrix.shape[-1]) if matrix.ndim else 0)
    np.savez(
        path,
        ids=np.array(ids, dtype=object),
        matrix=matrix,
        encoder_id=np.array(encoder_id),
    )


def load_embeddings(path: str):
    """Returns ``(ids, matrix, encoder_id)`` saved by :func:`save_embeddings`."""
    try:
        archive = np.load(path, allow_pickle=True)
    except OSError as err:
        raise DataError(f"cannot read embeddings file {path}: {err}") from None
    with archive as data:
        try:
            ids = [str(v) for v in data["ids"]]
            matrix = np.asarray(data["matrix"], dtype=np.float64)
            encoder_id = str(data["encoder_id"])
        except KeyError as err:
            raise DataError(f"embeddings file {path} lacks array {err}") from None
    if matrix.ndim != 2 or matrix.shape[1] != EMBED_DIM:
        raise WrongDimensionError(EMBED_DIM, int(matrix.shape[-1]) if matrix.ndim else 0)
    return ids, matrix, encoder_id
