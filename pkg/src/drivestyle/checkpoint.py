"""Single-file binary checkpoints.

Layout: an 8-byte magic, a little-endian uint64 header length, a UTF-8
JSON header, then the raw tensor payload.  The header records the format
version, the model config and its fingerprint, the parameter count, the
tensor manifest (name, shape, dtype) in payload order, optional
normalization statistics and free-form metadata.  Tensors are serialized
as little-endian float64, so save followed by load is bitwise exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptCheckpointError, FingerprintMismatchError, VersionMismatchError
from .features import NormStats
from .model import ModelConfig, ModelNet, param_count

MAGIC = b"DSCKPT01"
FORMAT_VERSION = 1
_TENSOR_DTYPE = "<f8"


@dataclass
class Checkpoint:
    config: ModelConfig
    state: dict[str, np.ndarray]
    norm_stats: NormStats | None = None
    meta: dict = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return self.config.fingerprint()

    def build_net(self, seed: int = 0) -> ModelNet:
        net = ModelNet(self.config, seed=seed)
        net.load_state(self.state)
        return net


def save_checkpoint(path: str, checkpoint: Checkpoint) -> None:
    names = sorted(checkpoint.state)
    manifest = [
        {
            "name": name,
            "shape": list(checkpoint.state[name].shape),
            "dtype": _TENSOR_DTYPE,
        }
        for name in names
    ]
    norm = None
    if checkpoint.norm_stats is not None:
        norm = {
            "names": list(checkpoint.norm_stats.names),
            "mean": [float(v) for v in checkpoint.norm_stats.mean],
            "std": [float(v) for v in checkpoint.norm_stats.std],
        }
    header = {
        "format_version": FORMAT_VERSION,
        "config": checkpoint.config.as_dict(),
        "fingerprint": checkpoint.fingerprint,
        "param_count": param_count(checkpoint.config),
        "tensors": manifest,
        "norm_stats": norm,
        "meta": checkpoint.meta,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for name in names:
            fh.write(np.ascontiguousarray(checkpoint.state[name], dtype=_TENSOR_DTYPE).tobytes())


def load_checkpoint(path: str) -> Checkpoint:
    """Read and validate a checkpoint.

    Raises :class:`CorruptCheckpointError` for truncated or mangled files,
    :class:`VersionMismatchError` for unknown format versions and
    :class:`FingerprintMismatchError` when the stored fingerprint does not
    match the stored config.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as err:
        raise CorruptCheckpointError(f"cannot read {path}: {err}") from None
    if len(blob) < len(MAGIC) + 8 or blob[: len(MAGIC)] != MAGIC:
        raise CorruptCheckpointError("bad magic or truncated header")
    (header_len,) = struct.unpack_from("<Q", blob, len(MAGIC))
    header_start = len(MAGIC) + 8
    header_end = header_start + header_len
    if len(blob) < header_end:
        raise CorruptCheckpointError("truncated before end of header")
    try:
        header = json.loads(blob[header_start:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CorruptCheckpointError(f"unreadable header: {err}") from None
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(version, FORMAT_VERSION)
    config = ModelConfig.from_dict(header["config"])
    if config.fingerprint() != header.get("fingerprint"):
        raise FingerprintMismatchError(header.get("fingerprint", ""), config.fingerprint())

    state: dict[str, np.ndarray] = {}
    offset = header_end
    for entry in header["tensors"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * np.dtype(entry["dtype"]).itemsize
        if offset + nbytes > len(blob):
            raise CorruptCheckpointError(f"payload truncated at tensor {entry['name']}")
        arr = np.frombuffer(blob[offset : offset + nbytes], dtype=entry["dtype"]).reshape(shape)
        state[entry["name"]] = arr.copy()
        offset += nbytes
    if offset != len(blob):
        raise CorruptCheckpointError("trailing bytes after payload")

    norm = header.get("norm_stats")
    norm_stats = None
    if norm is not None:
        norm_stats = NormStats(
            names=tuple(norm["names"]),
            mean=np.array(norm["mean"], dtype=np.float64),
            std=np.array(norm["std"], dtype=np.float64),
        )
    return Checkpoint(
        config=config, state=state, norm_stats=norm_stats, meta=header.get("meta", {})
    )
