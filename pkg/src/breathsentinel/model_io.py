"""Binary model bundle: both networks plus training metadata in one file.

Layout (all integers unsigned 32-bit little-endian):

    magic "BSM1" (4 bytes)
    format version
    13 tensors in fixed order (encoder/decoder first, classifier after):
        rank, then one dim per rank, then values as IEEE-754 float32
        little-endian in row-major order
    metadata byte length, then that many bytes of UTF-8 "key=value"
    lines sorted by key

Values are stored as float32; loading widens them back to float64
exactly, so save -> load -> save reproduces the file byte for byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autoencoder, rnn
from .errors import BadMagic, TruncatedFile, VersionMismatch

MAGIC = b"BSM1"
FORMAT_VERSION = 1

TENSOR_ORDER = tuple(f"ae.{name}" for name in autoencoder.TENSOR_NAMES) \
    + tuple(f"rnn.{name}" for name in rnn.TENSOR_NAMES)


@dataclass
class ModelBundle:
    """A trained (or freshly initialized) model pair plus provenance strings."""

    ae: autoencoder.AEParams
    rnn: rnn.RNNParams
    metadata: dict[str, str] = field(default_factory=dict)

    def tensor(self, name: str) -> np.ndarray:
        prefix, attr = name.split(".", 1)
        return getattr(self.ae if prefix == "ae" else self.rnn, attr)


def save_model(bundle: ModelBundle, path) -> None:
    """Serialize a bundle; bit-identical for identical contents."""
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<I", FORMAT_VERSION)
    for name in TENSOR_ORDER:
        arr = np.ascontiguousarray(bundle.tensor(name), dtype="<f4")
        buf += struct.pack("<I", arr.ndim)
        for dim in arr.shape:
            buf += struct.pack("<I", dim)
        buf += arr.tobytes()
    for key, value in bundle.metadata.items():
        if "=" in key or "\n" in key or "\n" in value:
            raise ValueError(f"metadata entry {key!r} contains '=' or newline")
    meta = "".join(f"{k}={v}\n" for k, v in sorted(bundle.metadata.items())).encode("utf-8")
    buf += struct.pack("<I", len(meta))
    buf += meta
    Path(path).write_bytes(bytes(buf))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, context: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(f"file ended while reading {context} "
                                f"(needed {n} bytes at offset {self.pos})")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, context: str) -> int:
        return struct.unpack("<I", self.take(4, context))[0]


def load_model(path) -> ModelBundle:
    """Read a bundle back; tensors come out float64 with exact float32 values."""
    reader = _Reader(Path(path).read_bytes())
    magic = reader.take(4, "magic")
    if magic != MAGIC:
        raise BadMagic(f"{path}: magic {magic!r} is not {MAGIC!r}")
    version = reader.u32("format version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")

    tensors: dict[str, np.ndarray] = {}
    for name in TENSOR_ORDER:
        rank = reader.u32(f"tensor {name} rank")
        dims = [reader.u32(f"tensor {name} dims") for _ in range(rank)]
        count = 1
        for dim in dims:
            count *= dim
        raw = reader.take(4 * count, f"tensor {name} values")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).astype(np.float64)

    meta_len = reader.u32("metadata length")
    meta_raw = reader.take(meta_len, "metadata").decode("utf-8")
    metadata = {}
    for line in meta_raw.splitlines():
        key, _, value = line.partition("=")
        metadata[key] = value

    ae_params = autoencoder.AEParams.from_dict(
        {name.split(".", 1)[1]: arr for name, arr in tensors.items() if name.startswith("ae.")})
    rnn_params = rnn.RNNParams.from_dict(
        {name.split(".", 1)[1]: arr for name, arr in tensors.items() if name.startswith("rnn.")})
    return ModelBundle(ae=ae_params, rnn=rnn_params, metadata=metadata)
