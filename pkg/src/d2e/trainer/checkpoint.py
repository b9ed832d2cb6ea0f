"""Binary checkpoint format.

Layout (little-endian throughout):

  magic "D2E1" | version u32 | config-hash 32 bytes | array count u32
  per array: name-length u32, name utf8, ndim u32, dims u64 each, float64 data
  trailing checksum u64 = first 8 bytes of SHA-256 over everything before it

Everything that affects a run round-trips as named float64 arrays, so a
restore continues bit-identically.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from ..errors import CorruptCheckpoint, VersionMismatch

MAGIC = b"D2E1"
VERSION = 1


def config_hash(text: str) -> bytes:
    return hashlib.sha256(text.encode()).digest()


def save_checkpoint(path: str, arrays: dict[str, np.ndarray], cfg_hash: bytes) -> None:
    if len(cfg_hash) != 32:
        raise ValueError("config hash must be 32 bytes")
    chunks = [MAGIC, struct.pack("<I", VERSION), cfg_hash, struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim:  # ascontiguousarray would promote 0-d to 1-d
            a = np.ascontiguousarray(a)
        nb = name.encode()
        chunks.append(struct.pack("<I", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<I", a.ndim))
        for d in a.shape:
            chunks.append(struct.pack("<Q", d))
        chunks.append(a.astype("<f8").tobytes())
    body = b"".join(chunks)
    checksum = hashlib.sha256(body).digest()[:8]
    with open(path, "wb") as f:
        f.write(body + checksum)


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], bytes]:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 4 + 4 + 32 + 4 + 8:
        raise CorruptCheckpoint("file too short")
    body, checksum = blob[:-8], blob[-8:]
    if hashlib.sha256(body).digest()[:8] != checksum:
        raise CorruptCheckpoint("checksum mismatch")
    if body[:4] != MAGIC:
        raise CorruptCheckpoint("bad magic")
    (version,) = struct.unpack("<I", body[4:8])
    if version != VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {VERSION}")
    cfg_hash = body[8:40]
    (count,) = struct.unpack("<I", body[40:44])
    pos = 44
    arrays: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", body, pos)
            pos += 4
            name = body[pos : pos + nlen].decode()
            pos += nlen
            (ndim,) = struct.unpack_from("<I", body, pos)
            pos += 4
            shape = []
            for _ in range(ndim):
                (d,) = struct.unpack_from("<Q", body, pos)
                pos += 8
                shape.append(d)
            n = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(body, dtype="<f8", count=n, offset=pos).reshape(shape)
            pos += 8 * n
            arrays[name] = np.array(arr)
    except (struct.error, ValueError) as exc:
        raise CorruptCheckpoint(f"truncated structure: {exc}") from exc
    if pos != len(body):
        raise CorruptCheckpoint("trailing bytes after declared arrays")
    return arrays, cfg_hash


def pack_rng_state(state: tuple[int, int]) -> np.ndarray:
    """(128-bit key, counter) as five exactly-representable float64 words."""
    key, counter = state
    words = [(key >> (32 * i)) & 0xFFFFFFFF for i in range(4)]
    return np.array([float(w) for w in words] + [float(counter)])


def unpack_rng_state(arr: np.ndarray) -> tuple[int, int]:
    key = 0
    for i in range(4):
        key |= int(arr[i]) << (32 * i)
    return key, int(arr[4])
