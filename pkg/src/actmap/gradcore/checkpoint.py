"""Checkpoint container.

Layout::

    ACTMAP-CKPT
    version 1
    count <n>
    <name> <d0>x<d1>x... <f4|f8>    (one line per array; "scalar" for 0-d)
    end
    <payload>

The payload is the arrays in header order as little-endian float32 ("f4") or
float64 ("f8"). float64 arrays keep their precision; every other dtype is
stored as float32. A missing dtype token reads as "f4". Names
must not contain whitespace. Files are written to a temporary sibling and
renamed into place.
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = "ACTMAP-CKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _shape_token(shape: tuple[int, ...]) -> str:
    return "x".join(str(d) for d in shape) if shape else "scalar"


def _parse_shape(token: str) -> tuple[int, ...]:
    if token == "scalar":
        return ()
    return tuple(int(d) for d in token.split("x"))


def dumps(arrays: Mapping[str, np.ndarray]) -> bytes:
    lines = [MAGIC, f"version {VERSION}", f"count {len(arrays)}"]
    payload = []
    for name, arr in arrays.items():
        if not name or any(ch.isspace() for ch in name):
            raise CheckpointError(f"invalid array name {name!r}")
        a = np.asarray(arr)
        code = "f8" if a.dtype == np.float64 else "f4"
        lines.append(f"{name} {_shape_token(a.shape)} {code}")
        payload.append(np.ascontiguousarray(a, dtype="<" + code).tobytes())
    lines.append("end")
    return ("\n".join(lines) + "\n").encode("ascii") + b"".join(payload)


def loads(blob: bytes) -> dict[str, np.ndarray]:
    pos = 0
    header: list[str] = []
    while True:
        nl = blob.find(b"\n", pos)
        if nl < 0:
            raise CheckpointError("truncated header")
        line = blob[pos:nl].decode("ascii")
        pos = nl + 1
        if line == "end":
            break
        header.append(line)
    if not header or header[0] != MAGIC:
        raise CheckpointError("not an actmap checkpoint")
    version = int(header[1].split()[1])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    count = int(header[2].split()[1])
    entries = header[3:]
    if len(entries) != count:
        raise CheckpointError(f"header lists {len(entries)} arrays, count says {count}")
    out: dict[str, np.ndarray] = {}
    for line in entries:
        parts = line.split()
        if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] not in ("f4", "f8")):
            raise CheckpointError(f"malformed header line {line!r}")
        name, token = parts[:2]
        code = parts[2] if len(parts) == 3 else "f4"
        width = int(code[1])
        shape = _parse_shape(token)
        nbytes = width * int(np.prod(shape, dtype=np.int64))
        if pos + nbytes > len(blob):
            raise CheckpointError(f"payload truncated at {name!r}")
        out[name] = np.frombuffer(blob, dtype="<" + code, count=nbytes // width, offset=pos).reshape(shape).copy()
        pos += nbytes
    if pos != len(blob):
        raise CheckpointError(f"{len(blob) - pos} trailing bytes after payload")
    return out


def atomic_write_bytes(path: str | os.PathLike, blob: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save(path: str | os.PathLike, arrays: Mapping[str, np.ndarray]) -> None:
    atomic_write_bytes(path, dumps(arrays))


def load(path: str | os.PathLike) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())
