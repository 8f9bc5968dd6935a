"""Weight container: a length-prefixed JSON header followed by consecutive
little-endian float32 arrays in the order declared by the header.

Header layout on disk:

    uint32 (LE)  byte length of the JSON header
    JSON         {"kind": ..., "meta": {...}, "arrays": [{"name", "shape"}, ...]}
    float32[]    raw array data, concatenated in declared order

The same format carries generator weights, scorer anchors, and saved latents.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidConfig


def pack_container(kind: str, arrays: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    decls = []
    blobs = []
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f4")
        decls.append({"name": name, "shape": list(a.shape)})
        blobs.append(a.tobytes())
    header = json.dumps(
        {"kind": kind, "meta": meta or {}, "arrays": decls},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    return struct.pack("<I", len(header)) + header + b"".join(blobs)


def unpack_container(data: bytes) -> tuple[str, dict[str, np.ndarray], dict]:
    if len(data) < 4:
        raise InvalidConfig("container truncated")
    (hlen,) = struct.unpack("<I", data[:4])
    try:
        header = json.loads(data[4:4 + hlen].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as e:
        raise InvalidConfig(f"bad container header: {e}") from e
    arrays: dict[str, np.ndarray] = {}
    off = 4 + hlen
    for decl in header["arrays"]:
        shape = tuple(decl["shape"])
        n = int(np.prod(shape)) if shape else 1
        end = off + 4 * n
        if end > len(data):
            raise InvalidConfig("container payload truncated")
        arrays[decl["name"]] = np.frombuffer(data[off:end], dtype="<f4").reshape(shape).copy()
        off = end
    return header["kind"], arrays, header.get("meta", {})


def save_container(path: str | Path, kind: str, arrays: dict[str, np.ndarray],
                   meta: dict | None = None) -> None:
    Path(path).write_bytes(pack_container(kind, arrays, meta))


def load_container(path: str | Path) -> tuple[str, dict[str, np.ndarray], dict]:
    return unpack_container(Path(path).read_bytes())
