"""Self-describing parameter container.

Layout::

    POSE2IMU-CKPT <version> <sha256 of header line>\\n
    <header JSON>\\n
    <little-endian float32 blocks in declaration order>

The header lists every block's name and shape plus the payload digest.
"""
from __future__ import annotations

import hashlib
import json
from collections import OrderedDict

import numpy as np

MAGIC = b"POSE2IMU-CKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def pack(header: dict, arrays: "OrderedDict[str, np.ndarray]") -> bytes:
    blocks = []
    payload = bytearray()
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f4")
        blocks.append({"name": name, "shape": list(a.shape)})
        payload += a.tobytes()
    head = dict(header)
    head["blocks"] = blocks
    head["payload_sha256"] = hashlib.sha256(payload).hexdigest()
    hline = _dumps(head)
    first = MAGIC + b" %d " % VERSION + hashlib.sha256(hline).hexdigest().encode()
    return first + b"\n" + hline + b"\n" + bytes(payload)


def unpack(raw: bytes):
    """Return ``(header, arrays)``; raises CheckpointError on any inconsistency."""
    try:
        first, hline, payload = raw.split(b"\n", 2)
    except ValueError:
        raise CheckpointError("truncated checkpoint") from None
    parts = first.split(b" ")
    if len(parts) != 3 or parts[0] != MAGIC:
        raise CheckpointError("not a checkpoint file")
    if parts[1] != str(VERSION).encode():
        raise CheckpointError(f"unsupported checkpoint version {parts[1].decode(errors='replace')}")
    if hashlib.sha256(hline).hexdigest().encode() != parts[2]:
        raise CheckpointError("header digest mismatch")
    head = json.loads(hline)
    if hashlib.sha256(payload).hexdigest() != head.get("payload_sha256"):
        raise CheckpointError("payload digest mismatch")
    arrays = OrderedDict()
    off = 0
    for b in head["blocks"]:
        n = int(np.prod(b["shape"], dtype=np.int64)) * 4
        if off + n > len(payload):
            raise CheckpointError(f"block {b['name']} exceeds payload")
        arrays[b["name"]] = np.frombuffer(payload[off:off + n], dtype="<f4").reshape(b["shape"]).astype(np.float32)
        off += n
    if off != len(payload):
        raise CheckpointError("trailing bytes after last block")
    head = {k: v for k, v in head.items() if k not in ("blocks", "payload_sha256")}
    return head, arrays
