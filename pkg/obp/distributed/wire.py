"""
Wire encoding for messages between simulated nodes.

A frame is a big-endian u32 body length followed by the body. The body starts with a u8 tag:
``TERMS`` bodies carry a u32 record count, a u16 address width in bytes, then per record the
address big-endian in that width followed by the coefficient as an 8-byte big-endian IEEE-754
double; ``CONTROL`` bodies carry UTF-8 JSON.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from obp.pauli.core import PauliAddress

TAG_TERMS = 0
TAG_CONTROL = 1

_LENGTH = struct.Struct(">I")
_TERMS_HEADER = struct.Struct(">BIH")
_COEFF = np.dtype(">f8")


@dataclass(frozen=True)
class TermBatch:
    n: int
    items: tuple[tuple[PauliAddress, float], ...]

    def __len__(self) -> int:
        return len(self.items)


def address_width(n: int) -> int:
    return max(1, (2 * n + 7) // 8)


def _terms_body(batch: TermBatch) -> bytes:
    width = address_width(batch.n)
    coeffs = np.asarray([c for _, c in batch.items], dtype=_COEFF).tobytes()
    records = bytearray(_TERMS_HEADER.pack(TAG_TERMS, len(batch.items), width))
    for i, (address, _) in enumerate(batch.items):
        records += address.to_bytes(width, "big")
        records += coeffs[8 * i : 8 * i + 8]
    return bytes(records)


def encode(payload: TermBatch | dict | list) -> bytes:
    if isinstance(payload, TermBatch):
        body = _terms_body(payload)
    else:
        body = bytes([TAG_CONTROL]) + json.dumps(payload, sort_keys=True).encode()
    return _LENGTH.pack(len(body)) + body


def decode(frame: bytes, n: int) -> TermBatch | dict | list:
    (length,) = _LENGTH.unpack_from(frame)
    body = frame[_LENGTH.size :]
    if len(body) != length:
        raise ValueError(f"Frame declares {length} body bytes, got {len(body)}")
    if body[0] == TAG_CONTROL:
        return json.loads(body[1:].decode())
    tag, count, width = _TERMS_HEADER.unpack_from(body)
    if tag != TAG_TERMS or width != address_width(n):
        raise ValueError(f"Unexpected term frame (tag={tag}, width={width}) for n={n}")
    stride = width + 8
    records = body[_TERMS_HEADER.size :]
    if len(records) != count * stride:
        raise ValueError(f"Term frame holds {len(records)} bytes for {count} records")
    addresses = [int.from_bytes(records[i * stride : i * stride + width], "big") for i in range(count)]
    coeff_bytes = b"".join(records[i * stride + width : (i + 1) * stride] for i in range(count))
    coeffs = np.frombuffer(coeff_bytes, dtype=_COEFF).astype(float).tolist()
    return TermBatch(n, tuple(zip(addresses, coeffs, strict=True)))


def frame_size(payload: TermBatch | dict | list) -> int:
    """Encoded frame length in bytes, computed without building term frames."""
    if isinstance(payload, TermBatch):
        return _LENGTH.size + _TERMS_HEADER.size + len(payload.items) * (address_width(payload.n) + 8)
    return len(encode(payload))
