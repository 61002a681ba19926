"""Binary wire format: message envelopes and model payload encodings.

Everything on the wire is big-endian. A frame is:

    magic "FIDS" | version u16 | msg_type u8 | device_id u32 | round u32
    | payload_len u64 | payload | crc32 u32 (over payload only)

Model payloads carry no training data, only model parameters: that is the
whole point of the exchange. The model encoding is canonical (pre-order
node records, fixed field order), so equal models serialize to identical
bytes and byte equality is model equality.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from ..errors import (
    ChecksumError,
    ConfigError,
    DataError,
    MagicError,
    TagError,
    TruncatedError,
    VersionError,
    WireError,
)
from ..gbdt import GbdtModel, GbdtParams, RegressionTree

MAGIC = b"FIDS"
VERSION = 1

MSG_MODEL_UPDATE = 1
MSG_GLOBAL_MODEL = 2
MSG_ACK = 3
MSG_SHUTDOWN = 4
_VALID_TYPES = (MSG_MODEL_UPDATE, MSG_GLOBAL_MODEL, MSG_ACK, MSG_SHUTDOWN)

_HEADER = struct.Struct(">4sHBIIQ")  # 23 bytes
_CRC = struct.Struct(">I")
_U32_MAX = 2**32 - 1

ENSEMBLE_MAGIC = b"FENS"


@dataclass(frozen=True)
class ModelEnvelope:
    """One protocol message; payload semantics depend on msg_type."""

    msg_type: int
    device_id: int
    round: int
    payload: bytes = b""
    version: int = VERSION

    def __post_init__(self):
        if self.msg_type not in _VALID_TYPES:
            raise ConfigError(f"unknown msg_type {self.msg_type}")
        for name in ("device_id", "round"):
            v = getattr(self, name)
            if not 0 <= v <= _U32_MAX:
                raise ConfigError(f"{name} must fit in u32, got {v}")
        if self.msg_type in (MSG_ACK, MSG_SHUTDOWN) and self.payload:
            raise DataError("ack/shutdown frames carry no payload")


def encode_frame(env: ModelEnvelope) -> bytes:
    head = _HEADER.pack(
        MAGIC, env.version, env.msg_type, env.device_id, env.round, len(env.payload)
    )
    return head + env.payload + _CRC.pack(zlib.crc32(env.payload))


def decode_frame(buf: bytes) -> ModelEnvelope:
    """Parse exactly one frame; every malformation gets a distinct error."""
    if len(buf) < _HEADER.size:
        raise TruncatedError(f"frame header needs {_HEADER.size} bytes, got {len(buf)}")
    magic, version, msg_type, device_id, round_, payload_len = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise MagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionError(f"unsupported protocol version {version}")
    if msg_type not in _VALID_TYPES:
        raise TagError(f"unknown msg_type {msg_type}")
    need = _HEADER.size + payload_len + _CRC.size
    if len(buf) < need:
        raise TruncatedError(f"frame needs {need} bytes, got {len(buf)}")
    if len(buf) > need:
        raise WireError(f"{len(buf) - need} trailing bytes after frame")
    payload = buf[_HEADER.size : _HEADER.size + payload_len]
    (crc,) = _CRC.unpack_from(buf, need - _CRC.size)
    if crc != zlib.crc32(payload):
        raise ChecksumError("payload crc32 mismatch")
    return ModelEnvelope(
        msg_type=msg_type, device_id=device_id, round=round_, payload=payload
    )


def frame_length(header: bytes) -> int:
    """Total frame size implied by a 23-byte header (for stream readers)."""
    if len(header) < _HEADER.size:
        raise TruncatedError("incomplete frame header")
    payload_len = _HEADER.unpack_from(header)[5]
    return _HEADER.size + payload_len + _CRC.size


HEADER_SIZE = _HEADER.size


# ---------------------------------------------------------------------------
# model payload

_MODEL_HEADER = struct.Struct(">IIIIddQ")  # K, D, depth, tree rows, lr, l2, seed
_NODE_INTERNAL = struct.Struct(">BId")
_NODE_LEAF = struct.Struct(">Bd")
_TAG_INTERNAL = 0
_TAG_LEAF = 1


def _write_tree(tree: RegressionTree, out: bytearray):
    def walk(i: int):
        if tree.feature[i] < 0:
            out.extend(_NODE_LEAF.pack(_TAG_LEAF, float(tree.value[i])))
        else:
            out.extend(
                _NODE_INTERNAL.pack(
                    _TAG_INTERNAL, int(tree.feature[i]), float(tree.threshold[i])
                )
            )
            walk(int(tree.left[i]))
            walk(int(tree.right[i]))

    walk(0)


def serialize_model(model: GbdtModel) -> bytes:
    """Canonical byte encoding; equal models produce identical bytes."""
    out = bytearray()
    out += _MODEL_HEADER.pack(
        model.n_classes,
        model.n_features,
        model.params.depth,
        model.n_iterations,
        model.params.learning_rate,
        model.params.l2_leaf_reg,
        model.params.seed,
    )
    out += struct.pack(f">{model.n_classes}d", *model.base_scores)
    for row in model.trees:
        for tree in row:
            _write_tree(tree, out)
    return bytes(out)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, fmt: struct.Struct):
        end = self.pos + fmt.size
        if end > len(self.buf):
            raise TruncatedError(
                f"needed {fmt.size} bytes at offset {self.pos}, have {len(self.buf) - self.pos}"
            )
        values = fmt.unpack_from(self.buf, self.pos)
        self.pos = end
        return values

    def take_raw(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise TruncatedError(
                f"needed {n} bytes at offset {self.pos}, have {len(self.buf) - self.pos}"
            )
        chunk = self.buf[self.pos : end]
        self.pos = end
        return chunk

    def done(self):
        if self.pos != len(self.buf):
            raise WireError(f"{len(self.buf) - self.pos} trailing bytes")


_U8 = struct.Struct(">B")
_U32D = struct.Struct(">Id")
_F64 = struct.Struct(">d")


def _read_tree(reader: _Reader) -> RegressionTree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    # explicit stack of (parent index, is_right_child) slots, iterative so a
    # hostile left-spine chain cannot blow the recursion limit
    pending: list[tuple[int, bool]] = [(-1, False)]
    while pending:
        parent, is_right = pending.pop()
        idx = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = idx
        (tag,) = reader.take(_U8)
        if tag == _TAG_LEAF:
            (v,) = reader.take(_F64)
            feature.append(-1)
            threshold.append(0.0)
            left.append(idx)
            right.append(idx)
            value.append(v)
        elif tag == _TAG_INTERNAL:
            feat, thr = reader.take(_U32D)
            if feat >= 1 << 31:
                raise WireError(f"feature index {feat} out of range")
            feature.append(feat)
            threshold.append(thr)
            left.append(0)
            right.append(0)
            value.append(0.0)
            pending.append((idx, True))
            pending.append((idx, False))  # left child parses first (pre-order)
        else:
            raise TagError(f"unknown node tag {tag}")
    return RegressionTree(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        value=np.array(value, dtype=np.float64),
    )


def deserialize_model(buf: bytes) -> GbdtModel:
    """Inverse of :func:`serialize_model`; rejects malformed bytes."""
    reader = _Reader(buf)
    k, d, depth, rows, lr, l2, seed = reader.take(_MODEL_HEADER)
    if k < 1 or d < 1:
        raise WireError(f"model header claims {k} classes, {d} features")
    base = np.array(struct.unpack_from(f">{k}d", reader.take_raw(8 * k)), dtype=np.float64)
    trees = tuple(
        tuple(_read_tree(reader) for _ in range(k)) for _ in range(rows)
    )
    reader.done()
    try:
        params = GbdtParams(
            depth=depth,
            iterations=max(rows, 1),
            learning_rate=lr,
            l2_leaf_reg=l2,
            seed=seed,
        )
        return GbdtModel(
            params=params, n_classes=k, n_features=d, trees=trees, base_scores=base
        )
    except ConfigError as exc:
        raise WireError(f"model fields out of range: {exc}") from exc


# ---------------------------------------------------------------------------
# ensemble payload

_ENS_HEADER = struct.Struct(">4sI")
_ENS_MEMBER = struct.Struct(">IQ")


def serialize_ensemble(members, origins) -> bytes:
    """Encode (member model, origin device id) pairs behind a FENS header."""
    members = list(members)
    origins = list(origins)
    if len(members) != len(origins) or not members:
        raise DataError("need one origin per member and at least one member")
    out = bytearray(_ENS_HEADER.pack(ENSEMBLE_MAGIC, len(members)))
    for model, origin in zip(members, origins):
        blob = serialize_model(model)
        out += _ENS_MEMBER.pack(origin, len(blob))
        out += blob
    return bytes(out)


def deserialize_ensemble(buf: bytes) -> tuple[list[GbdtModel], list[int]]:
    reader = _Reader(buf)
    magic, count = reader.take(_ENS_HEADER)
    if magic != ENSEMBLE_MAGIC:
        raise MagicError(f"bad ensemble magic {magic!r}")
    if count < 1:
        raise WireError("ensemble must carry at least one member")
    members: list[GbdtModel] = []
    origins: list[int] = []
    for _ in range(count):
        origin, length = reader.take(_ENS_MEMBER)
        members.append(deserialize_model(reader.take_raw(length)))
        origins.append(origin)
    reader.done()
    return members, origins
