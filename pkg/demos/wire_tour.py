#!/usr/bin/env python3
# A look at the bytes that actually cross the network.

import numpy as np

from fedids import ColumnSchema, Dataset, GbdtParams, LabelMap, fit, serialize_model
from fedids.errors import ChecksumError
from fedids.federation import MSG_MODEL_UPDATE, ModelEnvelope, decode_frame, encode_frame

rng = np.random.default_rng(0)
labels = LabelMap.from_names(["a", "b"])
x = np.vstack([rng.normal(-2, 1, (50, 3)), rng.normal(2, 1, (50, 3))])
y = np.repeat([0, 1], 50)
model = fit(Dataset(x, y, ColumnSchema(), labels),
            GbdtParams(depth=2, iterations=5, learning_rate=0.5))

blob = serialize_model(model)
print(f"model payload: {len(blob)} bytes")

frame = encode_frame(ModelEnvelope(MSG_MODEL_UPDATE, device_id=1, round=1, payload=blob))
print(f"framed:        {len(frame)} bytes (23 header + payload + 4 checksum)")

# header hexdump: magic, version, type, device, round, length
print("header:", frame[:23].hex(" "))

env = decode_frame(frame)
assert env.payload == blob
print("decode ok:", env.msg_type, env.device_id, env.round)

# flip one payload bit and the checksum catches it
broken = bytearray(frame)
broken[40] ^= 0x01
try:
    decode_frame(bytes(broken))
except ChecksumError as err:
    print("corrupted frame rejected:", err)
