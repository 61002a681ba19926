"""Model-only federation: wire format, voting ensemble, transports, rounds."""

from .ensemble import (
    SERVER_DEVICE_ID,
    VOTE_RULE,
    EnsembleModel,
    build_ensemble,
    ensemble_predict,
)
from .simulation import (
    STOP_CONVERGED,
    STOP_MAX_ROUNDS,
    DeviceResult,
    RoundConfig,
    RoundReport,
    device_grid_seed,
    device_split_seed,
    edge_client_rounds,
    run_federated_simulation,
    serve_rounds,
    simulation_transcript,
    write_final_models,
)
from .transport import (
    InProcessListener,
    QueueConnection,
    TcpConnection,
    TcpDialer,
    TcpListener,
)
from .wire import (
    ENSEMBLE_MAGIC,
    HEADER_SIZE,
    MAGIC,
    MSG_ACK,
    MSG_GLOBAL_MODEL,
    MSG_MODEL_UPDATE,
    MSG_SHUTDOWN,
    VERSION,
    ModelEnvelope,
    decode_frame,
    deserialize_ensemble,
    deserialize_model,
    encode_frame,
    frame_length,
    serialize_ensemble,
    serialize_model,
)

__all__ = [
    "SERVER_DEVICE_ID",
    "VOTE_RULE",
    "EnsembleModel",
    "build_ensemble",
    "ensemble_predict",
    "STOP_CONVERGED",
    "STOP_MAX_ROUNDS",
    "DeviceResult",
    "RoundConfig",
    "RoundReport",
    "device_grid_seed",
    "device_split_seed",
    "edge_client_rounds",
    "run_federated_simulation",
    "serve_rounds",
    "simulation_transcript",
    "write_final_models",
    "InProcessListener",
    "QueueConnection",
    "TcpConnection",
    "TcpDialer",
    "TcpListener",
    "ENSEMBLE_MAGIC",
    "HEADER_SIZE",
    "MAGIC",
    "MSG_ACK",
    "MSG_GLOBAL_MODEL",
    "MSG_MODEL_UPDATE",
    "MSG_SHUTDOWN",
    "VERSION",
    "ModelEnvelope",
    "decode_frame",
    "deserialize_ensemble",
    "deserialize_model",
    "encode_frame",
    "frame_length",
    "serialize_ensemble",
    "serialize_model",
]
