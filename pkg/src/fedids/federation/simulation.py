"""Round-based federated training: two edges, one server, models only.

Each round every edge tunes and fits on its private train split and ships
the serialized model to the server. The server waits for all updates
(barrier), trains its own member, forms the voting ensemble, scores it on
its private test split, and broadcasts the ensemble back. Training rows
never cross the wire — the transcript of every frame sent can be scanned
to prove it.

Stopping: after round r >= 2, if the server-test accuracy improved by
less than ``epsilon`` over round r-1, the run is converged; otherwise it
continues to ``max_rounds``. Identical inputs give identical reports and
an identical canonical transcript, whatever the transport.

The server and edge halves are also usable on their own (`_server_loop`
via the ``serve`` command, :func:`edge_client_rounds` via ``send-model``)
so the same protocol code runs in one process or across several.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field

import numpy as np

from ..dataio import Dataset, train_test_split
from ..errors import ConfigError, DataError
from ..gbdt import GbdtParams, GridSpec, grid_search, predict
from ..metrics import Scores, confusion, summarize
from .ensemble import SERVER_DEVICE_ID, EnsembleModel, ensemble_predict
from .transport import InProcessListener, TcpListener
from .wire import (
    MSG_ACK,
    MSG_GLOBAL_MODEL,
    MSG_MODEL_UPDATE,
    MSG_SHUTDOWN,
    ModelEnvelope,
    decode_frame,
    deserialize_ensemble,
    deserialize_model,
    encode_frame,
    serialize_ensemble,
    serialize_model,
)

STOP_MAX_ROUNDS = "max_rounds"
STOP_CONVERGED = "converged"

_SPLIT_TAG = 0
_GRID_TAG = 1


@dataclass(frozen=True)
class RoundConfig:
    max_rounds: int = 1
    epsilon: float = 0.0
    grid: GridSpec = field(default_factory=GridSpec)
    seed: int = 0
    train_fraction: float = 0.8

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ConfigError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.epsilon < 0.0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass(frozen=True)
class DeviceResult:
    device: str
    device_id: int
    scores: Scores
    params: GbdtParams

    def __post_init__(self):
        s = self.scores
        for name in ("accuracy", "precision", "recall"):
            v = getattr(s, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{self.device} {name} {v} outside [0, 1]")
        if not -1.0 <= s.kappa <= 1.0:
            raise DataError(f"{self.device} kappa {s.kappa} outside [-1, 1]")


@dataclass(frozen=True)
class RoundReport:
    round: int
    results: tuple[DeviceResult, ...]
    stop_reason: str  # "" on every round except the last

    def __post_init__(self):
        if self.round < 1:
            raise DataError("round index must be >= 1")
        if self.stop_reason not in ("", STOP_MAX_ROUNDS, STOP_CONVERGED):
            raise DataError(f"unknown stop_reason {self.stop_reason!r}")


def _derived_seed(seed: int, device_id: int, tag: int) -> int:
    return int(np.random.SeedSequence([seed, device_id, tag]).generate_state(1)[0])


def device_split_seed(seed: int, device_id: int) -> int:
    """Seed for a device's private train/test split.

    Public so a standalone server and edge client can reproduce exactly
    the splits the single-process simulation would use.
    """
    return _derived_seed(seed, device_id, _SPLIT_TAG)


def device_grid_seed(seed: int, device_id: int) -> int:
    """Seed for a device's hyperparameter search (see device_split_seed)."""
    return _derived_seed(seed, device_id, _GRID_TAG)


class _Recorder:
    """Thread-safe frame capture for the wire transcript."""

    def __init__(self):
        self._lock = threading.Lock()
        self._frames: list[tuple[int, int, int, bytes]] = []

    def record(self, env: ModelEnvelope, frame: bytes) -> None:
        with self._lock:
            self._frames.append((env.round, env.msg_type, env.device_id, frame))

    def transcript(self) -> bytes:
        """Frames in canonical (round, msg_type, device_id) order.

        Concurrent sends make capture order nondeterministic; the canonical
        sort restores a deterministic byte stream (frames sharing a key are
        byte-identical broadcasts, so their relative order cannot matter).
        """
        with self._lock:
            ordered = sorted(self._frames, key=lambda f: f[:3])
            return b"".join(frame for *_, frame in ordered)


def _send(conn, recorder, env: ModelEnvelope) -> None:
    frame = encode_frame(env)
    if recorder is not None:
        recorder.record(env, frame)
    conn.send(frame)


def _recv_envelope(conn, expect_type: int, expect_round: int) -> ModelEnvelope:
    frame = conn.recv()
    if frame is None:
        raise DataError("peer closed the connection mid-round")
    env = decode_frame(frame)
    if env.msg_type != expect_type:
        raise DataError(f"expected msg_type {expect_type}, got {env.msg_type}")
    if env.round != expect_round:
        raise DataError(f"expected round {expect_round}, got {env.round}")
    return env


def _local_scores(model, test: Dataset) -> Scores:
    pred = predict(model, test.features)
    return summarize(confusion(test.labels, pred, test.n_classes))


def edge_client_rounds(
    dialer,
    device_id: int,
    model_for_round,
    on_global=None,
    recorder=None,
    max_rounds=None,
) -> int:
    """Run the edge side of the exchange until the server says stop.

    Per round: dial, send this round's model bytes, receive the global
    ensemble, acknowledge, then either continue (peer closes cleanly) or
    stop (explicit shutdown frame). Returns the number of completed
    rounds. ``model_for_round(round_index)`` supplies the update payload;
    ``on_global(round_index, models, origins)`` sees each broadcast.
    """
    round_index = 1
    while True:
        conn = dialer.connect()
        try:
            _send(
                conn,
                recorder,
                ModelEnvelope(
                    msg_type=MSG_MODEL_UPDATE,
                    device_id=device_id,
                    round=round_index,
                    payload=model_for_round(round_index),
                ),
            )
            env = _recv_envelope(conn, MSG_GLOBAL_MODEL, round_index)
            members, origins = deserialize_ensemble(env.payload)
            if on_global is not None:
                on_global(round_index, members, origins)
            _send(
                conn,
                recorder,
                ModelEnvelope(msg_type=MSG_ACK, device_id=device_id, round=round_index),
            )
            tail = conn.recv()
        finally:
            conn.close()
        if tail is not None:
            env = decode_frame(tail)
            if env.msg_type != MSG_SHUTDOWN:
                raise DataError(f"expected shutdown, got msg_type {env.msg_type}")
            return round_index
        if max_rounds is not None and round_index >= max_rounds:
            return round_index
        round_index += 1


def _edge_loop(device_id, split, cfg, listener, recorder, out, errors):
    """One in-process edge device: tune, ship the model, note its scores."""
    try:
        grid_seed = _derived_seed(cfg.seed, device_id, _GRID_TAG)

        def model_for_round(round_index):
            params, model, _ = grid_search(split.train, cfg.grid, seed=grid_seed)
            out[(round_index, device_id)] = DeviceResult(
                device=f"edge{device_id}",
                device_id=device_id,
                scores=_local_scores(model, split.test),
                params=params,
            )
            return serialize_model(model)

        def check_global(round_index, members, origins):
            # reconstructing validates member compatibility and origins
            EnsembleModel(members=tuple(members), member_origins=tuple(origins))

        edge_client_rounds(
            listener,
            device_id,
            model_for_round,
            on_global=check_global,
            recorder=recorder,
            max_rounds=cfg.max_rounds,
        )
    except BaseException as exc:  # surfaced by the driver thread
        errors.append(exc)


def _server_collect_updates(listener, n_edges, round_index, errors):
    """Barrier: accept every edge's connection and decode its update."""
    results: dict[int, tuple] = {}
    lock = threading.Lock()

    def handle(conn):
        try:
            env = _recv_envelope(conn, MSG_MODEL_UPDATE, round_index)
            model = deserialize_model(env.payload)
            with lock:
                if env.device_id in results:
                    raise DataError(f"duplicate update from device {env.device_id}")
                results[env.device_id] = (conn, model)
        except BaseException as exc:
            errors.append(exc)
            conn.close()

    threads = []
    for _ in range(n_edges):
        try:
            conn = listener.accept()
        except TimeoutError:
            if errors:
                raise errors[0]
            raise
        t = threading.Thread(target=handle, args=(conn,), daemon=True)
        t.start()
        threads.append(t)
    for t in threads:
        t.join()
    return results


def _server_loop(listener, split, cfg, recorder, errors, n_edges=2):
    """Run every server round; returns (rows, final global ensemble).

    Each row is (round_index, Scores, chosen GbdtParams, stop_reason).
    """
    grid_seed = _derived_seed(cfg.seed, SERVER_DEVICE_ID, _GRID_TAG)
    rows = []
    final_model = None
    previous_accuracy = None
    for round_index in range(1, cfg.max_rounds + 1):
        updates = _server_collect_updates(listener, n_edges, round_index, errors)
        if errors:
            raise errors[0]
        server_params, server_model, _ = grid_search(
            split.train, cfg.grid, seed=grid_seed
        )
        edge_ids = sorted(updates)
        global_model = EnsembleModel(
            members=tuple(updates[d][1] for d in edge_ids) + (server_model,),
            member_origins=tuple(edge_ids) + (SERVER_DEVICE_ID,),
        )
        pred = ensemble_predict(global_model, split.test.features)
        scores = summarize(confusion(split.test.labels, pred, split.test.n_classes))

        stop_reason = ""
        if round_index == cfg.max_rounds:
            stop_reason = STOP_MAX_ROUNDS
        if (
            previous_accuracy is not None
            and scores.accuracy - previous_accuracy < cfg.epsilon
        ):
            stop_reason = STOP_CONVERGED
        previous_accuracy = scores.accuracy

        payload = serialize_ensemble(global_model.members, global_model.member_origins)
        for device_id in edge_ids:
            _send(
                updates[device_id][0],
                recorder,
                ModelEnvelope(
                    msg_type=MSG_GLOBAL_MODEL,
                    device_id=SERVER_DEVICE_ID,
                    round=round_index,
                    payload=payload,
                ),
            )
        for device_id in edge_ids:
            conn = updates[device_id][0]
            _recv_envelope(conn, MSG_ACK, round_index)
            if stop_reason:
                _send(
                    conn,
                    recorder,
                    ModelEnvelope(
                        msg_type=MSG_SHUTDOWN,
                        device_id=SERVER_DEVICE_ID,
                        round=round_index,
                    ),
                )
            conn.close()

        rows.append((round_index, scores, server_params, stop_reason))
        final_model = global_model
        if stop_reason:
            break
    return rows, final_model


def serve_rounds(
    listener,
    server_data: Dataset,
    cfg: RoundConfig,
    n_edges: int = 2,
    transcript_path=None,
    final_models_dir=None,
):
    """Run only the server half against already-listening ``listener``.

    The edges live elsewhere (other processes, other machines). Returns
    the per-round rows (round_index, Scores, GbdtParams, stop_reason).
    """
    if n_edges < 1:
        raise ConfigError(f"need at least one edge, got {n_edges}")
    if server_data.n_rows == 0:
        raise DataError("server dataset is empty")
    split = train_test_split(
        server_data,
        cfg.train_fraction,
        seed=device_split_seed(cfg.seed, SERVER_DEVICE_ID),
    )
    recorder = _Recorder() if transcript_path is not None else None
    errors: list[BaseException] = []
    rows, final_model = _server_loop(listener, split, cfg, recorder, errors, n_edges)
    if errors:
        raise errors[0]
    if transcript_path is not None:
        with open(transcript_path, "wb") as fh:
            fh.write(recorder.transcript())
    if final_models_dir is not None:
        write_final_models(final_models_dir, final_model)
    return rows


def write_final_models(directory, ensemble: EnsembleModel) -> None:
    """Drop each member and the full voting bundle into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    for model, origin in zip(ensemble.members, ensemble.member_origins):
        name = "server" if origin == SERVER_DEVICE_ID else f"edge{origin}"
        with open(os.path.join(directory, f"{name}.model"), "wb") as fh:
            fh.write(serialize_model(model))
    with open(os.path.join(directory, "ensemble.bin"), "wb") as fh:
        fh.write(serialize_ensemble(ensemble.members, ensemble.member_origins))


def run_federated_simulation(
    partitions: list[Dataset],
    cfg: RoundConfig,
    transport: str = "inprocess",
    transcript_path=None,
    final_models_dir=None,
) -> list[RoundReport]:
    """Drive the full multi-round exchange and return per-round reports.

    ``partitions`` is (edge1, edge2, server); each is split 80:20 into
    private train/test once up front. Device rows in every report are
    ordered edge1, edge2, server. If ``transcript_path`` is given, every
    frame sent by anyone is written there in canonical order; if
    ``final_models_dir`` is given, the last round's members land there.
    """
    if len(partitions) != 3:
        raise DataError(f"need exactly 3 partitions, got {len(partitions)}")
    for i, part in enumerate(partitions):
        if part.n_rows == 0:
            raise DataError(f"partition {i} is empty")
    if transport == "inprocess":
        listener = InProcessListener()
    elif transport == "tcp":
        listener = TcpListener()
    else:
        raise ConfigError(f"unknown transport {transport!r}")

    edge_ids = (1, 2)
    by_device = {1: partitions[0], 2: partitions[1], SERVER_DEVICE_ID: partitions[2]}
    splits = {
        device_id: train_test_split(
            part, cfg.train_fraction, seed=_derived_seed(cfg.seed, device_id, _SPLIT_TAG)
        )
        for device_id, part in by_device.items()
    }

    recorder = _Recorder()
    edge_results: dict[tuple[int, int], DeviceResult] = {}
    errors: list[BaseException] = []
    threads = [
        threading.Thread(
            target=_edge_loop,
            args=(device_id, splits[device_id], cfg, listener, recorder, edge_results, errors),
            daemon=True,
        )
        for device_id in edge_ids
    ]
    for t in threads:
        t.start()

    try:
        server_rows, final_model = _server_loop(
            listener, splits[SERVER_DEVICE_ID], cfg, recorder, errors, len(edge_ids)
        )
        for t in threads:
            t.join(timeout=60.0)
        if errors:
            raise errors[0]
    finally:
        listener.close()

    reports = []
    for round_index, scores, server_params, stop_reason in server_rows:
        results = tuple(
            edge_results[(round_index, d)] for d in edge_ids
        ) + (
            DeviceResult(
                device="server",
                device_id=SERVER_DEVICE_ID,
                scores=scores,
                params=server_params,
            ),
        )
        reports.append(
            RoundReport(round=round_index, results=results, stop_reason=stop_reason)
        )

    if transcript_path is not None:
        with open(transcript_path, "wb") as fh:
            fh.write(recorder.transcript())
    if final_models_dir is not None:
        write_final_models(final_models_dir, final_model)
    return reports


def simulation_transcript(
    partitions: list[Dataset], cfg: RoundConfig, transport: str = "inprocess"
) -> tuple[list[RoundReport], bytes]:
    """Run a simulation and return (reports, canonical transcript bytes)."""
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "transcript.bin"
        reports = run_federated_simulation(
            partitions, cfg, transport=transport, transcript_path=path
        )
        return reports, path.read_bytes()
