"""Frame transports: in-process queue pairs and length-framed TCP.

Both carry the exact same frame bytes; the only difference is the pipe.
A connection is a blocking duplex channel moving one whole frame per
send/recv. recv returns None on a clean close (frame boundary); a close
mid-frame raises TruncatedError.
"""

from __future__ import annotations

import queue
import socket

from ..errors import TruncatedError
from .wire import HEADER_SIZE, frame_length

_DEFAULT_TIMEOUT = 60.0


class QueueConnection:
    """One side of an in-process duplex channel."""

    def __init__(self, send_q: queue.Queue, recv_q: queue.Queue, timeout: float):
        self._send_q = send_q
        self._recv_q = recv_q
        self._timeout = timeout
        self._peer_closed = False
        self._closed = False

    def send(self, frame: bytes) -> None:
        if self._closed:
            raise OSError("connection is closed")
        self._send_q.put(bytes(frame))

    def recv(self) -> bytes | None:
        if self._peer_closed:
            return None
        try:
            frame = self._recv_q.get(timeout=self._timeout)
        except queue.Empty:
            raise TimeoutError("timed out waiting for a frame") from None
        if frame is None:
            self._peer_closed = True
            return None
        return frame

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._send_q.put(None)


class InProcessListener:
    """Rendezvous point handing out paired queue connections."""

    def __init__(self, timeout: float = _DEFAULT_TIMEOUT):
        self._timeout = timeout
        self._pending: queue.Queue = queue.Queue()

    def connect(self) -> QueueConnection:
        a_to_b: queue.Queue = queue.Queue()
        b_to_a: queue.Queue = queue.Queue()
        self._pending.put(QueueConnection(b_to_a, a_to_b, self._timeout))
        return QueueConnection(a_to_b, b_to_a, self._timeout)

    def accept(self) -> QueueConnection:
        try:
            return self._pending.get(timeout=self._timeout)
        except queue.Empty:
            raise TimeoutError("timed out waiting for a connection") from None

    def close(self) -> None:
        pass


class TcpConnection:
    def __init__(self, sock: socket.socket, timeout: float = _DEFAULT_TIMEOUT):
        sock.settimeout(timeout)
        self._sock = sock

    def send(self, frame: bytes) -> None:
        self._sock.sendall(frame)

    def _read_exact(self, n: int, at_boundary: bool) -> bytes | None:
        chunks = []
        got = 0
        while got < n:
            chunk = self._sock.recv(n - got)
            if not chunk:
                if at_boundary and got == 0:
                    return None
                raise TruncatedError(f"connection closed mid-frame ({got}/{n} bytes)")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def recv(self) -> bytes | None:
        header = self._read_exact(HEADER_SIZE, at_boundary=True)
        if header is None:
            return None
        rest = self._read_exact(frame_length(header) - HEADER_SIZE, at_boundary=False)
        return header + rest

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_WR)
        except OSError:
            pass
        self._sock.close()


class TcpDialer:
    """Client-side connector for a server listening elsewhere."""

    def __init__(self, host: str, port: int, timeout: float = _DEFAULT_TIMEOUT):
        self.host = host
        self.port = port
        self._timeout = timeout

    def connect(self) -> TcpConnection:
        return TcpConnection(
            socket.create_connection((self.host, self.port), timeout=self._timeout),
            timeout=self._timeout,
        )


class TcpListener:
    def __init__(self, host: str = "127.0.0.1", port: int = 0, timeout: float = _DEFAULT_TIMEOUT):
        self._timeout = timeout
        self._sock = socket.create_server((host, port), backlog=8)
        self._sock.settimeout(timeout)
        self.host, self.port = self._sock.getsockname()[:2]

    def connect(self) -> TcpConnection:
        return TcpConnection(
            socket.create_connection((self.host, self.port), timeout=self._timeout),
            timeout=self._timeout,
        )

    def accept(self) -> TcpConnection:
        try:
            conn, _ = self._sock.accept()
        except socket.timeout:
            raise TimeoutError("timed out waiting for a connection") from None
        return TcpConnection(conn, timeout=self._timeout)

    def close(self) -> None:
        self._sock.close()
