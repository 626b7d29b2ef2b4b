"""Socket gateway for the pub/sub bus.

A :class:`BusServer` exposes one bus over TCP. Clients open a connection,
send a handshake line listing the topics they want to receive, and then
exchange framed records. Frames follow each record's dialect: Dialect A is a
newline-terminated JSON line (first byte ``{``), Dialect B is length-prefixed
(first byte 0x00 because payloads are capped below 16 MiB), so a mixed
stream is self-describing.

The handshake is a single Dialect-A style JSON line:

    {"msg_type": "handshake", "topics": ["/cm/chassis", ...]}

and the server answers with ``handshake_ack`` carrying every registered
topic and its dialect, or ``handshake_error`` when an unknown topic was
requested, after which the connection is closed.
"""

from __future__ import annotations

import json
import queue
import socket
import threading
from dataclasses import dataclass

from .bus import Bus, Subscription
from .codecs import MalformedRecord, decode_a, decode_b, encode_a, encode_b
from .messages import Dialect, MessageEnvelope, Payload

_RECV_CHUNK = 65536


class HandshakeMismatch(ConnectionError):
    """The peer requested a topic the server does not know."""


class TransportClosed(ConnectionError):
    pass


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return host, int(port)


class _FrameStream:
    """Buffered reader/writer that splits a TCP stream into dialect frames."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._buf = bytearray()
        self._wlock = threading.Lock()

    def _fill(self) -> bool:
        try:
            chunk = self.sock.recv(_RECV_CHUNK)
        except OSError:
            return False
        if not chunk:
            return False
        self._buf.extend(chunk)
        return True

    def read_frame(self) -> bytes | None:
        """Return the next complete frame, or None when the peer is gone."""
        while True:
            if self._buf:
                first = self._buf[0]
                if first == 0x7B:  # '{' -> Dialect A line
                    idx = self._buf.find(b"\n")
                    if idx >= 0:
                        frame = bytes(self._buf[: idx + 1])
                        del self._buf[: idx + 1]
                        return frame
                elif first == 0x00:  # Dialect B length prefix
                    if len(self._buf) >= 4:
                        length = int.from_bytes(self._buf[:4], "big")
                        if len(self._buf) >= 4 + length:
                            frame = bytes(self._buf[: 4 + length])
                            del self._buf[: 4 + length]
                            return frame
                else:
                    raise MalformedRecord(f"unexpected frame start byte {first:#x}")
            if not self._fill():
                return None

    def write(self, data: bytes) -> None:
        with self._wlock:
            self.sock.sendall(data)


def _encode_for(env: MessageEnvelope, dialect: Dialect) -> bytes:
    return encode_a(env) if dialect is Dialect.A else encode_b(env)


def _decode_frame(frame: bytes) -> MessageEnvelope:
    if frame[:1] == b"\x00":
        return decode_b(frame)
    return decode_a(frame)


@dataclass
class _ClientConn:
    stream: _FrameStream
    outbox: "queue.Queue[bytes | None]"
    subscriptions: list[Subscription]


class BusServer:
    """Serves one bus over TCP; remote peers subscribe and publish."""

    def __init__(self, bus: Bus, host: str = "127.0.0.1", port: int = 0):
        self.bus = bus
        self._listener = socket.create_server((host, port))
        self._listener.settimeout(0.2)
        self.host, self.port = self._listener.getsockname()[:2]
        self._conns: list[_ClientConn] = []
        self._lock = threading.Lock()
        self._closing = threading.Event()
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def _accept_loop(self) -> None:
        while not self._closing.is_set():
            try:
                sock, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            threading.Thread(target=self._serve_conn, args=(sock,), daemon=True).start()

    def _serve_conn(self, sock: socket.socket) -> None:
        stream = _FrameStream(sock)
        try:
            frame = stream.read_frame()
        except MalformedRecord:
            sock.close()
            return
        if frame is None:
            sock.close()
            return
        try:
            hello = json.loads(frame)
        except json.JSONDecodeError:
            sock.close()
            return
        if not isinstance(hello, dict) or hello.get("msg_type") != "handshake":
            sock.close()
            return
        wanted = hello.get("topics", [])
        known = {t.name: t for t in self.bus.topics()}
        unknown = sorted(set(wanted) - set(known))
        if unknown:
            reply = {"msg_type": "handshake_error", "unknown_topics": unknown}
            stream.write(json.dumps(reply, sort_keys=True).encode() + b"\n")
            sock.close()
            return
        reply = {
            "msg_type": "handshake_ack",
            "topics": {name: topic.dialect.value for name, topic in sorted(known.items())},
        }
        stream.write(json.dumps(reply, sort_keys=True).encode() + b"\n")

        conn = _ClientConn(stream=stream, outbox=queue.Queue(), subscriptions=[])
        for name in wanted:
            dialect = known[name].dialect
            sub = self.bus.subscribe(
                name, callback=lambda env, _d=dialect: conn.outbox.put(_encode_for(env, _d))
            )
            conn.subscriptions.append(sub)
        with self._lock:
            self._conns.append(conn)

        writer = threading.Thread(target=self._writer_loop, args=(conn,), daemon=True)
        writer.start()
        try:
            while True:
                frame = stream.read_frame()
                if frame is None:
                    break
                env = _decode_frame(frame)
                self.bus.publish(env.channel, env)
        except (MalformedRecord, OSError):
            pass
        finally:
            self._drop_conn(conn)
            sock.close()

    def _writer_loop(self, conn: _ClientConn) -> None:
        while True:
            data = conn.outbox.get()
            if data is None:
                return
            try:
                conn.stream.write(data)
            except OSError:
                return

    def _drop_conn(self, conn: _ClientConn) -> None:
        with self._lock:
            if conn in self._conns:
                self._conns.remove(conn)
        for sub in conn.subscriptions:
            self.bus.unsubscribe(sub)
        conn.outbox.put(None)

    def close(self) -> None:
        self._closing.set()
        try:
            self._listener.close()
        except OSError:
            pass
        with self._lock:
            conns = list(self._conns)
        for conn in conns:
            self._drop_conn(conn)
            try:
                conn.stream.sock.close()
            except OSError:
                pass


class BusClient:
    """Remote peer of a :class:`BusServer`.

    Received envelopes land on a single ordered inbox preserving the arrival
    order across topics. ``ConnectionRefusedError`` propagates when nothing
    listens on the endpoint.
    """

    def __init__(self, endpoint: str, subscribe_topics: list[str] | None = None, timeout: float = 10.0):
        host, port = parse_endpoint(endpoint)
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._stream = _FrameStream(self._sock)
        hello = {"msg_type": "handshake", "topics": sorted(subscribe_topics or [])}
        self._stream.write(json.dumps(hello, sort_keys=True).encode() + b"\n")
        reply_frame = self._stream.read_frame()
        if reply_frame is None:
            raise TransportClosed("server closed connection during handshake")
        reply = json.loads(reply_frame)
        if reply.get("msg_type") == "handshake_error":
            raise HandshakeMismatch(f"unknown topics requested: {reply.get('unknown_topics')}")
        if reply.get("msg_type") != "handshake_ack":
            raise TransportClosed(f"unexpected handshake reply: {reply!r}")
        self._dialects = {name: Dialect(value) for name, value in reply["topics"].items()}
        self._sock.settimeout(None)
        self.inbox: "queue.Queue[MessageEnvelope | None]" = queue.Queue()
        self._reader = threading.Thread(target=self._reader_loop, daemon=True)
        self._reader.start()

    def _reader_loop(self) -> None:
        try:
            while True:
                frame = self._stream.read_frame()
                if frame is None:
                    break
                self.inbox.put(_decode_frame(frame))
        except (MalformedRecord, OSError):
            pass
        finally:
            self.inbox.put(None)

    def topic_dialect(self, name: str) -> Dialect:
        return self._dialects[name]

    def publish(self, channel: str, payload: Payload, stamp_s: float) -> None:
        dialect = self._dialects.get(channel)
        if dialect is None:
            raise KeyError(f"server does not know topic {channel!r}")
        env = MessageEnvelope.for_channel(channel, stamp_s, payload)
        self._stream.write(_encode_for(env, dialect))

    def next_envelope(self, timeout: float | None = None) -> MessageEnvelope:
        env = self.inbox.get(timeout=timeout)
        if env is None:
            raise TransportClosed("connection closed")
        return env

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()
