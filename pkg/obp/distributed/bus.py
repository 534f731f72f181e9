"""
Round-based message bus for the simulated cluster.

Nodes post messages during a round; ``barrier`` delivers everything posted since the last
barrier in canonical (sender, recipient, posting order) order and appends one record per
message to the log. Delivery order never depends on which thread posted first.
"""

import json
import socket
import threading
from dataclasses import asdict, dataclass
from enum import StrEnum
from pathlib import Path

from obp.distributed import wire
from obp.errors import ClusterStateError


class MessageKind(StrEnum):
    scatter = "scatter"
    terms = "terms"
    load = "load"
    boundary = "boundary"
    delta = "delta"
    migrate = "migrate"
    stats = "stats"
    proposal = "proposal"
    reply = "reply"
    candidates = "candidates"
    decision = "decision"


class TransportKind(StrEnum):
    inproc = "inproc"
    socket = "socket"


@dataclass(frozen=True)
class Message:
    sender: int
    recipient: int
    kind: MessageKind
    payload: wire.TermBatch | dict | list


@dataclass(frozen=True)
class MessageRecord:
    round: int
    sender: int
    recipient: int
    kind: str
    payload_size: int

    def to_json(self) -> dict:
        return asdict(self)


class InprocTransport:
    def deliver(self, payload, n: int):
        return payload

    def close(self):
        pass


class SocketTransport:
    """Pushes every payload through a local socket pair using the wire encoding."""

    def __init__(self):
        self._send, self._recv = socket.socketpair()

    def _read_exactly(self, count: int) -> bytes:
        chunks = bytearray()
        while len(chunks) < count:
            chunk = self._recv.recv(min(count - len(chunks), 1 << 16))
            if not chunk:
                raise ClusterStateError("Socket closed mid-frame")
            chunks += chunk
        return bytes(chunks)

    def deliver(self, payload, n: int):
        frame = wire.encode(payload)
        writer = threading.Thread(target=self._send.sendall, args=(frame,))
        writer.start()
        header = self._read_exactly(4)
        body = self._read_exactly(int.from_bytes(header, "big"))
        writer.join()
        return wire.decode(header + body, n)

    def close(self):
        self._send.close()
        self._recv.close()


def make_transport(kind: TransportKind | str) -> InprocTransport | SocketTransport:
    match TransportKind(kind):
        case TransportKind.inproc:
            return InprocTransport()
        case TransportKind.socket:
            return SocketTransport()


class MessageBus:
    def __init__(self, n: int, transport: TransportKind | str = TransportKind.inproc):
        self.n = n
        self.transport = make_transport(transport)
        self.log: list[MessageRecord] = []
        self.round = 0
        self._outbox: list[tuple[int, int, Message]] = []
        self._posted: dict[int, int] = {}
        self._lock = threading.Lock()

    def post(self, sender: int, recipient: int, kind: MessageKind, payload) -> None:
        if sender == recipient:
            raise ClusterStateError(f"Node {sender} posted a {kind} message to itself")
        with self._lock:
            seq = self._posted.get(sender, 0)
            self._posted[sender] = seq + 1
            self._outbox.append((sender, seq, Message(sender, recipient, MessageKind(kind), payload)))

    def barrier(self) -> dict[int, list[Message]]:
        """Deliver the round's messages, returning each recipient's inbox in sender order."""
        with self._lock:
            pending = sorted(self._outbox, key=lambda item: (item[0], item[2].recipient, item[1]))
            self._outbox = []
            self._posted = {}
        inboxes: dict[int, list[Message]] = {}
        for _, _, message in pending:
            self.log.append(MessageRecord(self.round, message.sender, message.recipient, str(message.kind), wire.frame_size(message.payload)))
            delivered = Message(message.sender, message.recipient, message.kind, self.transport.deliver(message.payload, self.n))
            inboxes.setdefault(message.recipient, []).append(delivered)
        self.round += 1
        return inboxes

    def records_since(self, start: int) -> list[MessageRecord]:
        return self.log[start:]

    def dump_jsonl(self, path: str | Path) -> None:
        with open(path, "w") as f:
            for record in self.log:
                f.write(json.dumps(record.to_json(), sort_keys=True) + "\n")

    def close(self):
        self.transport.close()
