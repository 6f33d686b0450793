"""In-process message transport with per-link FIFO ordering.

Frames carry (query_id, round, sender, recipient, payload). Two scheduler
modes: "serial" delivers messages in global send order (deterministic);
"concurrent" picks a random nonempty link each step from a seeded
generator, modeling arbitrary interleaving while preserving per-link
order. When every queue drains and the run is not finished, each node
gets one idle callback (the timeout surrogate); if that produces no new
traffic the pump stops.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from ..errors import TransportClosed
from ..serial import Reader, pack_bytes


@dataclass(frozen=True)
class Message:
    query_id: str
    round: str
    sender: str
    recipient: str
    payload: bytes
    seq: int = 0

    def frame(self) -> bytes:
        """Wire frame: length-prefixed fields, identical for socket transport."""
        return b"".join(
            pack_bytes(part)
            for part in (
                self.query_id.encode(),
                self.round.encode(),
                self.sender.encode(),
                self.recipient.encode(),
                self.payload,
            )
        )

    @classmethod
    def from_frame(cls, data: bytes, seq: int = 0) -> "Message":
        reader = Reader(data)
        fields = [reader.bytes_field() for _ in range(5)]
        reader.expect_done()
        return cls(fields[0].decode(), fields[1].decode(), fields[2].decode(),
                   fields[3].decode(), fields[4], seq)


class Bus:
    def __init__(self, scheduler: str = "serial", rng=None, record_trace: bool = False):
        if scheduler not in ("serial", "concurrent"):
            raise ValueError(f"unknown scheduler {scheduler!r}")
        if scheduler == "concurrent" and rng is None:
            raise ValueError("concurrent scheduler needs an rng")
        self.scheduler = scheduler
        self.rng = rng
        self.nodes = {}
        self.links: dict[tuple, deque] = {}
        self._seq = 0
        self.closed = False
        self.dead: set[str] = set()
        self.trace: list[Message] | None = [] if record_trace else None
        self.delivered = 0

    def register(self, node) -> None:
        self.nodes[node.identity] = node
        node.bus = self

    def kill(self, identity: str) -> None:
        """Drop the node: pending and future messages to it are discarded."""
        self.dead.add(identity)
        for key in list(self.links):
            if key[1] == identity:
                del self.links[key]

    def send(self, message: Message) -> None:
        if self.closed:
            raise TransportClosed("bus is closed")
        if message.sender in self.dead or message.recipient in self.dead:
            return
        if message.recipient not in self.nodes:
            raise TransportClosed(f"unknown recipient {message.recipient!r}")
        message = Message(message.query_id, message.round, message.sender,
                          message.recipient, message.payload, self._seq)
        self._seq += 1
        if self.trace is not None:
            self.trace.append(message)
        self.links.setdefault((message.sender, message.recipient), deque()).append(message)

    def post(self, query_id, round_, sender, recipient, payload=b"") -> None:
        self.send(Message(query_id, round_, sender, recipient, payload))

    def broadcast(self, query_id, round_, sender, recipients, payload=b"") -> None:
        for recipient in recipients:
            self.post(query_id, round_, sender, recipient, payload)

    def _pick_link(self):
        live = [k for k, q in self.links.items() if q]
        if not live:
            return None
        if self.scheduler == "serial":
            return min(live, key=lambda k: self.links[k][0].seq)
        return live[self.rng.randbelow(len(live))]

    def pump(self, done=lambda: False, max_messages: int = 2_000_000) -> None:
        """Deliver until `done()` or traffic is exhausted.

        When all queues drain, nodes get idle callbacks with an escalating
        level: level 0 models soft timeouts (missing DP responses, block
        assembly start), level 1 hard failures (a peer CN gone). The pump
        stops once a level-1 idle round produces no new traffic.
        """
        idle_level = 0
        while not done():
            key = self._pick_link()
            if key is None:
                if idle_level > 1:
                    return
                for node in list(self.nodes.values()):
                    if node.identity not in self.dead:
                        node.on_idle(idle_level)
                idle_level += 1
                continue
            idle_level = 0
            message = self.links[key].popleft()
            self.delivered += 1
            if self.delivered > max_messages:
                raise TransportClosed("message budget exhausted (livelock?)")
            node = self.nodes.get(message.recipient)
            if node is not None and message.recipient not in self.dead:
                node.handle(message)


class NodeBase:
    """Event-loop node: dispatches messages to on_<round> methods."""

    def __init__(self, identity: str, topology, rng):
        self.identity = identity
        self.topology = topology
        self.rng = rng
        self.bus = None

    def handle(self, message: Message) -> None:
        handler = getattr(self, "on_" + message.round, None)
        if handler is None:
            raise TransportClosed(
                f"{self.identity} has no handler for round {message.round!r}"
            )
        handler(message)

    def on_idle(self, level: int = 0) -> None:
        pass

    def send(self, query_id, round_, recipient, payload=b"") -> None:
        self.bus.post(query_id, round_, self.identity, recipient, payload)
