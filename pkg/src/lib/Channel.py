import heapq
from dataclasses import dataclass, field
from typing import Callable, Protocol

from . import LOGGER
from .Errors import MessageDecodeError, SessionDeadlockError
from .Group import Group, OpCounts, RandomSource
from .Messages import HEADER_SIZE, Message, MessageTag, decode_message, encode_message
from .Protocol import Phase

MAX_DELIVERIES = 64

logger = LOGGER.getChild("channel")

Tamper = Callable[[int, bytes], bytes]

class Endpoint(Protocol):
    name: str
    honest: bool
    history: list[tuple[Phase, OpCounts]]

    @property
    def ops(self) -> OpCounts: ...
    @property
    def phase(self) -> Phase: ...
    @property
    def is_terminal(self) -> bool: ...
    def start(self) -> list[Message]: ...
    def handle(self, message: Message) -> list[Message]: ...
    def record_delivery(self, tag: MessageTag, at: float) -> None: ...
    def reject_malformed(self) -> list[Message]: ...
    def timeout(self) -> list[Message]: ...

@dataclass
class Delivery:
    index: int
    sender: str
    recipient: str
    tag: MessageTag
    sent_at: float
    delay: float
    delivered_at: float
    sent: bytes
    delivered: bytes

    @property
    def tampered(self) -> bool:
        return self.sent != self.delivered

@dataclass
class ChannelTrace:
    deliveries: list[Delivery] = field(default_factory=list)
    phase_times: dict[str, dict[Phase, float]] = field(default_factory=dict)
    finished_at: float = 0.0

    def entered(self, name: str, *phases: Phase) -> float | None:
        times = [self.phase_times.get(name, {}).get(p) for p in phases]
        found = [t for t in times if t is not None]
        return min(found) if found else None

    def injected_delay(self, until: float | None = None) -> float:
        return sum(d.delay for d in self.deliveries if until is None or d.delivered_at <= until)

    def tampered(self) -> Delivery | None:
        return next((d for d in self.deliveries if d.tampered), None)

def flip_bit(data: bytes, bit_index: int) -> bytes:
    out = bytearray(data)
    out[bit_index // 8] ^= 0x80 >> (bit_index % 8)
    return bytes(out)

def payload_bits(data: bytes) -> int:
    return 8 * (len(data) - HEADER_SIZE)

class VirtualChannel:
    """Two-party network on a virtual clock. Each direction is FIFO."""

    def __init__(
    self,
    group: Group,
    latency_ms: tuple[float, float] = (0.0, 0.0),
    rng: RandomSource | None = None,
    tamper: Tamper | None = None,
    op_time_ms: dict[str, float] | None = None,
    timeout_ms: float = 1000.0
    ) -> None:
        self.group: Group = group
        self.latency_ms: tuple[float, float] = latency_ms
        self.rng: RandomSource | None = rng
        self.tamper: Tamper | None = tamper
        self.op_time_ms: dict[str, float] = op_time_ms or {}
        self.timeout_ms: float = timeout_ms

    def _delay(self) -> float:
        low, high = self.latency_ms
        if high <= low:
            return float(low)
        assert self.rng is not None, "random latency needs an rng"
        return self.rng.uniform(low, high)

    def _cost(self, ops: OpCounts) -> float:
        return sum(count * self.op_time_ms.get(name, 0.0) for name, count in ops.to_dict().items())

    def run(self, initiator: Endpoint, responder: Endpoint) -> ChannelTrace:
        endpoints = {initiator.name: initiator, responder.name: responder}
        peers = {initiator.name: responder.name, responder.name: initiator.name}
        trace = ChannelTrace(phase_times={name: {} for name in endpoints})
        queue: list[tuple[float, int, Delivery]] = []
        link_clock: dict[str, float] = {name: 0.0 for name in endpoints}
        busy_until: dict[str, float] = {name: 0.0 for name in endpoints}

        def post(sender: str, messages: list[Message], at: float) -> None:
            for message in messages:
                index = len(trace.deliveries)
                if index >= MAX_DELIVERIES:
                    raise SessionDeadlockError("more than {} messages in one session".format(MAX_DELIVERIES))
                sent = encode_message(message, self.group)
                delivered = self.tamper(index, sent) if self.tamper else sent
                delay = self._delay()
                # FIFO: a message never overtakes an earlier one on its link
                arrival = max(at + delay, link_clock[sender])
                link_clock[sender] = arrival
                d = Delivery(index, sender, peers[sender], message.tag, at, delay, arrival, sent, delivered)
                trace.deliveries.append(d)
                heapq.heappush(queue, (arrival, index, d))

        def call(endpoint: Endpoint, at: float, action: Callable[[], list[Message]]) -> None:
            start = max(at, busy_until[endpoint.name])
            before = endpoint.ops.copy()
            seen = len(endpoint.history)
            messages = action()
            for phase, ops in endpoint.history[seen:]:
                entered = start + self._cost(ops - before)
                trace.phase_times[endpoint.name].setdefault(phase, entered)
            done = start + self._cost(endpoint.ops - before)
            busy_until[endpoint.name] = done
            trace.finished_at = max(trace.finished_at, done)
            post(endpoint.name, messages, done)

        call(initiator, 0.0, initiator.start)
        call(responder, 0.0, responder.start)
        while True:
            while queue:
                arrival, _, d = heapq.heappop(queue)
                recipient = endpoints[d.recipient]
                for endpoint in endpoints.values():
                    endpoint.record_delivery(d.tag, arrival)
                try:
                    message = decode_message(d.delivered, self.group)
                except MessageDecodeError as e:
                    logger.debug("{} got malformed {}: {}".format(d.recipient, d.tag.name, e))
                    call(recipient, arrival, recipient.reject_malformed)
                    continue
                logger.debug("t={:.3f}ms {} -> {} {}".format(arrival, d.sender, d.recipient, d.tag.name))
                call(recipient, arrival, lambda: recipient.handle(message))
            stalled = [e for e in endpoints.values() if not e.is_terminal]
            if not stalled:
                break
            if all(e.honest for e in endpoints.values()):
                raise SessionDeadlockError("no terminal phase: {}".format(
                    ", ".join("{}={}".format(e.name, e.phase.value) for e in stalled)
                ))
            for endpoint in stalled:
                call(endpoint, trace.finished_at + self.timeout_ms, endpoint.timeout)
        return trace
