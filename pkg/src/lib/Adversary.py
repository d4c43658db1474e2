from dataclasses import dataclass, field
from enum import Enum

from . import LOGGER
from .Channel import ChannelTrace, Delivery, VirtualChannel, flip_bit, payload_bits
from .Errors import AttackError, MessageDecodeError
from .Group import CountingGroup, Group, GroupElement, OpCounts, RandomSource, Scalar
from .Messages import (
    HEADER_SIZE, Challenge, Commit, IdentityProof, Message, MessageTag, Response, Verdict, decode_message
)
from .Protocol import NONCE_SIZE, Phase, PhysicalSession, SessionMode, Transcript, TwinSession

logger = LOGGER.getChild("adversary")

class AdversaryKind(str, Enum):
    REPLAY = "replay"
    IMPERSONATE_TWIN = "impersonate_twin"
    MITM_TAMPER = "mitm_tamper"
    KCI_IMPERSONATE_PHYSICAL = "kci_impersonate_physical"

@dataclass(frozen=True)
class AttackContext:
    kind: AdversaryKind
    pk_p: GroupElement
    pk_d: GroupElement
    zeta: bytes
    recorded_transcripts: tuple[Transcript, ...] = ()
    compromised_sk_d: Scalar | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.compromised_sk_d is not None and self.kind is not AdversaryKind.KCI_IMPERSONATE_PHYSICAL:
            raise AttackError("only the KCI adversary may hold sk_d")

@dataclass
class AttackOutcome:
    kind: AdversaryKind
    accepted: bool
    verdict: Verdict
    trace: ChannelTrace
    peer_verdict: Verdict | None = None
    keys_agree: bool | None = None
    tampered: Delivery | None = None

# --- Adversarial endpoints
class AdversaryEndpoint:
    honest = False
    # Never waited on: a silent adversary makes the honest side time out
    is_terminal = True
    phase = Phase.IDLE

    def __init__(self, name: str, group: Group, rng: RandomSource, mode: SessionMode) -> None:
        self.name: str = name
        self.group: CountingGroup = CountingGroup(group)
        self.rng: RandomSource = rng
        self.mode: SessionMode = mode
        self.history: list[tuple[Phase, OpCounts]] = []

    @property
    def ops(self) -> OpCounts:
        return self.group.ops

    def start(self) -> list[Message]:
        return []

    def record_delivery(self, tag: MessageTag, at: float) -> None:
        pass

    def handle(self, message: Message) -> list[Message]:
        return []

    def reject_malformed(self) -> list[Message]:
        return []

    def timeout(self) -> list[Message]:
        return []

class ReplayingTwin(AdversaryEndpoint):
    def __init__(self, recorded: Transcript, group: Group, rng: RandomSource, mode: SessionMode) -> None:
        super().__init__("D", group, rng, mode)
        if recorded.alpha is None or recorded.z is None:
            raise AttackError("recorded transcript has no (alpha, z)")
        self.recorded: Transcript = recorded

    def start(self) -> list[Message]:
        assert self.recorded.alpha is not None and self.recorded.z is not None
        if self.mode is SessionMode.FIAT_SHAMIR:
            return [Commit(self.recorded.alpha), Response(self.recorded.z)]
        return [Commit(self.recorded.alpha)]

    def handle(self, message: Message) -> list[Message]:
        assert self.recorded.z is not None
        if isinstance(message, Challenge):
            return [Response(self.recorded.z)]
        return []

class BlindTwin(AdversaryEndpoint):
    """Impersonates D without sk_d: random commitment, random response."""

    def __init__(self, group: Group, rng: RandomSource, mode: SessionMode) -> None:
        super().__init__("D", group, rng, mode)

    def _guess(self) -> Response:
        return Response(self.group.scalar_random(self.rng))

    def start(self) -> list[Message]:
        alpha = self.group.exp(self.group.generator, self.group.scalar_random_nonzero(self.rng))
        if self.mode is SessionMode.FIAT_SHAMIR:
            return [Commit(alpha), self._guess()]
        return [Commit(alpha)]

    def handle(self, message: Message) -> list[Message]:
        if isinstance(message, Challenge):
            return [self._guess()]
        return []

class GuessingPhysical(AdversaryEndpoint):
    """Impersonates P to D with a stolen sk_d but no S_p."""

    def __init__(self, ctx: AttackContext, group: Group, rng: RandomSource, mode: SessionMode) -> None:
        super().__init__("P", group, rng, mode)
        self.ctx: AttackContext = ctx
        self.answered: bool = False

    def handle(self, message: Message) -> list[Message]:
        match message:
            case Commit(alpha=alpha) if self.mode is SessionMode.INTERACTIVE:
                nonce = self.rng.randbytes(NONCE_SIZE)
                return [Challenge(self.group.h1(alpha.data, self.ctx.zeta, nonce))]
            case Response() if not self.answered:
                self.answered = True
                h_guess = self.group.scalar_random(self.rng)
                r_p_pub = self.group.exp(self.group.generator, self.group.scalar_random_nonzero(self.rng))
                return [IdentityProof(h_guess, r_p_pub)]
        return []

# --- Strategies
def _channel(channel: VirtualChannel | None, group: Group) -> VirtualChannel:
    return channel if channel is not None else VirtualChannel(group)

def attack_replay(
ctx: AttackContext,
target: PhysicalSession,
rng: RandomSource,
channel: VirtualChannel | None = None
) -> AttackOutcome:
    if not ctx.recorded_transcripts:
        raise AttackError("replay needs at least one recorded transcript")
    recorded = ctx.recorded_transcripts[rng.randrange(len(ctx.recorded_transcripts))]
    group = target.group.inner
    adversary = ReplayingTwin(recorded, group, rng, target.mode)
    trace = _channel(channel, group).run(adversary, target)
    return AttackOutcome(
        AdversaryKind.REPLAY, target.phase is Phase.KEY_ESTABLISHED, target.verdict(), trace
    )

def attack_impersonate_twin(
ctx: AttackContext,
rng: RandomSource,
target: PhysicalSession,
channel: VirtualChannel | None = None
) -> AttackOutcome:
    group = target.group.inner
    adversary = BlindTwin(group, rng, target.mode)
    trace = _channel(channel, group).run(adversary, target)
    return AttackOutcome(
        AdversaryKind.IMPERSONATE_TWIN, target.phase is Phase.KEY_ESTABLISHED, target.verdict(), trace
    )

def attack_kci(
ctx: AttackContext,
rng: RandomSource,
target: TwinSession,
channel: VirtualChannel | None = None
) -> AttackOutcome:
    if ctx.compromised_sk_d is None:
        raise AttackError("KCI needs a compromised sk_d")
    group = target.group.inner
    adversary = GuessingPhysical(ctx, group, rng, target.mode)
    trace = _channel(channel, group).run(target, adversary)
    return AttackOutcome(
        AdversaryKind.KCI_IMPERSONATE_PHYSICAL, target.phase is Phase.KEY_ESTABLISHED, target.verdict(), trace
    )

def expected_messages(mode: SessionMode) -> int:
    # Commit, [Challenge,] Response, IdentityProof, Verdict
    return 4 if mode is SessionMode.FIAT_SHAMIR else 5

def credential_changed(sent: bytes, delivered: bytes, group: Group) -> bool:
    try:
        original = decode_message(sent, group)
        received = decode_message(delivered, group)
    except MessageDecodeError:
        return False
    match original, received:
        case Commit(alpha=a), Commit(alpha=b):
            return a != b
        case Challenge(c=a), Challenge(c=b):
            return a != b
        case Response(z=a), Response(z=b):
            return a != b
        case IdentityProof(h_sp=a), IdentityProof(h_sp=b):
            return a != b
    return False

def attack_mitm_tamper(
ctx: AttackContext,
rng: RandomSource,
twin: TwinSession,
physical: PhysicalSession,
channel: VirtualChannel | None = None
) -> AttackOutcome:
    group = twin.group.inner
    channel = _channel(channel, group)
    target_index = rng.randrange(expected_messages(twin.mode))

    def tamper(index: int, data: bytes) -> bytes:
        if index != target_index:
            return data
        bit = HEADER_SIZE * 8 + rng.randrange(payload_bits(data))
        return flip_bit(data, bit)

    channel.tamper = tamper
    try:
        trace = channel.run(twin, physical)
    finally:
        channel.tamper = None
    hit = trace.tampered()
    established = [s for s in (twin, physical) if s.phase is Phase.KEY_ESTABLISHED]
    # Only a changed credential field that still ends in a key counts
    accepted = hit is not None and bool(established) and credential_changed(hit.sent, hit.delivered, group)
    keys_agree = None
    if len(established) == 2:
        keys_agree = twin.key == physical.key
    if hit is not None:
        logger.debug("MITM flipped a bit of message {} ({})".format(hit.index, MessageTag(hit.tag).name))
    return AttackOutcome(
        AdversaryKind.MITM_TAMPER, accepted, twin.verdict(), trace,
        peer_verdict=physical.verdict(), keys_agree=keys_agree, tampered=hit,
    )
