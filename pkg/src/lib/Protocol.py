import json
from dataclasses import dataclass, field
from enum import Enum

from . import LOGGER
from .Errors import ExtractionError, StateMachineError
from .Group import CountingGroup, Group, GroupElement, OpCounts, RandomSource, Scalar
from .Identity import EntityKeys, TwinKeyPair
from .Messages import Challenge, Commit, IdentityProof, Message, MessageTag, Response, Verdict, VerdictReason

NONCE_SIZE = 32

logger = LOGGER.getChild("protocol")

class Phase(str, Enum):
    IDLE = "Idle"
    COMMITMENT_SENT = "CommitmentSent"
    CHALLENGED = "Challenged"
    RESPONSE_SENT = "ResponseSent"
    RESPONSE_RECEIVED = "ResponseReceived"
    IDENTITY_SENT = "IdentitySent"
    IDENTITY_VERIFIED = "IdentityVerified"
    KEY_ESTABLISHED = "KeyEstablished"
    FAILED = "Failed"

TERMINAL_PHASES = (Phase.KEY_ESTABLISHED, Phase.FAILED)

class SessionMode(str, Enum):
    INTERACTIVE = "interactive"
    FIAT_SHAMIR = "fiat_shamir"

@dataclass(frozen=True)
class SessionKey:
    k_pd: bytes = field(repr=False)

@dataclass
class Transcript:
    alpha: GroupElement | None = None
    c: Scalar | None = None
    z: Scalar | None = None
    h_sp: Scalar | None = None
    r_p_pub: GroupElement | None = None
    verdict: Verdict | None = None
    timestamps: dict[str, float] = field(default_factory=dict)

    def to_dict(self, group: Group) -> dict:
        def element(e: GroupElement | None) -> str | None:
            return e.hex() if e is not None else None
        def scalar(s: Scalar | None) -> str | None:
            return group.encode_scalar(s).hex() if s is not None else None
        return {
            "alpha": element(self.alpha),
            "c": scalar(self.c),
            "z": scalar(self.z),
            "h_sp": scalar(self.h_sp),
            "r_p_pub": element(self.r_p_pub),
            "verdict": None if self.verdict is None else {
                "accept": self.verdict.accept,
                "reason": self.verdict.reason.name,
            },
            "timestamps": dict(self.timestamps),
        }

    def serialize(self, group: Group) -> bytes:
        return json.dumps(self.to_dict(group), sort_keys=True).encode()

# --- Schnorr core
def schnorr_holds(group: Group, pk_d: GroupElement, alpha: GroupElement, c: Scalar, z: Scalar) -> bool:
    # g^z == alpha * pk_d^c
    return group.exp(group.generator, z) == group.mul(alpha, group.exp(pk_d, c))

def fiat_shamir_challenge(group: Group, alpha: GroupElement, zeta: bytes, pk_d: GroupElement) -> Scalar:
    return group.h1(alpha.data, zeta, pk_d.data)

def fiat_shamir_prove(
group: Group,
sk_d: Scalar,
zeta: bytes,
pk_d: GroupElement,
rng: RandomSource
) -> tuple[GroupElement, Scalar]:
    r = group.scalar_random(rng)
    alpha = group.exp(group.generator, r)
    c = fiat_shamir_challenge(group, alpha, zeta, pk_d)
    return alpha, r + c * sk_d

def fiat_shamir_verify(group: Group, pk_d: GroupElement, zeta: bytes, alpha: GroupElement, z: Scalar) -> bool:
    c = fiat_shamir_challenge(group, alpha, zeta, pk_d)
    return schnorr_holds(group, pk_d, alpha, c, z)

def extract_secret(t1: Transcript, t2: Transcript, group: Group) -> Scalar:
    if None in (t1.alpha, t1.c, t1.z, t2.alpha, t2.c, t2.z):
        raise ExtractionError("transcripts are incomplete")
    if t1.alpha != t2.alpha:
        raise ExtractionError("transcripts do not share a commitment")
    assert t1.c is not None and t2.c is not None and t1.z is not None and t2.z is not None
    if t1.c == t2.c:
        raise ExtractionError("challenges are equal, nothing to extract")
    if t1.c.q != group.q:
        raise ExtractionError("transcripts are not from {!r}".format(group))
    # sk_d = (z1 - z2) / (c1 - c2)
    return (t1.z - t2.z) * (t1.c - t2.c).inverse()

# --- State machines
class PartySession:
    name: str = ""
    honest: bool = True

    def __init__(
    self,
    group: Group,
    zeta: bytes,
    rng: RandomSource,
    mode: SessionMode = SessionMode.INTERACTIVE
    ) -> None:
        self.group: CountingGroup = CountingGroup(group)
        self.zeta: bytes = zeta
        self.rng: RandomSource = rng
        self.mode: SessionMode = SessionMode(mode)
        self.phase: Phase = Phase.IDLE
        self.reason: VerdictReason | None = None
        self.key: SessionKey | None = None
        self.transcript: Transcript = Transcript()
        # (phase, ops spent when it was entered)
        self.history: list[tuple[Phase, OpCounts]] = []

    def __repr__(self) -> str:
        return "{}({})".format(type(self).__name__, self.phase.value)

    @property
    def ops(self) -> OpCounts:
        return self.group.ops

    @property
    def is_terminal(self) -> bool:
        return self.phase in TERMINAL_PHASES

    def verdict(self) -> Verdict:
        if self.phase is Phase.KEY_ESTABLISHED:
            return Verdict(True, VerdictReason.OK)
        return Verdict(False, self.reason if self.reason is not None else VerdictReason.OUT_OF_ORDER)

    def ephemeral_state(self) -> str:
        raise NotImplementedError

    def _erase(self) -> None:
        raise NotImplementedError

    def _enter(self, phase: Phase) -> None:
        logger.debug("{}: {} -> {}".format(self.name, self.phase.value, phase.value))
        self.phase = phase
        self.history.append((phase, self.ops.copy()))
        if phase in TERMINAL_PHASES:
            self._erase()

    def _fail(self, reason: VerdictReason) -> Verdict:
        self.reason = reason
        self.key = None
        self._enter(Phase.FAILED)
        verdict = self.verdict()
        self.transcript.verdict = verdict
        return verdict

    def _expect(self, operation: str, *phases: Phase) -> None:
        if self.phase in phases:
            return
        if self.is_terminal:
            raise StateMachineError("{}: {} rejected, session is {}".format(self.name, operation, self.phase.value))
        current = self.phase
        self._fail(VerdictReason.OUT_OF_ORDER)
        raise StateMachineError("{}: {} called in phase {}".format(self.name, operation, current.value))

    # --- Event handlers
    def record_delivery(self, tag: MessageTag, at: float) -> None:
        self.transcript.timestamps.setdefault(tag.name.lower(), at)

    def start(self) -> list[Message]:
        return []

    def handle(self, message: Message) -> list[Message]:
        if isinstance(message, Verdict):
            return self.handle_verdict(message)
        if self.is_terminal:
            logger.debug("{}: dropped {} after {}".format(self.name, type(message).__name__, self.phase.value))
            return []
        return self.dispatch(message)

    def dispatch(self, message: Message) -> list[Message]:
        raise NotImplementedError

    def handle_verdict(self, verdict: Verdict) -> list[Message]:
        if self.phase is Phase.FAILED:
            return []
        if verdict.accept:
            return [] if self.is_terminal else self._out_of_order()
        # Peer aborted; a key derived already is dropped
        self._fail(VerdictReason.MALFORMED if verdict.reason is VerdictReason.OK else verdict.reason)
        return []

    def reject_malformed(self) -> list[Message]:
        if self.is_terminal:
            return []
        return [self._fail(VerdictReason.MALFORMED)]

    def timeout(self) -> list[Message]:
        if self.is_terminal:
            return []
        return [self._fail(VerdictReason.TIMEOUT)]

    def _out_of_order(self) -> list[Message]:
        return [self._fail(VerdictReason.OUT_OF_ORDER)]

class TwinSession(PartySession):
    """Digital twin D: Schnorr prover and verifier of the physical identity."""
    name = "D"

    def __init__(
    self,
    group: Group,
    keys: TwinKeyPair,
    pk_p: GroupElement,
    zeta: bytes,
    rng: RandomSource,
    mode: SessionMode = SessionMode.INTERACTIVE
    ) -> None:
        super().__init__(group, zeta, rng, mode)
        self._sk_d: Scalar | None = keys.sk_d
        self.pk_d: GroupElement = keys.pk_d
        self.pk_p: GroupElement = pk_p
        self._r: Scalar | None = None

    def ephemeral_state(self) -> str:
        return "held" if self._r is not None else "erased"

    def _erase(self) -> None:
        self._r = None

    def d_commit(self, rng: RandomSource | None = None) -> Commit:
        self._expect("d_commit", Phase.IDLE)
        # r = 0 would yield the identity, which P rejects
        self._r = self.group.scalar_random_nonzero(rng or self.rng)
        alpha = self.group.exp(self.group.generator, self._r)
        self.transcript.alpha = alpha
        self._enter(Phase.COMMITMENT_SENT)
        return Commit(alpha)

    def _respond(self, c: Scalar) -> Response:
        assert self._r is not None and self._sk_d is not None
        z = self._r + c * self._sk_d
        self._r = None
        self.transcript.c = c
        self.transcript.z = z
        self._enter(Phase.RESPONSE_SENT)
        return Response(z)

    def d_respond(self, ch: Challenge) -> Response:
        self._expect("d_respond", Phase.COMMITMENT_SENT)
        return self._respond(ch.c)

    def d_respond_fiat_shamir(self) -> Response:
        self._expect("d_respond_fiat_shamir", Phase.COMMITMENT_SENT)
        assert self.transcript.alpha is not None
        c = fiat_shamir_challenge(self.group, self.transcript.alpha, self.zeta, self.pk_d)
        return self._respond(c)

    def d_verify_identity(self, ip: IdentityProof) -> bool:
        self._expect("d_verify_identity", Phase.RESPONSE_SENT)
        self.transcript.h_sp = ip.h_sp
        self.transcript.r_p_pub = ip.r_p_pub
        if ip.h_sp.is_zero():
            self._fail(VerdictReason.BAD_IDENTITY)
            return False
        if self.group.exp(self.group.generator, ip.h_sp) != self.pk_p:
            self._fail(VerdictReason.BAD_IDENTITY)
            return False
        if self.group.is_identity(ip.r_p_pub):
            self._fail(VerdictReason.DEGENERATE_COMMITMENT)
            return False
        self._enter(Phase.IDENTITY_VERIFIED)
        return True

    def d_derive_key(self) -> SessionKey:
        self._expect("d_derive_key", Phase.IDENTITY_VERIFIED)
        assert self.transcript.r_p_pub is not None and self._sk_d is not None
        shared = self.group.exp(self.group.mul(self.pk_p, self.transcript.r_p_pub), self._sk_d)
        self.key = SessionKey(self.group.h1_bytes(shared.data, self.zeta))
        self._enter(Phase.KEY_ESTABLISHED)
        self.transcript.verdict = self.verdict()
        return self.key

    def start(self) -> list[Message]:
        commit = self.d_commit()
        if self.mode is SessionMode.FIAT_SHAMIR:
            return [commit, self.d_respond_fiat_shamir()]
        return [commit]

    def dispatch(self, message: Message) -> list[Message]:
        match message:
            case Challenge() if self.phase is Phase.COMMITMENT_SENT and self.mode is SessionMode.INTERACTIVE:
                return [self.d_respond(message)]
            case IdentityProof() if self.phase is Phase.RESPONSE_SENT:
                if not self.d_verify_identity(message):
                    return [self.verdict()]
                self.d_derive_key()
                return [self.verdict()]
            case _:
                return self._out_of_order()

class PhysicalSession(PartySession):
    """Physical entity P: Schnorr verifier and holder of the identity hash."""
    name = "P"

    def __init__(
    self,
    group: Group,
    keys: EntityKeys,
    pk_d: GroupElement,
    zeta: bytes,
    rng: RandomSource,
    mode: SessionMode = SessionMode.INTERACTIVE,
    fresh_challenge: bool = True
    ) -> None:
        super().__init__(group, zeta, rng, mode)
        self.h_sp: Scalar = keys.h_sp
        self.pk_p: GroupElement = keys.pk_p
        self.pk_d: GroupElement = pk_d
        self.fresh_challenge: bool = fresh_challenge
        self._r_p: Scalar | None = None

    def ephemeral_state(self) -> str:
        return "held" if self._r_p is not None else "erased"

    def _erase(self) -> None:
        self._r_p = None

    def p_challenge(self, commit: Commit, rng: RandomSource | None = None) -> Challenge | Verdict:
        self._expect("p_challenge", Phase.IDLE)
        alpha = commit.alpha
        self.transcript.alpha = alpha
        if self.group.is_identity(alpha):
            return self._fail(VerdictReason.DEGENERATE_COMMITMENT)
        if self.mode is SessionMode.FIAT_SHAMIR:
            c = fiat_shamir_challenge(self.group, alpha, self.zeta, self.pk_d)
        elif self.fresh_challenge:
            nonce = (rng or self.rng).randbytes(NONCE_SIZE)
            c = self.group.h1(alpha.data, self.zeta, nonce)
        else:
            c = self.group.h1(alpha.data, self.zeta)
        self.transcript.c = c
        self._enter(Phase.CHALLENGED)
        return Challenge(c)

    def p_verify_schnorr(self, resp: Response) -> bool:
        self._expect("p_verify_schnorr", Phase.CHALLENGED)
        assert self.transcript.alpha is not None and self.transcript.c is not None
        self.transcript.z = resp.z
        if not schnorr_holds(self.group, self.pk_d, self.transcript.alpha, self.transcript.c, resp.z):
            self._fail(VerdictReason.BAD_PROOF)
            return False
        self._enter(Phase.RESPONSE_RECEIVED)
        return True

    def p_identity_proof(self, rng: RandomSource | None = None) -> IdentityProof:
        self._expect("p_identity_proof", Phase.RESPONSE_RECEIVED)
        self._r_p = self.group.scalar_random_nonzero(rng or self.rng)
        r_p_pub = self.group.exp(self.group.generator, self._r_p)
        self.transcript.h_sp = self.h_sp
        self.transcript.r_p_pub = r_p_pub
        self._enter(Phase.IDENTITY_SENT)
        return IdentityProof(self.h_sp, r_p_pub)

    def p_derive_key(self) -> SessionKey:
        self._expect("p_derive_key", Phase.IDENTITY_SENT)
        assert self._r_p is not None
        # (pk_p * g^r_p)^sk_d == pk_d^(h_sp + r_p)
        shared = self.group.exp(self.pk_d, self.h_sp + self._r_p)
        self.key = SessionKey(self.group.h1_bytes(shared.data, self.zeta))
        self._enter(Phase.KEY_ESTABLISHED)
        self.transcript.verdict = self.verdict()
        return self.key

    def dispatch(self, message: Message) -> list[Message]:
        match message:
            case Commit() if self.phase is Phase.IDLE:
                reply = self.p_challenge(message)
                if isinstance(reply, Verdict) or self.mode is SessionMode.INTERACTIVE:
                    return [reply]
                return []
            case Response() if self.phase is Phase.CHALLENGED:
                if not self.p_verify_schnorr(message):
                    return [self.verdict()]
                proof = self.p_identity_proof()
                self.p_derive_key()
                return [proof]
            case _:
                return self._out_of_order()
