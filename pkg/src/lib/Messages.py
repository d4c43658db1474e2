from dataclasses import dataclass
from enum import IntEnum
from typing import ClassVar

from .Errors import GroupError, MessageDecodeError
from .Group import Group, GroupElement, Scalar

TAG_SIZE = 1
LENGTH_SIZE = 4
HEADER_SIZE = TAG_SIZE + LENGTH_SIZE

class MessageTag(IntEnum):
    COMMIT = 0x01
    CHALLENGE = 0x02
    RESPONSE = 0x03
    IDENTITY_PROOF = 0x04
    VERDICT = 0x05

class VerdictReason(IntEnum):
    OK = 0
    BAD_PROOF = 1
    BAD_IDENTITY = 2
    DEGENERATE_COMMITMENT = 3
    OUT_OF_ORDER = 4
    TIMEOUT = 5
    MALFORMED = 6

@dataclass(frozen=True)
class Commit:
    alpha: GroupElement
    tag: ClassVar[MessageTag] = MessageTag.COMMIT

@dataclass(frozen=True)
class Challenge:
    c: Scalar
    tag: ClassVar[MessageTag] = MessageTag.CHALLENGE

@dataclass(frozen=True)
class Response:
    z: Scalar
    tag: ClassVar[MessageTag] = MessageTag.RESPONSE

@dataclass(frozen=True)
class IdentityProof:
    h_sp: Scalar
    r_p_pub: GroupElement
    tag: ClassVar[MessageTag] = MessageTag.IDENTITY_PROOF

@dataclass(frozen=True)
class Verdict:
    accept: bool
    reason: VerdictReason = VerdictReason.OK
    tag: ClassVar[MessageTag] = MessageTag.VERDICT

Message = Commit | Challenge | Response | IdentityProof | Verdict

def payload_size(tag: MessageTag, group: Group) -> int:
    match tag:
        case MessageTag.COMMIT:
            return group.element_size
        case MessageTag.CHALLENGE | MessageTag.RESPONSE:
            return group.scalar_size
        case MessageTag.IDENTITY_PROOF:
            return group.scalar_size + group.element_size
        case MessageTag.VERDICT:
            return 2

def encode_message(message: Message, group: Group) -> bytes:
    payload: bytes
    match message:
        case Commit(alpha=alpha):
            payload = group.encode(alpha)
        case Challenge(c=c):
            payload = group.encode_scalar(c)
        case Response(z=z):
            payload = group.encode_scalar(z)
        case IdentityProof(h_sp=h_sp, r_p_pub=r_p_pub):
            payload = group.encode_scalar(h_sp) + group.encode(r_p_pub)
        case Verdict(accept=accept, reason=reason):
            payload = bytes([int(accept), int(reason)])
        case _:
            raise TypeError("not a protocol message: {!r}".format(message))
    return bytes([message.tag]) + len(payload).to_bytes(LENGTH_SIZE, "big") + payload

def decode_message(data: bytes, group: Group) -> Message:
    if len(data) < HEADER_SIZE:
        raise MessageDecodeError("truncated header ({} bytes)".format(len(data)))
    try:
        tag = MessageTag(data[0])
    except ValueError:
        raise MessageDecodeError("unknown message tag {:#04x}".format(data[0])) from None
    length = int.from_bytes(data[TAG_SIZE:HEADER_SIZE], "big")
    payload = data[HEADER_SIZE:]
    if length != len(payload):
        raise MessageDecodeError("length field says {} bytes, payload has {}".format(length, len(payload)))
    if length != payload_size(tag, group):
        raise MessageDecodeError("{} payload must be {} bytes, got {}".format(
            tag.name, payload_size(tag, group), length
        ))
    try:
        match tag:
            case MessageTag.COMMIT:
                return Commit(group.decode(payload))
            case MessageTag.CHALLENGE:
                return Challenge(group.decode_scalar(payload))
            case MessageTag.RESPONSE:
                return Response(group.decode_scalar(payload))
            case MessageTag.IDENTITY_PROOF:
                return IdentityProof(
                    group.decode_scalar(payload[:group.scalar_size]),
                    group.decode(payload[group.scalar_size:]),
                )
            case MessageTag.VERDICT:
                if payload[0] not in (0, 1):
                    raise MessageDecodeError("verdict flag must be 0 or 1")
                try:
                    reason = VerdictReason(payload[1])
                except ValueError:
                    raise MessageDecodeError("unknown verdict reason {}".format(payload[1])) from None
                return Verdict(bool(payload[0]), reason)
    except GroupError as e:
        raise MessageDecodeError("{}: {}".format(tag.name, e)) from e
    raise MessageDecodeError("unhandled tag {}".format(tag.name))
