import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Protocol

from ecdsa import NIST256p
from ecdsa.ellipticcurve import INFINITY
from ecdsa.errors import MalformedPointError
from ecdsa.keys import VerifyingKey

from .Errors import GroupError

H1_TAG = b"\x01"
H2_TAG = b"\x02"
DIGEST_SIZE = 32
LENGTH_PREFIX_SIZE = 4

# Toy group: order-11 subgroup of Z_23^*
TOY_P = 23
TOY_Q = 11
TOY_G = 2

class GroupId(str, Enum):
    TOY = "toy"
    PRODUCTION = "production"

class RandomSource(Protocol):
    def randrange(self, start: int, stop: int = ..., /) -> int: ...
    def randbytes(self, n: int, /) -> bytes: ...
    def uniform(self, a: float, b: float, /) -> float: ...

@dataclass(frozen=True)
class GroupParams:
    group_id: GroupId
    q: int
    generator_desc: bytes

@dataclass(frozen=True)
class Scalar:
    value: int
    q: int

    def __post_init__(self) -> None:
        if not 0 <= self.value < self.q:
            raise GroupError("scalar {} outside [0, {})".format(self.value, self.q))

    def __repr__(self) -> str:
        return "Scalar({})".format(self.value)

    def _other(self, other: 'Scalar | int') -> int:
        if isinstance(other, Scalar):
            if other.q != self.q:
                raise GroupError("scalars from different groups")
            return other.value
        return other % self.q

    def __add__(self, other: 'Scalar | int') -> 'Scalar':
        return Scalar((self.value + self._other(other)) % self.q, self.q)

    def __sub__(self, other: 'Scalar | int') -> 'Scalar':
        return Scalar((self.value - self._other(other)) % self.q, self.q)

    def __mul__(self, other: 'Scalar | int') -> 'Scalar':
        return Scalar((self.value * self._other(other)) % self.q, self.q)

    def __neg__(self) -> 'Scalar':
        return Scalar(-self.value % self.q, self.q)

    def inverse(self) -> 'Scalar':
        if self.value == 0:
            raise GroupError("zero has no inverse")
        return Scalar(pow(self.value, -1, self.q), self.q)

    def is_zero(self) -> bool:
        return self.value == 0

    def to_bytes(self, width: int) -> bytes:
        return self.value.to_bytes(width, "big")

@dataclass(frozen=True)
class GroupElement:
    group_id: GroupId
    data: bytes
    # Backend representation, cached so arithmetic skips decoding
    point: Any = field(default=None, compare=False, repr=False, hash=False)

    def __repr__(self) -> str:
        return "GroupElement({}:{})".format(self.group_id.value, self.data.hex())

    def hex(self) -> str:
        return self.data.hex()

@dataclass
class OpCounts:
    group_exp: int = 0
    group_mul: int = 0
    hash: int = 0

    def __add__(self, other: 'OpCounts') -> 'OpCounts':
        return OpCounts(
            self.group_exp + other.group_exp,
            self.group_mul + other.group_mul,
            self.hash + other.hash,
        )

    def __sub__(self, other: 'OpCounts') -> 'OpCounts':
        return OpCounts(
            self.group_exp - other.group_exp,
            self.group_mul - other.group_mul,
            self.hash - other.hash,
        )

    def copy(self) -> 'OpCounts':
        return OpCounts(self.group_exp, self.group_mul, self.hash)

    def to_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict[str, int]) -> 'OpCounts':
        return cls(**{f.name: int(data.get(f.name, 0)) for f in fields(cls)})

# --- Random oracles
def frame(tag: bytes, inputs: tuple[bytes, ...]) -> bytes:
    out = bytearray(tag)
    for item in inputs:
        out += len(item).to_bytes(LENGTH_PREFIX_SIZE, "big")
        out += item
    return bytes(out)

def hash_h1_bytes(*inputs: bytes) -> bytes:
    return hashlib.sha256(frame(H1_TAG, inputs)).digest()

def hash_h2(*inputs: bytes) -> bytes:
    return hashlib.sha256(frame(H2_TAG, inputs)).digest()

# --- Groups
class Group(ABC):
    params: GroupParams
    element_size: int
    scalar_size: int
    generator: GroupElement
    identity: GroupElement

    @property
    def group_id(self) -> GroupId:
        return self.params.group_id

    @property
    def q(self) -> int:
        return self.params.q

    @abstractmethod
    def _exp_native(self, point: Any, e: int) -> Any: pass

    @abstractmethod
    def _mul_native(self, a: Any, b: Any) -> Any: pass

    @abstractmethod
    def _encode_native(self, point: Any) -> bytes: pass

    @abstractmethod
    def _decode_native(self, data: bytes) -> Any: pass

    def _wrap(self, point: Any) -> GroupElement:
        return GroupElement(self.group_id, self._encode_native(point), point)

    def _native(self, element: GroupElement) -> Any:
        if element.group_id != self.group_id:
            raise GroupError("element of group '{}' used in group '{}'".format(
                element.group_id.value, self.group_id.value
            ))
        if element.point is None:
            return self._decode_native(element.data)
        return element.point

    def _exponent(self, e: Scalar | int) -> int:
        if isinstance(e, Scalar):
            if e.q != self.q:
                raise GroupError("scalar from a different group")
            return e.value
        return e % self.q

    # --- Arithmetic
    def exp(self, base: GroupElement, e: Scalar | int) -> GroupElement:
        return self._wrap(self._exp_native(self._native(base), self._exponent(e)))

    def mul(self, a: GroupElement, b: GroupElement) -> GroupElement:
        return self._wrap(self._mul_native(self._native(a), self._native(b)))

    def is_identity(self, element: GroupElement) -> bool:
        return element == self.identity

    # --- Encodings
    def encode(self, element: GroupElement) -> bytes:
        return element.data

    def decode(self, data: bytes) -> GroupElement:
        if len(data) != self.element_size:
            raise GroupError("{} group elements are {} bytes, got {}".format(
                self.group_id.value, self.element_size, len(data)
            ))
        point = self._decode_native(bytes(data))
        return GroupElement(self.group_id, bytes(data), point)

    def scalar(self, value: int) -> Scalar:
        return Scalar(value % self.q, self.q)

    def encode_scalar(self, s: Scalar) -> bytes:
        return s.to_bytes(self.scalar_size)

    def decode_scalar(self, data: bytes) -> Scalar:
        if len(data) != self.scalar_size:
            raise GroupError("{} scalars are {} bytes, got {}".format(
                self.group_id.value, self.scalar_size, len(data)
            ))
        value = int.from_bytes(data, "big")
        if value >= self.q:
            raise GroupError("scalar encoding is not reduced mod q")
        return Scalar(value, self.q)

    # --- Randomness
    def scalar_random(self, rng: RandomSource) -> Scalar:
        return Scalar(rng.randrange(self.q), self.q)

    def scalar_random_nonzero(self, rng: RandomSource) -> Scalar:
        return Scalar(rng.randrange(1, self.q), self.q)

    # --- Hashes
    def h1(self, *inputs: bytes) -> Scalar:
        return Scalar(int.from_bytes(hash_h1_bytes(*inputs), "big") % self.q, self.q)

    def h1_bytes(self, *inputs: bytes) -> bytes:
        return hash_h1_bytes(*inputs)

    def h2(self, *inputs: bytes) -> bytes:
        return hash_h2(*inputs)

class ToyGroup(Group):
    element_size = 4
    scalar_size = 4

    def __init__(self) -> None:
        self.params = GroupParams(GroupId.TOY, TOY_Q, TOY_G.to_bytes(self.element_size, "big"))
        self.generator = self._wrap(TOY_G)
        self.identity = self._wrap(1)

    def __repr__(self) -> str:
        return "ToyGroup(p={}, q={}, g={})".format(TOY_P, TOY_Q, TOY_G)

    def _exp_native(self, point: int, e: int) -> int:
        return pow(point, e, TOY_P)

    def _mul_native(self, a: int, b: int) -> int:
        return a * b % TOY_P

    def _encode_native(self, point: int) -> bytes:
        return point.to_bytes(self.element_size, "big")

    def _decode_native(self, data: bytes) -> int:
        value = int.from_bytes(data, "big")
        if not 1 <= value < TOY_P or pow(value, TOY_Q, TOY_P) != 1:
            raise GroupError("{} is not in the order-{} subgroup mod {}".format(value, TOY_Q, TOY_P))
        return value

    def members(self) -> list[GroupElement]:
        return [self.exp(self.generator, e) for e in range(TOY_Q)]

class P256Group(Group):
    element_size = 33
    scalar_size = 32
    # SEC1 has a 1-byte identity; padded to keep elements fixed-width
    IDENTITY_ENCODING = bytes(33)

    def __init__(self) -> None:
        generator = NIST256p.generator
        encoded = generator.to_bytes("compressed")
        self.params = GroupParams(GroupId.PRODUCTION, NIST256p.order, encoded)
        self.generator = GroupElement(GroupId.PRODUCTION, encoded, generator)
        self.identity = GroupElement(GroupId.PRODUCTION, self.IDENTITY_ENCODING, INFINITY)

    def __repr__(self) -> str:
        return "P256Group(q={:#x})".format(self.q)

    @staticmethod
    def _is_infinity(point: Any) -> bool:
        return point is INFINITY or point == INFINITY

    def _exp_native(self, point: Any, e: int) -> Any:
        if e == 0 or self._is_infinity(point):
            return INFINITY
        return point * e

    def _mul_native(self, a: Any, b: Any) -> Any:
        if self._is_infinity(a): return b
        if self._is_infinity(b): return a
        return a + b

    def _encode_native(self, point: Any) -> bytes:
        if self._is_infinity(point):
            return self.IDENTITY_ENCODING
        return point.to_bytes("compressed")

    def _decode_native(self, data: bytes) -> Any:
        if data == self.IDENTITY_ENCODING:
            return INFINITY
        try:
            key = VerifyingKey.from_string(data, curve=NIST256p, valid_encodings=("compressed",))
        except (MalformedPointError, ValueError) as e:
            raise GroupError("not a P-256 point: {}".format(e)) from e
        return key.pubkey.point

class CountingGroup(Group):
    """Delegates to another group and tallies the operations one party performs."""

    def __init__(self, inner: Group) -> None:
        self.inner: Group = inner.inner if isinstance(inner, CountingGroup) else inner
        self.params = self.inner.params
        self.element_size = self.inner.element_size
        self.scalar_size = self.inner.scalar_size
        self.generator = self.inner.generator
        self.identity = self.inner.identity
        self.ops = OpCounts()

    def __repr__(self) -> str:
        return "CountingGroup({!r})".format(self.inner)

    def _exp_native(self, point: Any, e: int) -> Any:
        return self.inner._exp_native(point, e)

    def _mul_native(self, a: Any, b: Any) -> Any:
        return self.inner._mul_native(a, b)

    def _encode_native(self, point: Any) -> bytes:
        return self.inner._encode_native(point)

    def _decode_native(self, data: bytes) -> Any:
        return self.inner._decode_native(data)

    def exp(self, base: GroupElement, e: Scalar | int) -> GroupElement:
        self.ops.group_exp += 1
        return super().exp(base, e)

    def mul(self, a: GroupElement, b: GroupElement) -> GroupElement:
        self.ops.group_mul += 1
        return super().mul(a, b)

    def h1(self, *inputs: bytes) -> Scalar:
        self.ops.hash += 1
        return super().h1(*inputs)

    def h1_bytes(self, *inputs: bytes) -> bytes:
        self.ops.hash += 1
        return super().h1_bytes(*inputs)

    def h2(self, *inputs: bytes) -> bytes:
        self.ops.hash += 1
        return super().h2(*inputs)

GROUPS: dict[GroupId, Group] = {}

def get_group(group_id: GroupId | str) -> Group:
    try:
        gid = GroupId(group_id)
    except ValueError:
        raise GroupError("unknown group '{}'".format(group_id)) from None
    if gid not in GROUPS:
        GROUPS[gid] = ToyGroup() if gid is GroupId.TOY else P256Group()
    return GROUPS[gid]
