from dataclasses import dataclass, field
from enum import Enum

from .Errors import IdentityError
from .Group import DIGEST_SIZE, Group, GroupElement, RandomSource, Scalar, hash_h2

PROVISION_TAG = b"przk-bind/provision"
RETRY_COUNTER_SIZE = 4

class IdentitySource(str, Enum):
    SIMULATED_PUF = "simulated_puf"
    FIXED = "fixed"

@dataclass(frozen=True)
class PhysicalIdentity:
    s_p: bytes = field(repr=False)
    source: IdentitySource = IdentitySource.SIMULATED_PUF

    def __post_init__(self) -> None:
        if len(self.s_p) != DIGEST_SIZE:
            raise IdentityError("S_p must be {} bytes, got {}".format(DIGEST_SIZE, len(self.s_p)))

    def read(self) -> bytes:
        # Noise-free: every read returns the same response
        return self.s_p

@dataclass(frozen=True)
class EntityKeys:
    h_sp: Scalar
    pk_p: GroupElement

    def check(self, group: Group) -> bool:
        return group.exp(group.generator, self.h_sp) == self.pk_p

@dataclass(frozen=True)
class TwinKeyPair:
    sk_d: Scalar = field(repr=False)
    pk_d: GroupElement

    def __post_init__(self) -> None:
        if self.sk_d.is_zero():
            raise IdentityError("sk_d must be nonzero")

    def check(self, group: Group) -> bool:
        return group.exp(group.generator, self.sk_d) == self.pk_d

def provision_identity(seed: bytes | str, source: IdentitySource = IdentitySource.SIMULATED_PUF) -> PhysicalIdentity:
    if isinstance(seed, str):
        seed = seed.encode()
    if not seed:
        raise IdentityError("provisioning seed must be nonempty")
    return PhysicalIdentity(hash_h2(PROVISION_TAG, seed), source)

def entity_keys_from_scalar(h_sp: Scalar, group: Group) -> EntityKeys:
    if h_sp.is_zero():
        raise IdentityError("H1(S_p) is zero")
    return EntityKeys(h_sp, group.exp(group.generator, h_sp))

def derive_entity_keys(identity: PhysicalIdentity, group: Group) -> EntityKeys:
    s_p = identity.read()
    h_sp = group.h1(s_p)
    counter = 0
    # h_sp = 0 would make pk_p the identity; re-derive with a counter suffix
    while h_sp.is_zero():
        counter += 1
        h_sp = group.h1(s_p, counter.to_bytes(RETRY_COUNTER_SIZE, "big"))
    return entity_keys_from_scalar(h_sp, group)

def twin_keys_from_scalar(sk_d: Scalar, group: Group) -> TwinKeyPair:
    return TwinKeyPair(sk_d, group.exp(group.generator, sk_d))

def twin_keygen(group: Group, rng: RandomSource) -> TwinKeyPair:
    return twin_keys_from_scalar(group.scalar_random_nonzero(rng), group)
