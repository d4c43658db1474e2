import json
from dataclasses import dataclass
from pathlib import Path

from . import DEFAULT_REGISTRY_PATH, LOGGER
from .Errors import GroupError, RegistryError
from .Group import DIGEST_SIZE, Group, GroupElement, hash_h2

TIMESTAMP_SIZE = 8
MAX_TIMESTAMP = 2 ** 64

logger = LOGGER.getChild("registry")

def encode_timestamp(t: int) -> bytes:
    if not 0 <= t < MAX_TIMESTAMP:
        raise RegistryError("timestamp {} does not fit in 64 bits".format(t))
    return t.to_bytes(TIMESTAMP_SIZE, "big")

def compute_zeta(pk_p: GroupElement, pk_d: GroupElement, t: int) -> bytes:
    return hash_h2(pk_p.data, pk_d.data, encode_timestamp(t))

@dataclass(frozen=True)
class BindingRecord:
    pk_p: GroupElement
    pk_d: GroupElement
    t: int
    zeta: bytes

    @property
    def key(self) -> tuple[bytes, bytes]:
        return (self.pk_p.data, self.pk_d.data)

    def to_json(self) -> str:
        return json.dumps({
            "pk_p": self.pk_p.hex(),
            "pk_d": self.pk_d.hex(),
            "t": self.t,
            "zeta": self.zeta.hex(),
        }, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str, group: Group) -> 'BindingRecord':
        raw = json.loads(line)
        if not isinstance(raw, dict) or set(raw) != {"pk_p", "pk_d", "t", "zeta"}:
            raise ValueError("expected keys pk_p, pk_d, t, zeta")
        t = raw["t"]
        if not isinstance(t, int) or isinstance(t, bool):
            raise ValueError("t must be an integer")
        zeta = bytes.fromhex(raw["zeta"])
        if len(zeta) != DIGEST_SIZE:
            raise ValueError("zeta must be {} bytes".format(DIGEST_SIZE))
        return cls(
            group.decode(bytes.fromhex(raw["pk_p"])),
            group.decode(bytes.fromhex(raw["pk_d"])),
            t,
            zeta,
        )

def mint_record(pk_p: GroupElement, pk_d: GroupElement, t: int, group: Group) -> BindingRecord:
    for name, key in (("pk_p", pk_p), ("pk_d", pk_d)):
        if key.group_id != group.group_id:
            raise RegistryError("{} belongs to group '{}'".format(name, key.group_id.value))
        if group.is_identity(key):
            raise RegistryError("{} is the identity element".format(name))
    return BindingRecord(pk_p, pk_d, t, compute_zeta(pk_p, pk_d, t))

def verify_record(rec: BindingRecord) -> bool:
    try:
        return compute_zeta(rec.pk_p, rec.pk_d, rec.t) == rec.zeta
    except RegistryError:
        return False

class Registry:
    def __init__(self, group: Group, storage_path: Path | None = None) -> None:
        self.group: Group = group
        self.storage_path: Path = Path(storage_path) if storage_path else DEFAULT_REGISTRY_PATH
        self.records: dict[tuple[bytes, bytes], BindingRecord] = {}
        # Counts every access; sessions must leave it untouched
        self.accesses: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Registry):
            return NotImplemented
        return self.group.group_id == other.group.group_id and self.records == other.records

    # --- Records
    def register(self, pk_p: GroupElement, pk_d: GroupElement, t: int) -> BindingRecord:
        self.accesses += 1
        rec = mint_record(pk_p, pk_d, t, self.group)
        if rec.key in self.records:
            raise RegistryError("({}, {}) already bound".format(pk_p.hex(), pk_d.hex()))
        self.records[rec.key] = rec
        logger.debug("Bound pk_p={} pk_d={} zeta={}".format(pk_p.hex(), pk_d.hex(), rec.zeta.hex()))
        return rec

    def get_record(self, pk_p: GroupElement, pk_d: GroupElement) -> BindingRecord | None:
        self.accesses += 1
        return self.records.get((pk_p.data, pk_d.data))

    def get_all_records(self) -> list[BindingRecord]:
        self.accesses += 1
        return list(self.records.values())

    # --- Persistence
    def save(self, path: Path | None = None) -> Path:
        path = Path(path) if path else self.storage_path
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [rec.to_json() + "\n" for rec in self.records.values()]
        path.write_text("".join(lines))
        logger.info("Saved {} binding record(s) to {}".format(len(lines), path))
        return path

    @classmethod
    def load(cls, path: Path, group: Group) -> 'Registry':
        path = Path(path)
        registry = cls(group, path)
        with open(path, "r") as file:
            for index, line in enumerate(file.read().splitlines()):
                try:
                    rec = BindingRecord.from_json(line, group)
                except (ValueError, TypeError, GroupError) as e:
                    raise RegistryError("corrupt record: {}".format(e), index) from e
                if not verify_record(rec):
                    raise RegistryError("zeta does not match its inputs", index)
                if rec.key in registry.records:
                    raise RegistryError("duplicate binding", index)
                registry.records[rec.key] = rec
        return registry

def load_registry(path: Path, group: Group) -> Registry:
    return Registry.load(path, group)

def save_registry(registry: Registry, path: Path | None = None) -> Path:
    return registry.save(path)
