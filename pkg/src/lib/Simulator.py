import math
import multiprocessing
import random
import time
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from . import LOGGER
from .Adversary import (
    AdversaryKind, AttackContext, AttackOutcome, attack_impersonate_twin, attack_kci, attack_mitm_tamper,
    attack_replay
)
from .Channel import ChannelTrace, VirtualChannel
from .Config import CampaignConfig
from .Errors import PrzkError, SimulationError
from .Group import Group, OpCounts, get_group
from .Identity import EntityKeys, PhysicalIdentity, TwinKeyPair, derive_entity_keys, provision_identity, twin_keygen
from .Protocol import Phase, PhysicalSession, Transcript, TwinSession
from .Registry import BindingRecord, Registry, verify_record

HONEST = "honest"
PARTIES = ("P", "D")
P95 = 95

logger = LOGGER.getChild("simulator")

@dataclass
class SessionMetrics:
    index: int
    kind: str
    accepted: bool
    keys_agree: bool | None
    auth_latency_ms: float
    key_establish_ms: float | None
    messages: int
    reason: str
    op_counts: dict[str, OpCounts]
    wall_ms: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "kind": self.kind,
            "accepted": self.accepted,
            "keys_agree": self.keys_agree,
            "auth_latency_ms": self.auth_latency_ms,
            "key_establish_ms": self.key_establish_ms,
            "messages": self.messages,
            "reason": self.reason,
            "op_counts": {party: ops.to_dict() for party, ops in self.op_counts.items()},
            "wall_ms": self.wall_ms,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'SessionMetrics':
        return cls(
            index=int(data["index"]),
            kind=str(data["kind"]),
            accepted=bool(data["accepted"]),
            keys_agree=data["keys_agree"],
            auth_latency_ms=float(data["auth_latency_ms"]),
            key_establish_ms=data["key_establish_ms"],
            messages=int(data["messages"]),
            reason=str(data["reason"]),
            op_counts={party: OpCounts.from_dict(ops) for party, ops in data["op_counts"].items()},
            wall_ms=data.get("wall_ms"),
        )

@dataclass
class CampaignReport:
    config: CampaignConfig
    sessions: list[SessionMetrics]
    aggregates: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        config = self.config.to_dict()
        # Worker count never changes a metric, so reports stay identical across it
        config.pop("parallel")
        return {
            "config": config,
            "aggregates": self.aggregates,
            "sessions": [s.to_dict() for s in self.sessions],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'CampaignReport':
        return cls(
            config=CampaignConfig.from_dict(data["config"]),
            sessions=[SessionMetrics.from_dict(s) for s in data["sessions"]],
            aggregates=data["aggregates"],
        )

@dataclass(frozen=True)
class Binding:
    """One provisioned (P, D) pair and its CA record, fixed for a campaign."""
    group: Group
    identity: PhysicalIdentity
    entity: EntityKeys
    twin: TwinKeyPair
    record: BindingRecord
    registry: Registry

def provision_binding(config: CampaignConfig) -> Binding:
    group = get_group(config.group_id)
    identity = provision_identity(config.entity_seed)
    entity = derive_entity_keys(identity, group)
    twin = twin_keygen(group, random.Random(config.rng_seed))
    registry = Registry(group)
    record = registry.register(entity.pk_p, twin.pk_d, config.timestamp)
    # Both parties recompute zeta before first use
    if not verify_record(record):
        raise SimulationError("binding record does not verify")
    return Binding(group, identity, entity, twin, record, registry)

# --- Metrics helpers
def energy_proxy(op_counts: OpCounts, energy_weights: dict[str, float]) -> float:
    return float(sum(count * energy_weights.get(name, 0.0) for name, count in op_counts.to_dict().items()))

def far(report: CampaignReport | dict[str, Any]) -> float | None:
    sessions = report.sessions if isinstance(report, CampaignReport) else [
        SessionMetrics.from_dict(s) for s in report["sessions"]
    ]
    adversarial = [s for s in sessions if s.kind != HONEST]
    if not adversarial:
        return None
    return sum(s.accepted for s in adversarial) / len(adversarial)

def _decision_time(trace: ChannelTrace, name: str) -> float:
    t = trace.entered(name, Phase.IDENTITY_VERIFIED, Phase.IDENTITY_SENT, Phase.FAILED)
    return t if t is not None else trace.finished_at

def _ops(sessions: dict[str, Any]) -> dict[str, OpCounts]:
    return {party: sessions[party].ops.copy() for party in PARTIES}

# --- Sessions
def _new_pair(config: CampaignConfig, binding: Binding, rng: random.Random) -> tuple[TwinSession, PhysicalSession]:
    zeta = binding.record.zeta
    twin = TwinSession(binding.group, binding.twin, binding.record.pk_p, zeta, rng, config.mode)
    physical = PhysicalSession(
        binding.group, binding.entity, binding.record.pk_d, zeta, rng, config.mode, config.fresh_challenge
    )
    return twin, physical

def _channel(config: CampaignConfig, binding: Binding, rng: random.Random) -> VirtualChannel:
    return VirtualChannel(binding.group, config.latency_range_ms, rng, op_time_ms=config.op_time_ms,
                          timeout_ms=config.timeout_ms)

def record_transcript(config: CampaignConfig, binding: Binding, rng: random.Random) -> Transcript:
    twin, physical = _new_pair(config, binding, rng)
    VirtualChannel(binding.group).run(twin, physical)
    return physical.transcript

def attack_context(kind: AdversaryKind, config: CampaignConfig, binding: Binding, rng: random.Random) -> AttackContext:
    recorded: tuple[Transcript, ...] = ()
    if kind is AdversaryKind.REPLAY:
        recorded = (record_transcript(config, binding, rng),)
    compromised = binding.twin.sk_d if kind is AdversaryKind.KCI_IMPERSONATE_PHYSICAL else None
    return AttackContext(kind, binding.record.pk_p, binding.record.pk_d, binding.record.zeta, recorded, compromised)

def run_session(
config: CampaignConfig,
kind: str | AdversaryKind,
rng: random.Random,
binding: Binding | None = None,
index: int = 0
) -> SessionMetrics:
    binding = binding or provision_binding(config)
    kind = HONEST if kind == HONEST else AdversaryKind(kind)
    ctx = attack_context(kind, config, binding, rng) if kind != HONEST else None
    twin, physical = _new_pair(config, binding, rng)
    channel = _channel(config, binding, rng)
    started = time.perf_counter()
    outcome: AttackOutcome | None = None
    keys_agree: bool | None = None
    match kind:
        case "honest":
            trace = channel.run(twin, physical)
            established = twin.phase is Phase.KEY_ESTABLISHED and physical.phase is Phase.KEY_ESTABLISHED
            keys_agree = established and twin.key == physical.key
            accepted = bool(keys_agree)
            honest_sides = [twin.name, physical.name]
            ops = _ops({"P": physical, "D": twin})
            reason = twin.verdict().reason.name
        case AdversaryKind.REPLAY:
            assert ctx is not None
            outcome = attack_replay(ctx, physical, rng, channel)
            honest_sides = [physical.name]
        case AdversaryKind.IMPERSONATE_TWIN:
            assert ctx is not None
            outcome = attack_impersonate_twin(ctx, rng, physical, channel)
            honest_sides = [physical.name]
        case AdversaryKind.KCI_IMPERSONATE_PHYSICAL:
            assert ctx is not None
            outcome = attack_kci(ctx, rng, twin, channel)
            honest_sides = [twin.name]
        case AdversaryKind.MITM_TAMPER:
            assert ctx is not None
            outcome = attack_mitm_tamper(ctx, rng, twin, physical, channel)
            honest_sides = [twin.name, physical.name]
    wall_ms = (time.perf_counter() - started) * 1000.0 if config.measure_wall_clock else None
    if outcome is not None:
        trace = outcome.trace
        accepted = outcome.accepted
        keys_agree = outcome.keys_agree
        reason = outcome.verdict.reason.name
        # Adversary-played sides report their own op counts under the role name
        ops = {"P": physical.ops.copy(), "D": twin.ops.copy()}
        if kind in (AdversaryKind.REPLAY, AdversaryKind.IMPERSONATE_TWIN):
            ops["D"] = OpCounts()
        elif kind is AdversaryKind.KCI_IMPERSONATE_PHYSICAL:
            ops["P"] = OpCounts()
    key_times = [trace.entered(name, Phase.KEY_ESTABLISHED) for name in honest_sides]
    key_establish = max(key_times) if key_times and None not in key_times else None
    return SessionMetrics(
        index=index,
        kind=kind.value if isinstance(kind, AdversaryKind) else kind,
        accepted=accepted,
        keys_agree=keys_agree,
        auth_latency_ms=max(_decision_time(trace, name) for name in honest_sides),
        key_establish_ms=key_establish,
        messages=len(trace.deliveries),
        reason=reason,
        op_counts=ops,
        wall_ms=wall_ms,
    )

# --- Campaigns
def adversarial_count(config: CampaignConfig) -> int:
    # Rounded first so 5000 * 0.1 is exactly 500
    return math.ceil(round(config.sessions * config.adv_ratio, 9))

def mix_counts(config: CampaignConfig, total: int) -> dict[AdversaryKind, int]:
    weights = {kind: config.adversary_mix.get(kind, 0.0) for kind in AdversaryKind}
    norm = sum(weights.values())
    if total == 0 or norm <= 0:
        return {kind: 0 for kind in AdversaryKind}
    exact = {kind: total * w / norm for kind, w in weights.items()}
    counts = {kind: math.floor(x) for kind, x in exact.items()}
    # Largest remainder, ties broken by declaration order
    leftover = total - sum(counts.values())
    for kind in sorted(AdversaryKind, key=lambda k: exact[k] - counts[k], reverse=True)[:leftover]:
        counts[kind] += 1
    return counts

def allocate_kinds(config: CampaignConfig) -> list[str]:
    n_adv = adversarial_count(config)
    order = np.random.default_rng(config.rng_seed).permutation(config.sessions)
    kinds = [HONEST] * config.sessions
    queue = [kind.value for kind, count in mix_counts(config, n_adv).items() for _ in range(count)]
    for position, kind in zip(order[:n_adv], queue):
        kinds[int(position)] = kind
    return kinds

def session_seeds(config: CampaignConfig) -> list[int]:
    children = np.random.SeedSequence(config.rng_seed).spawn(config.sessions)
    return [int.from_bytes(child.generate_state(2, dtype=np.uint64).tobytes(), "big") for child in children]

_BINDINGS: dict[tuple[str, str, int, int], Binding] = {}

def binding_key(config: CampaignConfig) -> tuple[str, str, int, int]:
    return (config.group_id.value, config.entity_seed, config.rng_seed, config.timestamp)

def _binding_for(config: CampaignConfig) -> Binding:
    key = binding_key(config)
    if key not in _BINDINGS:
        _BINDINGS[key] = provision_binding(config)
    return _BINDINGS[key]

def _run_task(task: tuple[CampaignConfig, int, str, int]) -> SessionMetrics:
    config, index, kind, seed = task
    try:
        return run_session(config, kind, random.Random(seed), _binding_for(config), index)
    except SimulationError as e:
        if e.index is None:
            raise type(e)(str(e), index) from e
        raise
    except PrzkError as e:
        raise SimulationError(str(e), index) from e

def aggregate(config: CampaignConfig, sessions: list[SessionMetrics]) -> dict[str, Any]:
    honest = [s for s in sessions if s.kind == HONEST]
    adversarial = [s for s in sessions if s.kind != HONEST]
    latencies = np.array([s.auth_latency_ms for s in honest], dtype=float)
    key_times = np.array([s.key_establish_ms for s in honest if s.key_establish_ms is not None], dtype=float)
    totals = OpCounts()
    for s in sessions:
        for ops in s.op_counts.values():
            totals = totals + ops
    by_kind = {}
    for kind in AdversaryKind:
        rows = [s for s in adversarial if s.kind == kind.value]
        accepted = sum(s.accepted for s in rows)
        by_kind[kind.value] = {
            "attempted": len(rows),
            "accepted": accepted,
            "far": accepted / len(rows) if rows else None,
        }
    honest_accepted = sum(s.accepted for s in honest)
    adversarial_accepted = sum(s.accepted for s in adversarial)
    return {
        "sessions": len(sessions),
        "honest_sessions": len(honest),
        "adversarial_sessions": len(adversarial),
        "honest_accepted": honest_accepted,
        "honest_acceptance": honest_accepted / len(honest) if honest else None,
        "key_agreement": sum(bool(s.keys_agree) for s in honest) / len(honest) if honest else None,
        "mean_auth_latency_ms": float(np.mean(latencies)) if latencies.size else None,
        "p95_auth_latency_ms": float(np.percentile(latencies, P95)) if latencies.size else None,
        "mean_key_establish_ms": float(np.mean(key_times)) if key_times.size else None,
        "adversarial_accepted": adversarial_accepted,
        "far": adversarial_accepted / len(adversarial) if adversarial else None,
        "far_by_kind": by_kind,
        "op_totals": totals.to_dict(),
        "energy_proxy": energy_proxy(totals, config.energy_weights),
    }

def run_campaign(config: CampaignConfig) -> CampaignReport:
    config.validate()
    binding = _binding_for(config)
    accesses = binding.registry.accesses
    kinds = allocate_kinds(config)
    tasks = [(config, index, kind, seed) for index, (kind, seed) in enumerate(zip(kinds, session_seeds(config)))]
    logger.info("Running {} sessions ({} adversarial) in the {} group".format(
        config.sessions, adversarial_count(config), config.group_id.value
    ))
    if config.parallel > 1:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(config.parallel) as pool:
            sessions = pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (config.parallel * 8)))
    else:
        sessions = [_run_task(task) for task in tasks]
    # Workers of a parallel run provision their own bindings, so this only covers serial runs
    if binding.registry.accesses != accesses:
        raise SimulationError("the registry was accessed during the session loop")
    report = CampaignReport(config, sessions, aggregate(config, sessions))
    logger.info("Campaign done: honest acceptance {}, FAR {}".format(
        report.aggregates["honest_acceptance"], report.aggregates["far"]
    ))
    return report

def run_far_sweep(config: CampaignConfig, attempts: list[int]) -> list[dict[str, Any]]:
    rows = []
    for count in attempts:
        # FAR only depends on the adversarial sessions
        sweep = replace(config, sessions=count, adv_ratio=1.0).validate()
        report = run_campaign(sweep)
        rows.append({
            "attempts": count,
            "accepted": report.aggregates["adversarial_accepted"],
            "far": report.aggregates["far"],
            "far_by_kind": report.aggregates["far_by_kind"],
        })
    return rows
