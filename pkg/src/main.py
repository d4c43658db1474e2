#!/usr/bin/env python3
import os
import sys
import json
import random
import secrets
import logging
import multiprocessing
from pathlib import Path
from argparse import ArgumentParser, Namespace
from lib import DEFAULT_REGISTRY_PATH, LOGGER, setup_logging
from lib.Errors import ConfigError, PrzkError, RegistryError, ReportIntegrityError
from lib.Group import GroupId, get_group, hash_h2
from lib.Identity import IdentitySource, PhysicalIdentity, derive_entity_keys, provision_identity, twin_keygen, twin_keys_from_scalar
from lib.Registry import Registry, load_registry, mint_record
from lib.Protocol import PhysicalSession, SessionMode, TwinSession, Phase
from lib.Channel import VirtualChannel
from lib.Config import CampaignConfig, default_config_path, parse_latency
from lib.Simulator import run_campaign, run_far_sweep
from lib.Report import format_table, load_report, report_to_json, verify_report, write_csv, write_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_VERIFY = 3

TWIN_KEYGEN_TAG = b"przk-bind/twin-keygen"
SECRET_MODE = 0o600

class VerificationFailed(PrzkError):
    pass

class CliParser(ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "[ERROR]: {}\n".format(message))

# --- Key files
def write_key_file(path: Path, data: dict, secret: bool = False) -> Path:
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if not secret:
        path.write_text(text)
        return path
    # An existing file keeps its old mode on open, so fchmod before any write
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, SECRET_MODE)
    with os.fdopen(fd, "w") as file:
        os.fchmod(file.fileno(), SECRET_MODE)
        file.write(text)
    return path

def read_key_file(path: Path) -> dict:
    with open(path, "r") as file:
        return json.load(file)

def cmd_keygen(args: Namespace) -> int:
    group = get_group(args.group)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    identity = provision_identity(args.seed)
    entity = derive_entity_keys(identity, group)
    twin = twin_keygen(group, random.Random(hash_h2(TWIN_KEYGEN_TAG, args.seed.encode())))
    files = [
        (write_key_file(out / "entity.pub.json", {"group": group.group_id.value, "pk_p": entity.pk_p.hex()}), False),
        (write_key_file(out / "entity.secret.json", {
            "group": group.group_id.value, "s_p": identity.s_p.hex(), "source": identity.source.value
        }, secret=True), True),
        (write_key_file(out / "twin.pub.json", {"group": group.group_id.value, "pk_d": twin.pk_d.hex()}), False),
        (write_key_file(out / "twin.secret.json", {
            "group": group.group_id.value, "sk_d": group.encode_scalar(twin.sk_d).hex()
        }, secret=True), True),
    ]
    for path, secret in files:
        print("{}{}".format(path, "  (SECRET, mode 0600)" if secret else ""))
    LOGGER.warning("Secret files hold S_p and sk_d; keep them off shared storage")
    return EXIT_OK

def cmd_register(args: Namespace) -> int:
    group = get_group(args.group)
    pk_p = group.decode(bytes.fromhex(read_key_file(Path(args.entity))["pk_p"]))
    pk_d = group.decode(bytes.fromhex(read_key_file(Path(args.twin))["pk_d"]))
    path = Path(args.registry)
    registry = load_registry(path, group) if path.exists() else Registry(group, path)
    record = registry.register(pk_p, pk_d, args.timestamp)
    registry.save()
    print(record.to_json())
    return EXIT_OK

def cmd_authenticate(args: Namespace) -> int:
    group = get_group(args.group)
    keys = Path(args.keys)
    entity_secret = read_key_file(keys / "entity.secret.json")
    identity = PhysicalIdentity(bytes.fromhex(entity_secret["s_p"]), IdentitySource(entity_secret["source"]))
    entity = derive_entity_keys(identity, group)
    twin = twin_keys_from_scalar(group.decode_scalar(bytes.fromhex(read_key_file(keys / "twin.secret.json")["sk_d"])), group)
    registry_path = Path(args.registry)
    if registry_path.exists():
        record = load_registry(registry_path, group).get_record(entity.pk_p, twin.pk_d)
        if record is None:
            raise RegistryError("no binding for these keys in {}".format(registry_path))
    else:
        LOGGER.info("No registry at {}, minting a binding at t={}".format(registry_path, args.timestamp))
        record = mint_record(entity.pk_p, twin.pk_d, args.timestamp, group)
    rng = random.Random(args.seed) if args.seed is not None else secrets.SystemRandom()
    mode = SessionMode(args.mode)
    d = TwinSession(group, twin, record.pk_p, record.zeta, rng, mode)
    p = PhysicalSession(group, entity, record.pk_d, record.zeta, rng, mode)
    trace = VirtualChannel(group, parse_latency(args.latency), rng).run(d, p)
    for delivery in trace.deliveries:
        print("t={:8.3f}ms  {} -> {}  {}".format(delivery.delivered_at, delivery.sender, delivery.recipient, delivery.tag.name))
    for party in (d, p):
        print("{}: {}".format(party.name, " -> ".join(phase.value for phase, _ in party.history)))
    print(json.dumps({"D": d.transcript.to_dict(group), "P": p.transcript.to_dict(group)}, indent=2, sort_keys=True))
    if d.phase is not Phase.KEY_ESTABLISHED or p.phase is not Phase.KEY_ESTABLISHED or d.key != p.key:
        raise VerificationFailed("authentication failed: D={}, P={}".format(d.verdict().reason.name, p.verdict().reason.name))
    print("[OK]: session key agreed")
    return EXIT_OK

# --- Campaigns
def campaign_config(args: Namespace) -> CampaignConfig:
    path = args.config or default_config_path()
    data = {}
    if path is not None:
        data = CampaignConfig.from_json(Path(path)).to_dict()
    overrides = {
        "sessions": args.sessions,
        "adv_ratio": args.adv_ratio,
        "latency_range_ms": args.latency,
        "group_id": args.group,
        "rng_seed": args.seed,
        "mode": args.mode,
        "parallel": args.parallel,
    }
    data.update({key: value for key, value in overrides.items() if value is not None})
    return CampaignConfig.from_dict(data)

def cmd_simulate(args: Namespace) -> int:
    config = campaign_config(args)
    report = run_campaign(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(report, out / "{}.json".format(args.name))
    write_csv(report, out / "{}.csv".format(args.name))
    print(format_table(report))
    return EXIT_OK

def cmd_report(args: Namespace) -> int:
    report = load_report(Path(args.input))
    verify_report(report)
    match args.format:
        case "json":
            sys.stdout.write(report_to_json(report))
        case "csv":
            write_csv(report, sys.stdout)
        case "table":
            print(format_table(report))
    return EXIT_OK

def cmd_sweep(args: Namespace) -> int:
    config = campaign_config(args)
    try:
        attempts = [int(a) for a in args.attempts.split(",")]
    except ValueError:
        raise ConfigError("attempts", "expected comma separated integers") from None
    print("{:>10}{:>10}{:>12}".format("attempts", "accepted", "far"))
    for row in run_far_sweep(config, attempts):
        print("{:>10}{:>10}{:>12.4%}".format(row["attempts"], row["accepted"], row["far"]))
    return EXIT_OK

def add_campaign_flags(parser: ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="Campaign config JSON (default: $PRZKBIND_CONFIG)")
    parser.add_argument("--sessions", type=int, default=None, help="Number of sessions")
    parser.add_argument("--adv-ratio", type=float, default=None, help="Fraction of adversarial sessions")
    parser.add_argument("--latency", type=str, default=None, help="Per-message latency low:high in ms")
    parser.add_argument("--seed", type=int, default=None, help="Campaign rng seed")
    parser.add_argument("--group", choices=[g.value for g in GroupId], default=None)
    parser.add_argument("--mode", choices=[m.value for m in SessionMode], default=None)
    parser.add_argument("--parallel", type=int, default=None, help="Worker processes")

def build_parser() -> CliParser:
    parser = CliParser(description="PRZK-Bind physical / digital twin authentication")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings only")
    commands = parser.add_subparsers(dest="command", required=True)

    keygen = commands.add_parser("keygen", help="Provision entity and twin keys")
    keygen.add_argument("--seed", type=str, required=True, help="Provisioning seed")
    keygen.add_argument("--group", choices=[g.value for g in GroupId], default=GroupId.PRODUCTION.value)
    keygen.add_argument("--out", type=Path, default=Path("."), help="Output directory")
    keygen.set_defaults(handler=cmd_keygen)

    register = commands.add_parser("register", help="Bind an entity key to a twin key")
    register.add_argument("--entity", type=Path, required=True, help="entity.pub.json")
    register.add_argument("--twin", type=Path, required=True, help="twin.pub.json")
    register.add_argument("--timestamp", type=int, required=True)
    register.add_argument("--registry", type=Path, default=DEFAULT_REGISTRY_PATH)
    register.add_argument("--group", choices=[g.value for g in GroupId], default=GroupId.PRODUCTION.value)
    register.set_defaults(handler=cmd_register)

    authenticate = commands.add_parser("authenticate", help="Run one session between local P and D")
    authenticate.add_argument("--keys", type=Path, default=Path("."), help="Directory written by keygen")
    authenticate.add_argument("--registry", type=Path, default=DEFAULT_REGISTRY_PATH)
    authenticate.add_argument("--timestamp", type=int, default=1700000000, help="Used when no registry exists")
    authenticate.add_argument("--latency", type=str, default="0")
    authenticate.add_argument("--seed", type=int, default=None)
    authenticate.add_argument("--group", choices=[g.value for g in GroupId], default=GroupId.PRODUCTION.value)
    authenticate.add_argument("--mode", choices=[m.value for m in SessionMode], default=SessionMode.INTERACTIVE.value)
    authenticate.set_defaults(handler=cmd_authenticate)

    simulate = commands.add_parser("simulate", help="Run a session campaign")
    add_campaign_flags(simulate)
    simulate.add_argument("--out", type=Path, default=Path("."), help="Output directory")
    simulate.add_argument("--name", type=str, default="report", help="Report file stem")
    simulate.set_defaults(handler=cmd_simulate)

    report = commands.add_parser("report", help="Check and print a campaign report")
    report.add_argument("--in", dest="input", type=Path, required=True)
    report.add_argument("--format", choices=["csv", "json", "table"], default="table")
    report.set_defaults(handler=cmd_report)

    sweep = commands.add_parser("sweep", help="FAR over several adversarial attempt counts")
    add_campaign_flags(sweep)
    sweep.add_argument("--attempts", type=str, default="100,500,1000,2000")
    sweep.set_defaults(handler=cmd_sweep)
    return parser

def main(argv: list[str] | None = None) -> int:
    # Multiprocessing setup
    if not multiprocessing.get_start_method(True):
        multiprocessing.set_start_method("spawn")
    args = build_parser().parse_args(argv)
    setup_logging(logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO)
    try:
        return args.handler(args)
    except ConfigError as e:
        LOGGER.error("invalid configuration: {}".format(e))
        return EXIT_USAGE
    except (VerificationFailed, RegistryError, ReportIntegrityError) as e:
        LOGGER.error(str(e))
        return EXIT_VERIFY
    except (PrzkError, OSError, ValueError, KeyError) as e:
        LOGGER.error("{}: {}".format(type(e).__name__, e))
        return EXIT_RUNTIME

if __name__ == "__main__":
    # Prevents argparse error on multiprocessing in prod build
    multiprocessing.freeze_support()
    sys.exit(main())
