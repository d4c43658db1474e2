import csv
import json
import math
from pathlib import Path
from typing import Any, TextIO

from . import LOGGER
from .Adversary import AdversaryKind
from .Config import OP_CLASSES
from .Errors import ReportIntegrityError
from .Simulator import HONEST, CampaignReport, aggregate

CSV_COLUMNS = ["index", "kind", "accepted", "auth_latency_ms", "key_ms"] + [
    "{}_{}".format(party.lower(), op) for party in ("P", "D") for op in OP_CLASSES
]

logger = LOGGER.getChild("report")

def report_to_json(report: CampaignReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"

def write_json(report: CampaignReport, path: Path) -> Path:
    with open(path, "w") as file:
        file.write(report_to_json(report))
    logger.info("Wrote {}".format(path))
    return path

def load_report(path: Path) -> CampaignReport:
    with open(path, "r") as file:
        return CampaignReport.from_dict(json.load(file))

def csv_rows(report: CampaignReport) -> list[list[Any]]:
    rows = []
    for s in report.sessions:
        row = [s.index, s.kind, int(s.accepted), s.auth_latency_ms, s.key_establish_ms if s.key_establish_ms is not None else ""]
        for party in ("P", "D"):
            counts = s.op_counts[party].to_dict()
            row.extend(counts[op] for op in OP_CLASSES)
        rows.append(row)
    return rows

def write_csv(report: CampaignReport, out: Path | TextIO) -> None:
    if isinstance(out, Path):
        with open(out, "w", newline="") as file:
            write_csv(report, file)
        logger.info("Wrote {}".format(out))
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(csv_rows(report))

def _fmt(value: float | None, pattern: str = "{:.3f}") -> str:
    return "n/a" if value is None else pattern.format(value)

def format_summary(report: CampaignReport) -> str:
    agg = report.aggregates
    lines = [
        "Sessions:           {} ({} honest / {} adversarial)".format(
            agg["sessions"], agg["honest_sessions"], agg["adversarial_sessions"]
        ),
        "Honest acceptance:  {}".format(_fmt(agg["honest_acceptance"], "{:.2%}")),
        "Key agreement:      {}".format(_fmt(agg["key_agreement"], "{:.2%}")),
        "FAR:                {}".format(_fmt(agg["far"], "{:.4%}")),
        "Mean auth latency:  {} ms".format(_fmt(agg["mean_auth_latency_ms"])),
        "P95 auth latency:   {} ms".format(_fmt(agg["p95_auth_latency_ms"])),
        "Mean key time:      {} ms".format(_fmt(agg["mean_key_establish_ms"])),
        "Energy proxy:       {}".format(_fmt(agg["energy_proxy"], "{:.1f}")),
    ]
    return "\n".join(lines)

def format_table(report: CampaignReport) -> str:
    header = "{:<26}{:>10}{:>10}{:>10}".format("kind", "attempted", "accepted", "far")
    lines = [header, "-" * len(header)]
    agg = report.aggregates
    lines.append("{:<26}{:>10}{:>10}{:>10}".format(
        HONEST, agg["honest_sessions"], agg["honest_accepted"], "-"
    ))
    for kind in AdversaryKind:
        row = agg["far_by_kind"][kind.value]
        lines.append("{:<26}{:>10}{:>10}{:>10}".format(
            kind.value, row["attempted"], row["accepted"], _fmt(row["far"], "{:.4f}")
        ))
    return "\n".join(lines) + "\n\n" + format_summary(report)

def _compare(path: str, stored: Any, derived: Any) -> None:
    if isinstance(derived, dict):
        if not isinstance(stored, dict) or set(stored) != set(derived):
            raise ReportIntegrityError(path, stored, derived)
        for key in derived:
            _compare("{}.{}".format(path, key), stored[key], derived[key])
        return
    if isinstance(derived, float) and isinstance(stored, (int, float)) and not isinstance(stored, bool):
        if math.isclose(stored, derived, rel_tol=1e-9, abs_tol=1e-9):
            return
        raise ReportIntegrityError(path, stored, derived)
    if stored != derived or type(stored) is bool and type(derived) is not bool:
        raise ReportIntegrityError(path, stored, derived)

def verify_report(report: CampaignReport) -> dict[str, Any]:
    """Recompute every aggregate from the session rows; raise on the first mismatch."""
    derived = aggregate(report.config, report.sessions)
    stored = report.aggregates
    if not isinstance(stored, dict) or set(stored) != set(derived):
        raise ReportIntegrityError("aggregates", sorted(stored) if isinstance(stored, dict) else stored, sorted(derived))
    for key in sorted(derived):
        _compare(key, stored[key], derived[key])
    return derived
