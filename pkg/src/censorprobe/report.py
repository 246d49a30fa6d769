"""Verdict aggregation into the summary-table format, plus JSON
serialization (emit/load) for every domain type."""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal

from .dataset import CleaningReport, RemovalReason
from .emulator import SessionTranscript
from .model import (
    DnsObservation,
    DnsOutcome,
    HttpObservation,
    Mechanism,
    ResolverSpec,
    TargetUrl,
    TcpObservation,
    TcpResult,
    Verdict,
)
from .probe import TargetProbeResult

MECHANISM_LABELS = {
    Mechanism.DnsInjection: "DNS",
    Mechanism.IpBlock: "IP",
    Mechanism.UrlKeyword: "URL-keyword",
    Mechanism.Http302Redirect: "HTTP (302)",
    Mechanism.Http200Injection: "HTTP (200)",
}

MECHANISM_ORDER = [
    Mechanism.DnsInjection,
    Mechanism.IpBlock,
    Mechanism.UrlKeyword,
    Mechanism.Http302Redirect,
    Mechanism.Http200Injection,
]


class EmptyCampaign(ValueError):
    pass


def _percent(count: int, total: int) -> Decimal:
    return (Decimal(count) * 100 / Decimal(total)).quantize(
        Decimal("0.01"), rounding=ROUND_HALF_EVEN
    )


@dataclass
class RunReport:
    total: int
    counts: dict[Mechanism, int]
    percents: dict[Mechanism, Decimal]
    blocked_total: int
    blocked_percent: Decimal
    inconclusive: int = 0
    error_logged: int = 0


def aggregate(verdicts: list[Verdict], total: int, error_logged: int = 0) -> RunReport:
    """Count affected sites per mechanism; percents are count/total*100
    rounded half-even to two decimals. Error-logged targets must already
    be excluded from verdicts."""
    if total == 0:
        raise EmptyCampaign("total of zero targets")
    if total < len(verdicts):
        raise ValueError("total smaller than verdict count")
    counts = {m: 0 for m in MECHANISM_ORDER}
    blocked = 0
    inconclusive = 0
    for v in verdicts:
        if v.mechanisms:
            blocked += 1
        if v.inconclusive:
            inconclusive += 1
        for m in v.mechanisms:
            counts[m] += 1
    return RunReport(
        total=total,
        counts=counts,
        percents={m: _percent(c, total) for m, c in counts.items()},
        blocked_total=blocked,
        blocked_percent=_percent(blocked, total),
        inconclusive=inconclusive,
        error_logged=error_logged,
    )


def render_table(report: RunReport) -> str:
    """Fixed-column text table, one row per mechanism plus a Total row."""
    rows = [("Mechanism", "No. of Affected Sites", "Percent")]
    for m in MECHANISM_ORDER:
        rows.append((MECHANISM_LABELS[m], str(report.counts[m]), str(report.percents[m])))
    rows.append(("Total", str(report.blocked_total), str(report.blocked_percent)))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0 or i == len(rows) - 2:
            lines.append("-" * (sum(widths) + 4))
    if report.inconclusive:
        lines.append(f"Inconclusive HTTP evidence: {report.inconclusive} target(s)")
    if report.error_logged:
        lines.append(f"Excluded by error log: {report.error_logged} target(s)")
    return "\n".join(lines) + "\n"


# --- serialization ----------------------------------------------------------


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


def to_jsonable(obj):
    """Encode any domain value as a JSON-safe dict with a "kind" tag."""
    if isinstance(obj, TargetUrl):
        return {
            "kind": "TargetUrl",
            "raw": obj.raw,
            "scheme": obj.scheme,
            "host": obj.host,
            "path": obj.path,
            "query": obj.query,
        }
    if isinstance(obj, ResolverSpec):
        return {
            "kind": "ResolverSpec",
            "name": obj.name,
            "address": obj.address,
            "nxdomain_redirector": obj.nxdomain_redirector,
            "port": obj.port,
        }
    if isinstance(obj, DnsObservation):
        return {
            "kind": "DnsObservation",
            "resolver": to_jsonable(obj.resolver),
            "qname": obj.qname,
            "outcome": obj.outcome.value,
            "answers": list(obj.answers),
            "rtt_ms": obj.rtt_ms,
        }
    if isinstance(obj, TcpObservation):
        return {
            "kind": "TcpObservation",
            "address": obj.address,
            "result": obj.result.value,
            "port": obj.port,
        }
    if isinstance(obj, HttpObservation):
        return {
            "kind": "HttpObservation",
            "request_host": obj.request_host,
            "request_uri": obj.request_uri,
            "status": obj.status,
            "location": obj.location,
            "last_modified": obj.last_modified,
            "body_digest": obj.body_digest,
            "body_excerpt": _b64(obj.body_excerpt),
        }
    if isinstance(obj, Verdict):
        return {
            "kind": "Verdict",
            "target": to_jsonable(obj.target),
            "mechanisms": sorted(m.value for m in obj.mechanisms),
            "evidence": list(obj.evidence),
            "inconclusive": obj.inconclusive,
            "clean": obj.clean,
        }
    if isinstance(obj, TargetProbeResult):
        return {
            "kind": "TargetProbeResult",
            "target": to_jsonable(obj.target),
            "dns": [to_jsonable(o) for o in obj.dns],
            "tcp": [to_jsonable(o) for o in obj.tcp],
            "keyword": to_jsonable(obj.keyword) if obj.keyword else None,
            "http": to_jsonable(obj.http) if obj.http else None,
            "errors": list(obj.errors),
        }
    if isinstance(obj, CleaningReport):
        return {
            "kind": "CleaningReport",
            "initial_count": obj.initial_count,
            "after_collapse": obj.after_collapse,
            "after_dedupe": obj.after_dedupe,
            "after_liveness": obj.after_liveness,
            "removed": [
                {"target": to_jsonable(t), "reason": r.value} for t, r in obj.removed
            ],
        }
    if isinstance(obj, RunReport):
        return {
            "kind": "RunReport",
            "total": obj.total,
            "counts": {m.value: c for m, c in obj.counts.items()},
            "percents": {m.value: str(p) for m, p in obj.percents.items()},
            "blocked_total": obj.blocked_total,
            "blocked_percent": str(obj.blocked_percent),
            "inconclusive": obj.inconclusive,
            "error_logged": obj.error_logged,
        }
    if isinstance(obj, SessionTranscript):
        return {
            "kind": "SessionTranscript",
            "listener": obj.listener,
            "entries": [list(e) for e in obj.entries],
        }
    if isinstance(obj, list):
        return {"kind": "list", "items": [to_jsonable(x) for x in obj]}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_jsonable(doc):
    kind = doc.get("kind")
    if kind == "TargetUrl":
        return TargetUrl(
            raw=doc["raw"],
            scheme=doc["scheme"],
            host=doc["host"],
            path=doc["path"],
            query=doc["query"],
        )
    if kind == "ResolverSpec":
        return ResolverSpec(
            name=doc["name"],
            address=doc["address"],
            nxdomain_redirector=doc["nxdomain_redirector"],
            port=doc["port"],
        )
    if kind == "DnsObservation":
        return DnsObservation(
            resolver=from_jsonable(doc["resolver"]),
            qname=doc["qname"],
            outcome=DnsOutcome(doc["outcome"]),
            answers=tuple(doc["answers"]),
            rtt_ms=doc["rtt_ms"],
        )
    if kind == "TcpObservation":
        return TcpObservation(
            address=doc["address"], result=TcpResult(doc["result"]), port=doc["port"]
        )
    if kind == "HttpObservation":
        return HttpObservation(
            request_host=doc["request_host"],
            request_uri=doc["request_uri"],
            status=doc["status"],
            location=doc["location"],
            last_modified=doc["last_modified"],
            body_digest=doc["body_digest"],
            body_excerpt=_unb64(doc["body_excerpt"]),
        )
    if kind == "Verdict":
        return Verdict(
            target=from_jsonable(doc["target"]),
            mechanisms=frozenset(Mechanism(m) for m in doc["mechanisms"]),
            evidence=tuple(doc["evidence"]),
            inconclusive=doc["inconclusive"],
        )
    if kind == "TargetProbeResult":
        return TargetProbeResult(
            target=from_jsonable(doc["target"]),
            dns=tuple(from_jsonable(o) for o in doc["dns"]),
            tcp=tuple(from_jsonable(o) for o in doc["tcp"]),
            keyword=from_jsonable(doc["keyword"]) if doc["keyword"] else None,
            http=from_jsonable(doc["http"]) if doc["http"] else None,
            errors=tuple(doc["errors"]),
        )
    if kind == "CleaningReport":
        return CleaningReport(
            initial_count=doc["initial_count"],
            after_collapse=doc["after_collapse"],
            after_dedupe=doc["after_dedupe"],
            after_liveness=doc["after_liveness"],
            removed=[
                (from_jsonable(r["target"]), RemovalReason(r["reason"]))
                for r in doc["removed"]
            ],
        )
    if kind == "RunReport":
        return RunReport(
            total=doc["total"],
            counts={Mechanism(m): c for m, c in doc["counts"].items()},
            percents={Mechanism(m): Decimal(p) for m, p in doc["percents"].items()},
            blocked_total=doc["blocked_total"],
            blocked_percent=Decimal(doc["blocked_percent"]),
            inconclusive=doc["inconclusive"],
            error_logged=doc["error_logged"],
        )
    if kind == "SessionTranscript":
        return SessionTranscript(
            listener=doc["listener"],
            entries=[tuple(e) for e in doc["entries"]],
        )
    if kind == "list":
        return [from_jsonable(x) for x in doc["items"]]
    raise TypeError(f"cannot deserialize kind {kind!r}")


def emit(artifact, destination: str) -> None:
    """Write an artifact as JSON; re-loading yields an equal value."""
    try:
        with open(destination, "w", encoding="utf-8") as fh:
            json.dump(to_jsonable(artifact), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {destination}: {exc}") from exc


def load(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return from_jsonable(json.load(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
