"""Censorship measurement toolkit: probe, classifier, censor emulator,
dataset cleaning, circumvention transforms, and reporting."""

from .model import (
    DnsObservation,
    DnsOutcome,
    HttpObservation,
    MalformedUrl,
    Mechanism,
    ResolverSpec,
    TargetUrl,
    TcpObservation,
    TcpResult,
    Verdict,
    is_private_ip,
    parse_target,
)

__all__ = [
    "DnsObservation",
    "DnsOutcome",
    "HttpObservation",
    "MalformedUrl",
    "Mechanism",
    "ResolverSpec",
    "TargetUrl",
    "TcpObservation",
    "TcpResult",
    "Verdict",
    "is_private_ip",
    "parse_target",
]

__version__ = "0.1.0"
