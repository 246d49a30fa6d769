"""Turns observations into mechanism verdicts; probes trigger granularity."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from . import httpwire
from .model import (
    DnsObservation,
    DnsOutcome,
    HttpObservation,
    Mechanism,
    ResolverSpec,
    TcpResult,
    Verdict,
    is_private_ip,
)
from .probe import TargetProbeResult, genuine_addresses

DEFAULT_INJECTED_LAST_MODIFIED = "Fri, 19 Apr 2013"


class AmbiguousEvidence(Exception):
    """200 response with no fingerprint match and no reference digest."""


class DecoyUnreachable(OSError):
    pass


class TriggerVerdict(enum.Enum):
    HostOnly = "HostOnly"
    HostAndUri = "HostAndUri"
    NotTriggered = "NotTriggered"


@dataclass(frozen=True)
class FingerprintSet:
    warning_page_digests: frozenset[str] = frozenset()
    warning_excerpt_patterns: tuple[bytes, ...] = ()
    injected_last_modified: tuple[str, ...] = (DEFAULT_INJECTED_LAST_MODIFIED,)

    def __post_init__(self):
        if not (
            self.warning_page_digests
            or self.warning_excerpt_patterns
            or self.injected_last_modified
        ):
            raise ValueError("at least one detection signal is required")

    def matches_body(self, digest: str, excerpt: bytes) -> bool:
        if digest in self.warning_page_digests:
            return True
        return any(p in excerpt for p in self.warning_excerpt_patterns)

    def matches_last_modified(self, value: str | None) -> bool:
        if value is None:
            return False
        return any(value.startswith(v) or v in value for v in self.injected_last_modified)


@dataclass(frozen=True)
class Reference:
    """Clean-channel ground truth for one target: true addresses and body digest."""

    addresses: tuple[str, ...] = ()
    body_digest: str | None = None


def classify_dns(
    obs: DnsObservation,
    known: list[ResolverSpec],
    reference: list[str] | tuple[str, ...] | None = None,
) -> Mechanism | None:
    """DnsInjection on redirector answers or anomalous NXDOMAIN."""
    spec = next((r for r in known if r.address == obs.resolver.address), obs.resolver)
    redirector = spec.nxdomain_redirector or obs.resolver.nxdomain_redirector
    if obs.outcome is DnsOutcome.Answers:
        if redirector and redirector in obs.answers:
            return Mechanism.DnsInjection
        return None
    if obs.outcome is DnsOutcome.NxDomain:
        if reference:
            # the name resolves over the clean channel; NXDOMAIN is forged
            return Mechanism.DnsInjection
        if redirector:
            # this resolver rewrites NXDOMAIN; a raw one means tampering upstream
            return Mechanism.DnsInjection
    return None


def classify_http(
    obs: HttpObservation,
    fingerprints: FingerprintSet,
    reference_digest: str | None = None,
) -> Mechanism | None:
    """Detect 302 redirection to a warning host or an injected fake 200.

    Legitimate redirects (public-host Location without a fingerprint match)
    return None. Raises AmbiguousEvidence when a 200 cannot be judged.
    """
    if obs.status == 302 and obs.location:
        loc_host = urlsplit(obs.location).hostname or ""
        if is_private_ip(loc_host):
            return Mechanism.Http302Redirect
        if any(
            p in obs.location.encode("latin-1", "replace")
            for p in fingerprints.warning_excerpt_patterns
        ):
            return Mechanism.Http302Redirect
        return None
    if obs.status == 200:
        if fingerprints.matches_body(obs.body_digest, obs.body_excerpt):
            return Mechanism.Http200Injection
        if fingerprints.matches_last_modified(obs.last_modified):
            return Mechanism.Http200Injection
        if reference_digest is not None:
            if reference_digest != obs.body_digest:
                return Mechanism.Http200Injection
            return None
        raise AmbiguousEvidence(
            f"200 from {obs.request_host} with no fingerprint or reference digest"
        )
    return None


def classify_target(
    result: TargetProbeResult,
    fingerprints: FingerprintSet,
    known_resolvers: list[ResolverSpec],
    reference: Reference | None = None,
) -> Verdict:
    """Union of per-observation classifications plus IP and keyword checks."""
    if result.errors:
        raise ValueError("results with error-log entries are not classifiable")
    mechanisms: set[Mechanism] = set()
    evidence: list[str] = []
    inconclusive = False
    ref_addresses = reference.addresses if reference else None
    ref_digest = reference.body_digest if reference else None

    for i, obs in enumerate(result.dns):
        if classify_dns(obs, known_resolvers, ref_addresses) is not None:
            mechanisms.add(Mechanism.DnsInjection)
            evidence.append(f"dns[{i}]")

    genuine = genuine_addresses(result.dns)
    if genuine and result.tcp and all(
        t.result is not TcpResult.Connected for t in result.tcp
    ):
        mechanisms.add(Mechanism.IpBlock)
        evidence.extend(f"tcp[{i}]" for i in range(len(result.tcp)))

    if result.keyword is not None and result.keyword.status != 404:
        mechanisms.add(Mechanism.UrlKeyword)
        evidence.append("keyword")

    if result.http is not None:
        try:
            http_mech = classify_http(result.http, fingerprints, ref_digest)
        except AmbiguousEvidence:
            http_mech = None
            inconclusive = True
        if http_mech is not None:
            mechanisms.add(http_mech)
            evidence.append("http")

    return Verdict(
        target=result.target,
        mechanisms=frozenset(mechanisms),
        evidence=tuple(evidence),
        inconclusive=inconclusive,
    )


@dataclass
class TriggerConfig:
    decoy_port: int = 80
    benign_host: str = "benign.example"
    benign_uri: str = "/"
    timeout: float = 10.0
    fingerprints: FingerprintSet = field(default_factory=FingerprintSet)


def _censored(
    decoy: str, host: str, uri: str, config: TriggerConfig
) -> bool:
    try:
        obs = httpwire.fetch(
            decoy, host, uri, port=config.decoy_port, timeout=config.timeout
        )
    except httpwire.HttpTransportError as exc:
        raise DecoyUnreachable(str(exc)) from exc
    try:
        return classify_http(obs, config.fingerprints) is not None
    except AmbiguousEvidence:
        return False


def determine_trigger(
    host: str, uri: str, decoy: str, config: TriggerConfig
) -> TriggerVerdict:
    """Probe whether censorship fires on Host alone or on Host+URI.

    Sends crafted requests to an uncensored decoy address: (host, "/"),
    then (host, uri), then (benign host, uri).
    """
    if _censored(decoy, host, "/", config):
        return TriggerVerdict.HostOnly
    host_uri = _censored(decoy, host, uri, config)
    benign_uri = _censored(decoy, config.benign_host, uri, config)
    if host_uri and not benign_uri:
        return TriggerVerdict.HostAndUri
    return TriggerVerdict.NotTriggered
