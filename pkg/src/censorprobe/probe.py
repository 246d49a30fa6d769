"""Four-step per-site probe: DNS, TCP, URL-keyword portal, HTTP fetch.

Transient transport failures go to a per-target error log instead of
raising; results with a non-empty error log are excluded from reporting.
"""

from __future__ import annotations

import errno
import socket
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import dnswire, httpwire
from .model import (
    DnsObservation,
    DnsOutcome,
    HttpObservation,
    ResolverSpec,
    TargetUrl,
    TcpObservation,
    TcpResult,
    parse_target,
)


@dataclass
class ProbeConfig:
    resolvers: list[ResolverSpec]
    keyword_portal: TargetUrl = field(
        default_factory=lambda: parse_target("http://www.google.com")
    )
    dns_timeout_ms: int = 5000
    tcp_timeout_ms: int = 5000
    http_timeout_ms: int = 10000
    retries: int = 2
    workers: int = 8
    host_overrides: dict[str, str] = field(default_factory=dict)
    http_port: int = 80

    def __post_init__(self):
        if not self.resolvers:
            raise ValueError("at least one resolver is required")
        for value in (self.dns_timeout_ms, self.tcp_timeout_ms, self.http_timeout_ms):
            if value <= 0:
                raise ValueError("timeouts must be strictly positive")


@dataclass
class TargetProbeResult:
    target: TargetUrl
    dns: tuple[DnsObservation, ...] = ()
    tcp: tuple[TcpObservation, ...] = ()
    keyword: HttpObservation | None = None
    http: HttpObservation | None = None
    errors: tuple[str, ...] = ()


def dns_step(target: TargetUrl, config: ProbeConfig) -> list[DnsObservation]:
    """One A lookup per configured resolver; failures become outcomes."""
    observations = []
    for resolver in config.resolvers:
        endpoint = (resolver.address, resolver.port)
        try:
            msg, rtt = dnswire.query(
                endpoint,
                target.host,
                timeout=config.dns_timeout_ms / 1000.0,
                retries=config.retries,
            )
        except socket.timeout:
            observations.append(
                DnsObservation(resolver, target.host, DnsOutcome.Timeout)
            )
            continue
        except dnswire.DnsDecodeError:
            observations.append(
                DnsObservation(resolver, target.host, DnsOutcome.ServFail)
            )
            continue
        if msg.rcode == dnswire.RCODE_NOERROR and msg.answers:
            outcome, answers = DnsOutcome.Answers, tuple(msg.answers)
        elif msg.rcode == dnswire.RCODE_NXDOMAIN:
            outcome, answers = DnsOutcome.NxDomain, ()
        else:
            outcome, answers = DnsOutcome.ServFail, ()
        observations.append(
            DnsObservation(resolver, target.host, outcome, answers, rtt * 1000.0)
        )
    return observations


def tcp_step(
    addresses: list[str], port: int = 80, timeout: float = 5.0
) -> list[TcpObservation]:
    """3-way handshake per address; the socket is closed immediately."""
    observations = []
    for address in addresses:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.settimeout(timeout)
        try:
            code = sock.connect_ex((address, port))
        except socket.timeout:
            code = errno.ETIMEDOUT
        except OSError as exc:
            code = exc.errno or errno.EHOSTUNREACH
        finally:
            sock.close()
        if code == 0:
            result = TcpResult.Connected
        elif code == errno.ECONNREFUSED:
            result = TcpResult.Refused
        elif code in (errno.ETIMEDOUT, errno.EAGAIN, errno.EINPROGRESS):
            result = TcpResult.TimedOut
        else:
            result = TcpResult.Unreachable
        observations.append(TcpObservation(address, result, port))
    return observations


def _resolve_portal_address(config: ProbeConfig) -> str | None:
    portal_host = config.keyword_portal.host
    if portal_host in config.host_overrides:
        return config.host_overrides[portal_host]
    obs = dns_step(config.keyword_portal, config)
    for o in obs:
        if o.outcome is DnsOutcome.Answers:
            return o.answers[0]
    return None


def keyword_step(
    target: TargetUrl, config: ProbeConfig, portal_address: str | None = None
) -> HttpObservation:
    """GET "/" + the full target URL on the portal host.

    A 404 means no URL-keyword filtering; any other status is evidence of
    it. Raises HttpTransportError on transport failure (the caller logs it
    and marks the step inconclusive).
    """
    if portal_address is None:
        portal_address = _resolve_portal_address(config)
    if portal_address is None:
        raise httpwire.HttpTransportError("keyword portal did not resolve")
    return httpwire.fetch(
        portal_address,
        config.keyword_portal.host,
        "/" + target.render(),
        port=config.http_port,
        timeout=config.http_timeout_ms / 1000.0,
    )


def http_step(target: TargetUrl, resolved: str, config: ProbeConfig) -> HttpObservation:
    """Single GET with Host: target.host; redirects recorded, not followed."""
    return httpwire.fetch(
        resolved,
        target.host,
        target.request_uri(),
        port=config.http_port,
        timeout=config.http_timeout_ms / 1000.0,
    )


def genuine_addresses(
    observations: list[DnsObservation] | tuple[DnsObservation, ...],
) -> list[str]:
    """Answer addresses minus each resolver's known NXDOMAIN redirector."""
    seen = []
    for obs in observations:
        for addr in obs.answers:
            if addr == obs.resolver.nxdomain_redirector:
                continue
            if addr not in seen:
                seen.append(addr)
    return seen


def run_target(target: TargetUrl, config: ProbeConfig) -> TargetProbeResult:
    """Execute steps 1-4 in order, keeping every observation collected."""
    errors: list[str] = []
    dns_obs = dns_step(target, config)

    override = config.host_overrides.get(target.host)
    addresses = [override] if override else genuine_addresses(dns_obs)
    tcp_obs = tcp_step(
        addresses, port=config.http_port, timeout=config.tcp_timeout_ms / 1000.0
    )

    keyword_obs = None
    try:
        keyword_obs = keyword_step(target, config)
    except httpwire.HttpTransportError as exc:
        errors.append(f"keyword: {exc}")

    http_obs = None
    if addresses:
        try:
            http_obs = http_step(target, addresses[0], config)
        except httpwire.HttpTransportError as exc:
            errors.append(f"http: {exc}")

    return TargetProbeResult(
        target=target,
        dns=tuple(dns_obs),
        tcp=tuple(tcp_obs),
        keyword=keyword_obs,
        http=http_obs,
        errors=tuple(errors),
    )


def run_campaign(
    targets: list[TargetUrl], config: ProbeConfig
) -> list[TargetProbeResult]:
    """One pass over the target list; output order equals input order."""
    if not targets:
        return []
    portal_host = config.keyword_portal.host
    if portal_host not in config.host_overrides:
        # resolve the portal once for the whole campaign
        address = _resolve_portal_address(config)
        if address is not None:
            config.host_overrides[portal_host] = address
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(lambda t: run_target(t, config), targets))
