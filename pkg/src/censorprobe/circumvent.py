"""Circumvention transforms: CDN coralization, search-cache URLs, direct-IP
fetch with a crafted Host header, and the accessibility matrix over them."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from . import httpwire
from .classify import AmbiguousEvidence, FingerprintSet, classify_http
from .model import HttpObservation, TargetUrl, parse_target

CORAL_SUFFIX = ".nyud.net"

DEFAULT_CACHE_TEMPLATES = {
    # Provider URL schemes drift; these are modern reconstructions and are
    # overridable via config.
    "GoogleCache": "http://webcache.googleusercontent.com/search?q=cache:{URL}",
    "Bing": "http://cc.bingj.com/cache.aspx?q={URL}",
    "InternetArchive": "http://web.archive.org/web/{URL}",
}


class Method(enum.Enum):
    WebDnsPlusHostHeader = "WebDnsPlusHostHeader"
    CoralCdn = "CoralCdn"
    SearchCache = "SearchCache"


class Outcome(enum.Enum):
    Accessible = "Accessible"
    Blocked = "Blocked"
    Inconclusive = "Inconclusive"


class CacheEngine(enum.Enum):
    GoogleCache = "GoogleCache"
    Bing = "Bing"
    InternetArchive = "InternetArchive"


def coralize(target: TargetUrl) -> TargetUrl:
    """Append the CDN suffix to the hostname; everything else unchanged."""
    return TargetUrl(
        raw=target.raw,
        scheme=target.scheme,
        host=target.host + CORAL_SUFFIX,
        path=target.path,
        query=target.query,
    )


def cache_url(
    target: TargetUrl,
    engine: CacheEngine,
    templates: dict[str, str] | None = None,
) -> TargetUrl:
    """Instantiate the engine's cache-lookup template with the rendered URL."""
    templates = templates or DEFAULT_CACHE_TEMPLATES
    template = templates[engine.value]
    return parse_target(template.replace("{URL}", target.render()))


def extract_cached_url(url: TargetUrl, engine: CacheEngine,
                       templates: dict[str, str] | None = None) -> str:
    """Recover the embedded original URL from a cache-lookup URL."""
    templates = templates or DEFAULT_CACHE_TEMPLATES
    prefix, _, suffix = templates[engine.value].partition("{URL}")
    rendered = url.render()
    if not rendered.startswith(prefix) or not rendered.endswith(suffix):
        raise ValueError(f"{rendered!r} does not match the {engine.value} template")
    return rendered[len(prefix) : len(rendered) - len(suffix)]


def host_header_fetch(
    address: str, host: str, uri: str, port: int = 80, timeout: float = 10.0
) -> HttpObservation | None:
    """Single GET to address with a crafted Host; None on transport failure."""
    try:
        return httpwire.fetch(address, host, uri, port=port, timeout=timeout)
    except httpwire.HttpTransportError:
        return None


@dataclass
class CircumventionConfig:
    methods: list[Method]
    host_ip_table: dict[str, str] = field(default_factory=dict)
    cache_templates: dict[str, str] = field(
        default_factory=lambda: dict(DEFAULT_CACHE_TEMPLATES)
    )
    cache_engine: CacheEngine = CacheEngine.GoogleCache
    fingerprints: FingerprintSet = field(default_factory=FingerprintSet)
    http_port: int = 80
    timeout: float = 10.0
    default_address: str | None = None  # fallback when a host is not in the table


@dataclass
class CircumventionMatrix:
    outcomes: dict[tuple[str, Method], Outcome] = field(default_factory=dict)

    def get(self, target: TargetUrl, method: Method) -> Outcome:
        return self.outcomes[(target.render(), method)]


def _method_request(
    target: TargetUrl, method: Method, config: CircumventionConfig
) -> tuple[str, str] | None:
    """(host, uri) the method would fetch, or None when unconfigured."""
    if method is Method.WebDnsPlusHostHeader:
        return target.host, target.request_uri()
    if method is Method.CoralCdn:
        t = coralize(target)
        return t.host, t.request_uri()
    t = cache_url(target, config.cache_engine, config.cache_templates)
    return t.host, t.request_uri()


def evaluate_matrix(
    targets: list[TargetUrl],
    methods: list[Method],
    config: CircumventionConfig,
) -> CircumventionMatrix:
    """Per-target, per-method outcome; Accessible iff the fetch looks clean."""
    matrix = CircumventionMatrix()
    for target in targets:
        for method in methods:
            host, uri = _method_request(target, method, config)
            address = config.host_ip_table.get(host, config.default_address)
            if address is None:
                matrix.outcomes[(target.render(), method)] = Outcome.Inconclusive
                continue
            obs = host_header_fetch(
                address, host, uri, port=config.http_port, timeout=config.timeout
            )
            if obs is None:
                matrix.outcomes[(target.render(), method)] = Outcome.Inconclusive
                continue
            try:
                mechanism = classify_http(obs, config.fingerprints)
            except AmbiguousEvidence:
                # Here the censor's warning fingerprints are known in full,
                # so a 200 that matches none of them is the real content.
                mechanism = None
            matrix.outcomes[(target.render(), method)] = (
                Outcome.Blocked if mechanism is not None else Outcome.Accessible
            )
    return matrix
