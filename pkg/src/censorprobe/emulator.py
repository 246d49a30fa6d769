"""Two-generation censor emulator: DNS injection, 302 redirection, fake-200.

Runs as an unprivileged local proxy pair (one UDP listener per emulated
resolver identity plus an HTTP middlebox) in front of an origin stub, so
probe and classifier tests have deterministic ground truth.
"""

from __future__ import annotations

import enum
import json
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field
from typing import IO

from . import dnswire
from .model import ResolverSpec, is_private_ip

DEFAULT_WARNING_BODY = (
    b"<html><head><title>Surf Safely!</title></head>"
    b"<body>This website is not accessible.</body></html>"
)
DEFAULT_LAST_MODIFIED = "Fri, 19 Apr 2013 10:47:01 GMT"
DEFAULT_POP_LABEL = "Isb-Dhok-P2"
DEFAULT_RULE_ID = "124"


class PolicyInvalid(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class Generation(enum.Enum):
    PassThrough = "PassThrough"
    Isp302 = "Isp302"
    Ixp200 = "Ixp200"


def match_host(pattern: str, host: str) -> bool:
    """Exact match, or leading-wildcard suffix match ("*.example.com")."""
    if pattern.startswith("*."):
        suffix = pattern[1:]  # ".example.com"
        return host.endswith(suffix) and len(host) > len(suffix)
    return host == pattern


def _pattern_base(pattern: str) -> str:
    return pattern[2:] if pattern.startswith("*.") else pattern


@dataclass(frozen=True)
class CensorPolicy:
    generation: Generation
    dns_rules: tuple[str, ...] = ()
    http_host_rules: tuple[str, ...] = ()
    http_host_uri_rules: tuple[tuple[str, str], ...] = ()
    resolver_map: tuple[ResolverSpec, ...] = ()
    redirect_host: str = "10.16.6.41"
    warning_body: bytes = DEFAULT_WARNING_BODY
    warning_last_modified: str = DEFAULT_LAST_MODIFIED
    keyword_portal_interception: bool = False
    pop_label: str = DEFAULT_POP_LABEL
    rule_id: str = DEFAULT_RULE_ID
    zone: tuple[tuple[str, tuple[str, ...]], ...] = ()
    blackhole_hosts: tuple[str, ...] = ()

    def __post_init__(self):
        http_hosts = set(self.http_host_rules) | {h for h, _ in self.http_host_uri_rules}
        for i, rule in enumerate(self.dns_rules):
            if rule not in http_hosts:
                raise PolicyInvalid(
                    f"dns_rules[{i}]",
                    f"{rule!r} has no matching HTTP rule; DNS-blocked hosts "
                    "must also be HTTP-blocked",
                )
        if self.generation is Generation.Isp302 and not is_private_ip(self.redirect_host):
            raise PolicyInvalid(
                "redirect_host", f"{self.redirect_host!r} is not a private IPv4 address"
            )

    def zone_lookup(self, host: str) -> tuple[str, ...] | None:
        for name, addrs in self.zone:
            if name == host:
                return addrs
        return None

    def matched_rule(self, host: str, uri: str) -> str | None:
        """Rule id string when (host, uri) is censored, else None."""
        if self.generation is Generation.PassThrough:
            return None
        for pattern, needle in self.http_host_uri_rules:
            if match_host(pattern, host) and needle in uri:
                return f"uri:{pattern}"
        for pattern in self.http_host_rules:
            if match_host(pattern, host):
                return f"host:{pattern}"
        if self.keyword_portal_interception:
            blocked = {_pattern_base(p) for p in self.http_host_rules}
            blocked |= {_pattern_base(p) for p, _ in self.http_host_uri_rules}
            for name in blocked:
                if name in uri:
                    return f"keyword:{name}"
        return None

    def dns_blocked(self, qname: str) -> bool:
        return any(match_host(p, qname) for p in self.dns_rules)


def load_policy(source: IO[str] | str) -> CensorPolicy:
    """Build a validated CensorPolicy from JSON text or a file object."""
    text = source if isinstance(source, str) else source.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolicyInvalid("$", f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise PolicyInvalid("$", "policy document must be an object")

    gen_name = doc.get("generation")
    try:
        generation = Generation(gen_name)
    except ValueError:
        raise PolicyInvalid(
            "generation", f"{gen_name!r} is not one of PassThrough/Isp302/Ixp200"
        ) from None

    def str_list(key: str) -> tuple[str, ...]:
        val = doc.get(key, [])
        if not isinstance(val, list) or not all(isinstance(x, str) for x in val):
            raise PolicyInvalid(key, "expected a list of strings")
        return tuple(val)

    host_uri = []
    for i, pair in enumerate(doc.get("http_host_uri_rules", [])):
        if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
            raise PolicyInvalid(f"http_host_uri_rules[{i}]", "expected [host, uri] pair")
        host_uri.append((pair[0], pair[1]))

    resolvers = []
    for i, spec in enumerate(doc.get("resolver_map", [])):
        try:
            resolvers.append(
                ResolverSpec(
                    name=spec["name"],
                    address=spec["address"],
                    nxdomain_redirector=spec.get("nxdomain_redirector"),
                    port=spec.get("port", 53),
                )
            )
        except (KeyError, ValueError) as exc:
            raise PolicyInvalid(f"resolver_map[{i}]", str(exc)) from exc

    warning_body = DEFAULT_WARNING_BODY
    if "warning_body" in doc:
        warning_body = doc["warning_body"].encode("utf-8")
    elif "warning_body_file" in doc:
        with open(doc["warning_body_file"], "rb") as fh:
            warning_body = fh.read()

    zone = tuple(
        (host, tuple(addrs)) for host, addrs in doc.get("zone", {}).items()
    )

    return CensorPolicy(
        generation=generation,
        dns_rules=str_list("dns_rules"),
        http_host_rules=str_list("http_host_rules"),
        http_host_uri_rules=tuple(host_uri),
        resolver_map=tuple(resolvers),
        redirect_host=doc.get("redirect_host", "10.16.6.41"),
        warning_body=warning_body,
        warning_last_modified=doc.get("warning_last_modified", DEFAULT_LAST_MODIFIED),
        keyword_portal_interception=bool(doc.get("keyword_portal_interception", False)),
        pop_label=doc.get("pop_label", DEFAULT_POP_LABEL),
        rule_id=doc.get("rule_id", DEFAULT_RULE_ID),
        zone=zone,
        blackhole_hosts=str_list("blackhole_hosts"),
    )


# --- DNS side -------------------------------------------------------------


def handle_dns(
    policy: CensorPolicy, qname: str, resolver: ResolverSpec
) -> tuple[str, list[str]]:
    """Decide the DNS answer: ("A", addresses) or ("NXDOMAIN", []).

    Blocked names get the resolver's redirector when it has one, NXDOMAIN
    otherwise. Unblocked names are answered from the built-in zone.
    """
    if policy.dns_blocked(qname):
        if resolver.nxdomain_redirector:
            return ("A", [resolver.nxdomain_redirector])
        return ("NXDOMAIN", [])
    addrs = policy.zone_lookup(qname)
    if addrs:
        return ("A", list(addrs))
    return ("NXDOMAIN", [])


@dataclass
class SessionTranscript:
    listener: str
    entries: list[tuple[str, str]] = field(default_factory=list)


class TranscriptRecorder:
    def __init__(self):
        self._lock = threading.Lock()
        self.sessions: list[SessionTranscript] = []

    def open_session(self, listener: str) -> SessionTranscript:
        session = SessionTranscript(listener=listener)
        with self._lock:
            self.sessions.append(session)
        return session


class _DnsHandler(socketserver.BaseRequestHandler):
    def handle(self):
        data, sock = self.request
        server: DnsListener = self.server  # type: ignore[assignment]
        try:
            msg = dnswire.decode_message(data)
        except dnswire.DnsDecodeError:
            if len(data) >= 2:
                # header-only FORMERR; the question was not decodable
                reply = data[:2] + b"\x81\x81" + b"\x00" * 8
                sock.sendto(reply, self.client_address)
            return
        kind, addrs = handle_dns(server.policy, msg.qname, server.resolver)
        if kind == "A":
            reply = dnswire.encode_response(
                msg.txid, msg.qname, dnswire.RCODE_NOERROR, addrs
            )
        else:
            reply = dnswire.encode_response(msg.txid, msg.qname, dnswire.RCODE_NXDOMAIN)
        sock.sendto(reply, self.client_address)


class DnsListener(socketserver.ThreadingUDPServer):
    """One emulated resolver identity on a local UDP port."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, policy: CensorPolicy, resolver: ResolverSpec, bind=("127.0.0.1", 0)):
        super().__init__(bind, _DnsHandler)
        self.policy = policy
        self.resolver = resolver

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.server_address[0], self.server_address[1]


# --- HTTP side ------------------------------------------------------------


def build_response(
    status: int,
    reason: str,
    body: bytes,
    extra_headers: list[tuple[str, str]] | None = None,
) -> bytes:
    lines = [f"HTTP/1.1 {status} {reason}"]
    for name, value in extra_headers or []:
        lines.append(f"{name}: {value}")
    lines.append("Content-Type: text/html")
    lines.append(f"Content-Length: {len(body)}")
    lines.append("Connection: close")
    head = ("\r\n".join(lines) + "\r\n\r\n").encode("latin-1")
    return head + body


def _read_request_head(sock: socket.socket) -> bytes:
    buf = b""
    while b"\r\n\r\n" not in buf and len(buf) < 65536:
        chunk = sock.recv(4096)
        if not chunk:
            break
        buf += chunk
    return buf


def _parse_request(raw: bytes) -> tuple[str, str, str] | None:
    """Returns (method, uri, host) or None when unparseable."""
    head = raw.split(b"\r\n\r\n", 1)[0]
    lines = head.split(b"\r\n")
    parts = lines[0].split(b" ")
    if len(parts) != 3 or not parts[2].startswith(b"HTTP/"):
        return None
    method, uri = parts[0].decode("latin-1"), parts[1].decode("latin-1")
    host = ""
    for line in lines[1:]:
        name, _, value = line.partition(b":")
        if name.strip().lower() == b"host":
            host = value.decode("latin-1").strip().lower()
    if not host:
        return None
    return method, uri, host


class _CensorHttpHandler(socketserver.BaseRequestHandler):
    def handle(self):
        server: CensorHttpProxy = self.server  # type: ignore[assignment]
        session = server.recorder.open_session("censor-http")
        raw = _read_request_head(self.request)
        if not raw:
            return
        parsed = _parse_request(raw)
        if parsed is None:
            session.entries.append(("in", "<unparseable>"))
            session.entries.append(("out", "HTTP/1.1 400 Bad Request"))
            self.request.sendall(build_response(400, "Bad Request", b"bad request"))
            return
        method, uri, host = parsed
        session.entries.append(("in", f"{method} {uri} HTTP/1.1"))
        policy = server.policy

        if any(match_host(p, host) for p in policy.blackhole_hosts):
            session.entries.append(("out", "<blackhole>"))
            time.sleep(server.blackhole_delay)
            return

        rule = policy.matched_rule(host, uri)
        if rule is not None:
            if policy.generation is Generation.Isp302:
                client_ip = self.client_address[0]
                location = (
                    f"http://{policy.redirect_host}/redirect.php"
                    f"?n={client_ip}@{policy.pop_label}&s={policy.rule_id}"
                )
                session.entries.append(("out", "HTTP/1.1 302 Found"))
                self.request.sendall(
                    build_response(302, "Found", b"", [("Location", location)])
                )
            else:  # Ixp200: filter and return, origin never consulted
                session.entries.append(("out", "HTTP/1.1 200 OK"))
                self.request.sendall(
                    build_response(
                        200,
                        "OK",
                        policy.warning_body,
                        [("Last-Modified", policy.warning_last_modified)],
                    )
                )
            return

        # Forward to the origin stub verbatim; relay its bytes unmodified.
        try:
            with socket.create_connection(server.origin_endpoint, timeout=10) as upstream:
                upstream.sendall(raw)
                reply = b""
                while True:
                    chunk = upstream.recv(65536)
                    if not chunk:
                        break
                    reply += chunk
        except OSError:
            session.entries.append(("out", "HTTP/1.1 502 Bad Gateway"))
            self.request.sendall(build_response(502, "Bad Gateway", b"origin unreachable"))
            return
        session.entries.append(("out", reply.split(b"\r\n", 1)[0].decode("latin-1", "replace")))
        self.request.sendall(reply)


class CensorHttpProxy(socketserver.ThreadingTCPServer):
    """The censoring middlebox: matches policy or forwards to the origin."""

    allow_reuse_address = True
    daemon_threads = True
    # many concurrent probe workers must not overflow the accept queue
    request_queue_size = 128

    def __init__(
        self,
        policy: CensorPolicy,
        origin_endpoint: tuple[str, int],
        bind=("127.0.0.1", 0),
        recorder: TranscriptRecorder | None = None,
        blackhole_delay: float = 30.0,
    ):
        super().__init__(bind, _CensorHttpHandler)
        self.policy = policy
        self.origin_endpoint = origin_endpoint
        self.recorder = recorder or TranscriptRecorder()
        self.blackhole_delay = blackhole_delay

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.server_address[0], self.server_address[1]


class _WarningHandler(socketserver.BaseRequestHandler):
    def handle(self):
        server: WarningSite = self.server  # type: ignore[assignment]
        session = server.recorder.open_session("warning-site")
        raw = _read_request_head(self.request)
        parsed = _parse_request(raw) if raw else None
        if parsed is None:
            session.entries.append(("in", "<unparseable>"))
            session.entries.append(("out", "HTTP/1.1 400 Bad Request"))
            self.request.sendall(build_response(400, "Bad Request", b"bad request"))
            return
        method, uri, _host = parsed
        session.entries.append(("in", f"{method} {uri} HTTP/1.1"))
        self.request.sendall(serve_warning_site(server.policy, uri))
        path = uri.split("?", 1)[0]
        status = "200 OK" if path == "/redirect.php" else "404 Not Found"
        session.entries.append(("out", f"HTTP/1.1 {status}"))


def serve_warning_site(policy: CensorPolicy, uri: str) -> bytes:
    """Warning host behavior: /redirect.php serves the page, all else 404."""
    path = uri.split("?", 1)[0]
    if path == "/redirect.php":
        return build_response(200, "OK", policy.warning_body)
    return build_response(404, "Not Found", b"404 Not Found")


class WarningSite(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True
    request_queue_size = 128

    def __init__(
        self,
        policy: CensorPolicy,
        bind=("127.0.0.1", 0),
        recorder: TranscriptRecorder | None = None,
    ):
        super().__init__(bind, _WarningHandler)
        self.policy = policy
        self.recorder = recorder or TranscriptRecorder()

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.server_address[0], self.server_address[1]


class _OriginHandler(socketserver.BaseRequestHandler):
    def handle(self):
        server: OriginStub = self.server  # type: ignore[assignment]
        raw = _read_request_head(self.request)
        parsed = _parse_request(raw) if raw else None
        if parsed is None:
            self.request.sendall(build_response(400, "Bad Request", b"bad request"))
            return
        method, uri, host = parsed
        with server.lock:
            server.requests.append((host, uri))
        self.request.sendall(server.response_for(host, uri))


class OriginStub(socketserver.ThreadingTCPServer):
    """Per-Host content registry standing in for the real web."""

    allow_reuse_address = True
    daemon_threads = True
    request_queue_size = 128

    def __init__(self, bind=("127.0.0.1", 0)):
        super().__init__(bind, _OriginHandler)
        self.lock = threading.Lock()
        self.requests: list[tuple[str, str]] = []
        # (host, uri) -> (status, reason, headers, body); host -> default body
        self.pages: dict[tuple[str, str], tuple[int, str, list[tuple[str, str]], bytes]] = {}
        self.site_bodies: dict[str, bytes] = {}

    def add_site(self, host: str, body: bytes):
        self.site_bodies[host] = body

    def add_page(
        self,
        host: str,
        uri: str,
        status: int = 200,
        reason: str = "OK",
        headers: list[tuple[str, str]] | None = None,
        body: bytes = b"",
    ):
        self.pages[(host, uri)] = (status, reason, headers or [], body)

    def response_for(self, host: str, uri: str) -> bytes:
        if (host, uri) in self.pages:
            status, reason, headers, body = self.pages[(host, uri)]
            return build_response(status, reason, body, headers)
        if host in self.site_bodies:
            return build_response(200, "OK", self.site_bodies[host])
        return build_response(404, "Not Found", b"404 Not Found")

    def requests_for(self, host: str) -> list[tuple[str, str]]:
        with self.lock:
            return [(h, u) for h, u in self.requests if h == host]

    @property
    def endpoint(self) -> tuple[str, int]:
        return self.server_address[0], self.server_address[1]


# --- Harness --------------------------------------------------------------


class Emulator:
    """Wires origin stub, censor proxy, warning site, and DNS listeners."""

    def __init__(self, policy: CensorPolicy, blackhole_delay: float = 30.0):
        self.policy = policy
        self.recorder = TranscriptRecorder()
        self.origin = OriginStub()
        self.proxy = CensorHttpProxy(
            policy,
            self.origin.endpoint,
            recorder=self.recorder,
            blackhole_delay=blackhole_delay,
        )
        self.warning = WarningSite(policy, recorder=self.recorder)
        self.dns_listeners: dict[str, DnsListener] = {}
        self._threads: list[threading.Thread] = []
        for resolver in policy.resolver_map:
            self.dns_listeners[resolver.name] = DnsListener(policy, resolver)

    def resolver_endpoints(self) -> list[ResolverSpec]:
        """Resolver specs rebound to the local listener ports."""
        out = []
        for resolver in self.policy.resolver_map:
            listener = self.dns_listeners[resolver.name]
            out.append(
                ResolverSpec(
                    name=resolver.name,
                    address=listener.endpoint[0],
                    nxdomain_redirector=resolver.nxdomain_redirector,
                    port=listener.endpoint[1],
                )
            )
        return out

    def start(self):
        servers = [self.origin, self.proxy, self.warning, *self.dns_listeners.values()]
        for server in servers:
            thread = threading.Thread(
                target=server.serve_forever, kwargs={"poll_interval": 0.05}, daemon=True
            )
            thread.start()
            self._threads.append(thread)

    def stop(self):
        servers = [self.origin, self.proxy, self.warning, *self.dns_listeners.values()]
        stoppers = [threading.Thread(target=s.shutdown) for s in servers]
        for t in stoppers:
            t.start()
        for t in stoppers:
            t.join()
        for s in servers:
            s.server_close()

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()
