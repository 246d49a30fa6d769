"""Minimal DNS wire format: A queries, A/NXDOMAIN answers, and a UDP client.

Only what the probe and emulator need: QTYPE A, QCLASS IN, compression
pointers on decode. Encoding never emits pointers.
"""

from __future__ import annotations

import random
import socket
import struct
import time
from dataclasses import dataclass, field

QTYPE_A = 1
QCLASS_IN = 1

RCODE_NOERROR = 0
RCODE_FORMERR = 1
RCODE_SERVFAIL = 2
RCODE_NXDOMAIN = 3


class DnsDecodeError(ValueError):
    pass


def encode_name(name: str) -> bytes:
    out = bytearray()
    for label in name.rstrip(".").split("."):
        raw = label.encode("ascii")
        if not 0 < len(raw) < 64:
            raise ValueError(f"bad label in {name!r}")
        out.append(len(raw))
        out.extend(raw)
    out.append(0)
    return bytes(out)


def decode_name(data: bytes, offset: int) -> tuple[str, int]:
    """Decode a possibly-compressed name; returns (name, next offset)."""
    labels = []
    jumped = False
    end = offset
    hops = 0
    while True:
        if offset >= len(data):
            raise DnsDecodeError("truncated name")
        length = data[offset]
        if length & 0xC0 == 0xC0:
            if offset + 1 >= len(data):
                raise DnsDecodeError("truncated pointer")
            pointer = ((length & 0x3F) << 8) | data[offset + 1]
            if not jumped:
                end = offset + 2
                jumped = True
            offset = pointer
            hops += 1
            if hops > 32:
                raise DnsDecodeError("pointer loop")
        elif length == 0:
            if not jumped:
                end = offset + 1
            return ".".join(labels), end
        else:
            if offset + 1 + length > len(data):
                raise DnsDecodeError("truncated label")
            labels.append(data[offset + 1 : offset + 1 + length].decode("ascii"))
            offset += 1 + length


def encode_query(txid: int, qname: str) -> bytes:
    header = struct.pack(">HHHHHH", txid, 0x0100, 1, 0, 0, 0)  # RD set
    return header + encode_name(qname) + struct.pack(">HH", QTYPE_A, QCLASS_IN)


@dataclass
class DnsMessage:
    txid: int
    is_response: bool
    rcode: int
    qname: str
    qtype: int
    answers: list[str] = field(default_factory=list)  # A-record addresses only


def decode_message(data: bytes) -> DnsMessage:
    if len(data) < 12:
        raise DnsDecodeError("message shorter than header")
    txid, flags, qdcount, ancount, _, _ = struct.unpack(">HHHHHH", data[:12])
    if qdcount != 1:
        raise DnsDecodeError(f"expected one question, got {qdcount}")
    qname, offset = decode_name(data, 12)
    if offset + 4 > len(data):
        raise DnsDecodeError("truncated question")
    qtype, _qclass = struct.unpack(">HH", data[offset : offset + 4])
    offset += 4
    answers = []
    for _ in range(ancount):
        _, offset = decode_name(data, offset)
        if offset + 10 > len(data):
            raise DnsDecodeError("truncated answer header")
        rtype, _rclass, _ttl, rdlength = struct.unpack(
            ">HHIH", data[offset : offset + 10]
        )
        offset += 10
        if offset + rdlength > len(data):
            raise DnsDecodeError("truncated rdata")
        if rtype == QTYPE_A and rdlength == 4:
            answers.append(socket.inet_ntoa(data[offset : offset + 4]))
        offset += rdlength
    return DnsMessage(
        txid=txid,
        is_response=bool(flags & 0x8000),
        rcode=flags & 0x000F,
        qname=qname,
        qtype=qtype,
        answers=answers,
    )


def encode_response(
    txid: int, qname: str, rcode: int, answers: list[str] | None = None, ttl: int = 60
) -> bytes:
    answers = answers or []
    flags = 0x8180 | (rcode & 0x0F)  # QR, RD, RA
    header = struct.pack(">HHHHHH", txid, flags, 1, len(answers), 0, 0)
    question = encode_name(qname) + struct.pack(">HH", QTYPE_A, QCLASS_IN)
    body = bytearray(header + question)
    for addr in answers:
        body += b"\xc0\x0c"  # pointer to qname in the question
        body += struct.pack(">HHIH", QTYPE_A, QCLASS_IN, ttl, 4)
        body += socket.inet_aton(addr)
    return bytes(body)


def query(
    server: tuple[str, int], qname: str, timeout: float, retries: int = 0
) -> tuple[DnsMessage, float]:
    """Send an A query over UDP; returns (message, rtt seconds).

    Raises socket.timeout after the final retry; DnsDecodeError on a
    garbled response.
    """
    last_exc: Exception = socket.timeout("no attempt made")
    for _ in range(retries + 1):
        txid = random.randrange(0x10000)
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            sock.settimeout(timeout)
            start = time.monotonic()
            sock.sendto(encode_query(txid, qname), server)
            while True:
                data, _ = sock.recvfrom(4096)
                elapsed = time.monotonic() - start
                msg = decode_message(data)
                if msg.txid == txid and msg.is_response:
                    return msg, elapsed
        except socket.timeout as exc:
            last_exc = exc
        finally:
            sock.close()
    raise last_exc
