"""Lexical URL splitting.

This is deliberately not :func:`urllib.parse.urlsplit`: the split has to work
on scheme-less strings ("example.com/login") and must never normalise the
input, because every feature counts characters of the string as delivered.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..errors import EmptyUrl


@dataclass(frozen=True)
class ParsedUrl:
    raw: str
    scheme: Optional[str]
    authority: str
    hostname: str
    port: Optional[str]
    path: str
    query: Optional[str]

    @property
    def first_dir(self) -> str:
        """First path segment, without slashes ("" when the path is empty)."""
        if not self.path:
            return ""
        return self.path.split("/")[1] if self.path.startswith("/") else self.path.split("/")[0]


def _split_port(hostport: str) -> tuple[str, Optional[str]]:
    if hostport.startswith("["):
        # bracketed IPv6 literal
        end = hostport.find("]")
        if end != -1:
            rest = hostport[end + 1 :]
            if rest.startswith(":"):
                return hostport[: end + 1], rest[1:]
            return hostport, None
        return hostport, None
    host, sep, port = hostport.rpartition(":")
    if sep and port.isdigit():
        return host, port
    return hostport, None


def parse_url(raw: str) -> ParsedUrl:
    """Split ``raw`` into scheme, authority, path and query.

    The scheme ends at the first ``"://"``; without one, the string start is
    the authority. The authority ends at the first ``/`` or ``?``. The path
    keeps its leading ``/`` and ends at the first ``?``. The hostname is the
    part of the authority after the last ``@``, minus any ``:port``.

    >>> p = parse_url("http://u@10.0.0.1/a/b")
    >>> p.hostname, p.first_dir
    ('10.0.0.1', 'a')
    """
    if raw is None or not raw.strip():
        raise EmptyUrl("URL is empty")
    raw = raw.strip()

    scheme, sep, rest = raw.partition("://")
    if not sep:
        scheme, rest = None, raw

    cut = len(rest)
    for delim in ("/", "?"):
        i = rest.find(delim)
        if i != -1:
            cut = min(cut, i)
    authority, tail = rest[:cut], rest[cut:]

    path, qsep, query = tail.partition("?")
    hostport = authority.rpartition("@")[2]
    hostname, port = _split_port(hostport)
    return ParsedUrl(
        raw=raw,
        scheme=scheme,
        authority=authority,
        hostname=hostname,
        port=port,
        path=path,
        query=query if qsep else None,
    )
