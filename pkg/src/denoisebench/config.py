"""Flat ``key = value`` config text: parse, render canonically, digest.

The grammar is one ``key = value`` pair per line; blank lines and lines
starting with ``#`` are ignored; whitespace around key and value is stripped;
values are kept as strings (the consumer owns the types). Rendering sorts
keys and writes ``key = value`` lines, so equal dicts always produce
byte-identical text and therefore equal digests.
"""

from __future__ import annotations

import hashlib


class ConfigError(ValueError):
    pass


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def render_kv(values: dict[str, str]) -> str:
    lines = [f"{k} = {values[k]}" for k in sorted(values)]
    return "\n".join(lines) + "\n" if lines else ""


def digest_kv(values: dict[str, str]) -> str:
    """Hex digest of the canonical rendering; stable across key order."""
    return hashlib.sha256(render_kv(values).encode("utf-8")).hexdigest()


__all__ = ["parse_kv", "render_kv", "digest_kv", "ConfigError"]
