"""Key-value text format used for reports, options, and run manifests.

One ``key = value`` pair per line.  Keys are dotted lowercase identifiers;
values are written with full round-trip precision (``repr`` for floats, so
parsing the text recovers the exact binary value).  Blank lines and lines
starting with ``#`` are ignored when parsing.  Emission order is the
caller's insertion order, making output byte-deterministic.
"""

from __future__ import annotations

from collections.abc import Mapping

from .errors import FormatError

__all__ = ["fmt_value", "format_key_values", "parse_key_values"]


def fmt_value(value) -> str:
    """Render a value for a key-value file; floats keep full precision."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "none"
    return str(value)


def format_key_values(pairs) -> str:
    """Render pairs (mapping or iterable of 2-tuples) as key-value text."""
    if isinstance(pairs, Mapping):
        pairs = pairs.items()
    lines = []
    for key, value in pairs:
        key = str(key)
        if "=" in key or "\n" in key or not key.strip():
            raise FormatError(f"invalid key for key-value format: {key!r}")
        lines.append(f"{key} = {fmt_value(value)}")
    return "\n".join(lines) + "\n"


def parse_key_values(text: str) -> dict[str, str]:
    """Parse key-value text into an ordered dict of raw string values."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise FormatError(f"line {lineno}: empty key in {raw!r}")
        out[key] = value.strip()
    return out
