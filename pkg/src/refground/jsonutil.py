"""Canonical JSON serialization for scene documents and reports.

Canonical form: keys sorted, every number rendered as 6-decimal
fixed-point, two-space indentation. Two documents with the same values
therefore serialize to identical bytes.
"""
from __future__ import annotations

import json
from typing import Any


def _render(value: Any, indent: int) -> str:
    pad = "  " * indent
    child_pad = "  " * (indent + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = []
        for key in sorted(value):
            if not isinstance(key, str):
                raise TypeError(f"non-string key {key!r} in canonical document")
            items.append(f"{child_pad}{json.dumps(key)}: {_render(value[key], indent + 1)}")
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{child_pad}{_render(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, (int, float)):
        return f"{float(value):.6f}"
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    raise TypeError(f"unsupported type {type(value).__name__} in canonical document")


def canonical_json(document: Any) -> str:
    """Serialize ``document`` to canonical text (trailing newline included)."""
    return _render(document, 0) + "\n"


def canonical_bytes(document: Any) -> bytes:
    return canonical_json(document).encode("utf-8")


def stable_json(document: Any) -> str:
    """Deterministic but ordinary JSON (sorted keys, default float repr).

    Used for reports, where integer counts should stay integers.
    """
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
