"""
Structured text blocks shared by audits, checks and monitors.

A block renders as::

    [title]
    key: value
    ...

Keys keep insertion order so golden files stay stable. Floats use ``repr`` so
values survive a text round trip unchanged.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np


def format_value(value):
    if isinstance(value, bool):
        return "pass" if value else "fail"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return "none"
    if isinstance(value, (list, tuple)):
        return "(" + ", ".join(format_value(v) for v in value) + ")"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}={format_value(v)}" for k, v in value.items()) + "}"
    return str(value)


@dataclass
class ReportBlock:
    title: str
    items: Dict[str, Any] = field(default_factory=dict)

    def add(self, key, value):
        self.items[key] = value
        return self

    def render(self):
        lines = [f"[{self.title}]"]
        lines.extend(f"{key}: {format_value(value)}" for key, value in self.items.items())
        return "\n".join(lines) + "\n"


def render_blocks(blocks: List[ReportBlock]):
    return "\n".join(block.render() for block in blocks)


def parse_block(text):
    """Inverse of ``render`` for flat ``key: value`` lines; values stay strings."""
    title = None
    items = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]") and title is None:
            title = line[1:-1]
            continue
        key, sep, value = line.partition(":")
        if not sep:
            continue
        items[key.strip()] = value.strip()
    return ReportBlock(title or "", items)


@dataclass
class CheckReport:
    """Pass/fail verdict of a single property check with its worst margin."""

    name: str
    passed: bool
    margin: float
    witness: Dict[str, Any] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)
    skipped: bool = False

    def as_block(self, title=None):
        block = ReportBlock(title or self.name)
        block.add("verdict", "skipped" if self.skipped else self.passed)
        block.add("margin", self.margin)
        block.add("witness", self.witness)
        for key, value in self.details.items():
            block.add(key, value)
        return block
