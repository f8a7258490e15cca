"""Collects one result line per acceptance criterion for the terminal summary."""

import re

LINES: list[str] = []


def record(label: str, ok: bool, detail: str) -> str:
    line = f"criterion {label}: {'PASS' if ok else 'FAIL'} - {detail}"
    LINES.append(line)
    print(line)
    return line


def sort_key(line: str):
    m = re.match(r"criterion (\d+)(\w*)", line)
    return (int(m.group(1)), m.group(2)) if m else (99, line)
