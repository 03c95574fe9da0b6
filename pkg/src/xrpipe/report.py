"""Structured report serialization shared by the simulators and the CLI."""

import json

__all__ = ["dumps_structured"]


def dumps_structured(report: dict) -> str:
    """Stable, machine-diffable JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=True) + "\n"
