"""Timed, atomic scene updates expressed as JSON Patch documents.

A :class:`PatchTransaction` applies either completely or not at all.  After
any operation that changes the order of a tracked top-level array (nodes,
meshes, accessors, media, ...) every integer reference into that array is
remapped so it keeps pointing at the same logical element.  References held
inside a freshly added value are taken as already correct for the document
at that point and are left alone.
"""

from __future__ import annotations

import bisect
import copy
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DanglingAfterRemove, PatchFormatError, TransactionFailed
from .scene import ARRAY_PATHS, REFERENCES, SceneGraph, _walk, pointer, validate_document

__all__ = [
    "PatchTransaction",
    "UpdateReport",
    "UpdateTimeline",
    "apply_patch",
    "apply_transaction",
    "json_equal",
    "parse_pointer",
    "reindex_references",
    "schedule_updates",
]

log = logging.getLogger(__name__)

OPS = ("add", "remove", "replace", "move", "copy", "test")


class _OpError(Exception):
    def __init__(self, reason, detail):
        super().__init__(detail)
        self.reason = reason
        self.detail = detail


def parse_pointer(ptr: str) -> list[str]:
    if not isinstance(ptr, str):
        raise _OpError("InvalidValue", f"pointer must be a string, got {ptr!r}")
    if ptr == "":
        return []
    if not ptr.startswith("/"):
        raise _OpError("InvalidValue", f"pointer {ptr!r} must start with '/'")
    return [t.replace("~1", "/").replace("~0", "~") for t in ptr[1:].split("/")]


def _index(token: str, size: int, allow_end: bool) -> int:
    if allow_end and token == "-":
        return size
    if not (token.isascii() and token.isdigit()) or (len(token) > 1 and token[0] == "0"):
        raise _OpError("InvalidValue", f"{token!r} is not an array index")
    i = int(token)
    if i > size or (i == size and not allow_end):
        raise _OpError("PathNotFound", f"index {i} out of range for array of {size}")
    return i


def _resolve(doc, tokens):
    node = doc
    for depth, tok in enumerate(tokens):
        if isinstance(node, dict):
            if tok not in node:
                raise _OpError("PathNotFound", f"no member {pointer(tokens[:depth + 1])}")
            node = node[tok]
        elif isinstance(node, list):
            node = node[_index(tok, len(node), allow_end=False)]
        else:
            raise _OpError("PathNotFound", f"{pointer(tokens[:depth])} is not a container")
    return node


def json_equal(a, b) -> bool:
    """Structural JSON equality: 1 == 1.0, but booleans never equal numbers."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(json_equal(a[k], b[k]) for k in a)
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(json_equal(x, y) for x, y in zip(a, b))
    return type(a) is type(b) and a == b


@dataclass(frozen=True)
class PatchTransaction:
    activation_time: int
    operations: tuple = ()

    def __post_init__(self):
        ops = tuple(self.operations)
        for i, op in enumerate(ops):
            if not isinstance(op, dict):
                raise PatchFormatError(f"operation {i} is not an object")
            kind = op.get("op")
            if kind not in OPS:
                raise PatchFormatError(f"operation {i}: unknown op {kind!r}")
            if not isinstance(op.get("path"), str):
                raise PatchFormatError(f"operation {i}: missing path")
            if kind in ("move", "copy") and not isinstance(op.get("from"), str):
                raise PatchFormatError(f"operation {i}: {kind} needs 'from'")
            if kind in ("add", "replace", "test") and "value" not in op:
                raise PatchFormatError(f"operation {i}: {kind} needs 'value'")
        object.__setattr__(self, "operations", ops)

    @classmethod
    def from_json(cls, data, activation_time: int | None = None) -> "PatchTransaction":
        """Accept a bare patch array or an ``{activation_time, patch}`` envelope."""
        if isinstance(data, (str, bytes)):
            try:
                data = json.loads(data)
            except json.JSONDecodeError as exc:
                raise PatchFormatError(f"patch is not valid JSON: {exc}") from None
        if isinstance(data, dict):
            if "patch" not in data:
                raise PatchFormatError("envelope needs a 'patch' member")
            t = data.get("activation_time", 0) if activation_time is None else activation_time
            data = data["patch"]
        else:
            t = 0 if activation_time is None else activation_time
        if not isinstance(data, list):
            raise PatchFormatError("a patch is an array of operations")
        if isinstance(t, bool) or not isinstance(t, int):
            raise PatchFormatError(f"activation_time must be an integer tick count, got {t!r}")
        return cls(t, tuple(copy.deepcopy(data)))

    def to_json(self) -> dict:
        return {"activation_time": self.activation_time, "patch": list(self.operations)}


# reference repair

def _tracked_array(parent_tokens) -> str | None:
    for name, path in ARRAY_PATHS.items():
        if tuple(parent_tokens) == path:
            return name
    return None


def _remap(change: dict):
    if "removed" in change:
        i = change["removed"]
        return lambda r: None if r == i else (r - 1 if r > i else r)
    if "inserted" in change:
        i = change["inserted"]
        return lambda r: r + 1 if r >= i else r
    if "moved" in change:
        f, t = change["moved"]

        def moved(r):
            if r == f:
                return t
            if f < t and f < r <= t:
                return r - 1
            if t < f and t <= r < f:
                return r + 1
            return r
        return moved
    raise ValueError(f"unknown change {change!r}")


def reindex_references(document: dict, array: str, change: dict, skip: tuple = None) -> dict:
    """Remap every reference into ``array`` after a structural edit, in place.

    ``change`` is ``{"removed": i}``, ``{"inserted": i}`` or ``{"moved": (from, to)}``.
    Paths under ``skip`` (a token tuple) are not touched.  Raises
    :class:`DanglingAfterRemove` if a reference pointed at a removed element;
    the document is then left unmodified.
    """
    if array not in ARRAY_PATHS:
        raise ValueError(f"{array!r} is not a tracked array")
    fn = _remap(change)
    updates, dangling = [], []
    for pattern, target in REFERENCES:
        if target != array:
            continue
        for path, value in _walk(document, pattern):
            if skip is not None and tuple(map(str, path[:len(skip)])) == skip:
                continue
            if isinstance(value, bool) or not isinstance(value, int):
                continue
            new = fn(value)
            if new is None:
                dangling.append(pointer(path))
            elif new != value:
                updates.append((path, new))
    if dangling:
        raise DanglingAfterRemove(array, change["removed"], dangling)
    for path, new in updates:
        node = document
        for p in path[:-1]:
            node = node[p]
        node[path[-1]] = new
    return document


# operation application (mutates ``doc``; the caller owns a private copy)

def _add(doc, tokens, value):
    if not tokens:
        return value, None
    parent = _resolve(doc, tokens[:-1])
    key = tokens[-1]
    if isinstance(parent, list):
        i = _index(key, len(parent), allow_end=True)
        parent.insert(i, value)
        return doc, i
    if isinstance(parent, dict):
        parent[key] = value
        return doc, None
    raise _OpError("PathNotFound", f"{pointer(tokens[:-1])} is not a container")


def _remove(doc, tokens):
    if not tokens:
        raise _OpError("InvalidValue", "cannot remove the document root")
    parent = _resolve(doc, tokens[:-1])
    key = tokens[-1]
    if isinstance(parent, list):
        i = _index(key, len(parent), allow_end=False)
        return parent.pop(i), i
    if isinstance(parent, dict):
        if key not in parent:
            raise _OpError("PathNotFound", f"no member {pointer(tokens)}")
        return parent.pop(key), None
    raise _OpError("PathNotFound", f"{pointer(tokens[:-1])} is not a container")


def _reindex(doc, array, change, skip=None):
    try:
        reindex_references(doc, array, change, skip=skip)
    except DanglingAfterRemove as exc:
        raise _OpError("ResultInvalid", str(exc)) from None


def _apply_op(doc, op, track: bool):
    kind = op["op"]
    tokens = parse_pointer(op["path"])
    if kind == "test":
        if not json_equal(_resolve(doc, tokens), op["value"]):
            raise _OpError("TestFailed", f"value at {op['path']} differs")
        return doc
    if kind == "add":
        doc, i = _add(doc, tokens, copy.deepcopy(op["value"]))
        array = _tracked_array(tokens[:-1]) if tokens else None
        if track and array and i is not None:
            _reindex(doc, array, {"inserted": i}, skip=tuple(tokens[:-1]) + (str(i),))
        return doc
    if kind == "remove":
        _, i = _remove(doc, tokens)
        array = _tracked_array(tokens[:-1])
        if track and array and i is not None:
            _reindex(doc, array, {"removed": i})
        return doc
    if kind == "replace":
        _resolve(doc, tokens)
        if not tokens:
            return copy.deepcopy(op["value"])
        parent = _resolve(doc, tokens[:-1])
        key = tokens[-1]
        if isinstance(parent, list):
            parent[_index(key, len(parent), allow_end=False)] = copy.deepcopy(op["value"])
        else:
            parent[key] = copy.deepcopy(op["value"])
        return doc
    src = parse_pointer(op["from"])
    if kind == "copy":
        value = copy.deepcopy(_resolve(doc, src))
        doc, i = _add(doc, tokens, value)
        array = _tracked_array(tokens[:-1]) if tokens else None
        if track and array and i is not None:
            _reindex(doc, array, {"inserted": i}, skip=tuple(tokens[:-1]) + (str(i),))
        return doc
    # move
    if src == tokens:
        _resolve(doc, src)
        return doc
    if tokens[:len(src)] == src:
        raise _OpError("InvalidValue", f"cannot move {op['from']} into its own child {op['path']}")
    src_array = _tracked_array(src[:-1])
    dst_array = _tracked_array(tokens[:-1]) if tokens else None
    value, i = _remove(doc, src)
    if track and src_array and dst_array == src_array and i is not None:
        doc, j = _add(doc, tokens, value)
        _reindex(doc, src_array, {"moved": (i, j)})
        return doc
    if track and src_array and i is not None:
        _reindex(doc, src_array, {"removed": i})
    doc, j = _add(doc, tokens, value)
    if track and dst_array and j is not None:
        _reindex(doc, dst_array, {"inserted": j}, skip=tuple(tokens[:-1]) + (str(j),))
    return doc


def apply_patch(document, operations: Iterable[dict], track_references: bool = False):
    """Plain RFC 6902 application on a copy; raises :class:`TransactionFailed`."""
    doc = copy.deepcopy(document)
    for n, op in enumerate(operations):
        try:
            doc = _apply_op(doc, op, track_references)
        except _OpError as exc:
            raise TransactionFailed(n, exc.reason, exc.detail) from None
    return doc


def apply_transaction(document, txn: PatchTransaction):
    """Apply every operation of ``txn`` or none of them.

    Returns the post-image (a new object; a :class:`SceneGraph` in gives a
    :class:`SceneGraph` out).  On failure the input is untouched and
    :class:`TransactionFailed` names the operation and reason.
    """
    as_graph = isinstance(document, SceneGraph)
    doc = document.to_document() if as_graph else document
    result = apply_patch(doc, txn.operations, track_references=True)
    errors = [v for v in validate_document(result) if v.severity == "error"]
    if errors:
        raise TransactionFailed(None, "ResultInvalid", "; ".join(map(str, errors)))
    return SceneGraph.from_json(result) if as_graph else result


# timelines

@dataclass(frozen=True)
class UpdateReport:
    index: int
    activation_time: int
    applied: bool
    reason: str | None = None
    op_index: int | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "index": self.index, "activation_time": self.activation_time, "applied": self.applied,
            "reason": self.reason, "op_index": self.op_index, "detail": self.detail,
        }


@dataclass
class UpdateTimeline:
    """Document state as a function of presentation time."""

    initial: dict
    transactions: tuple[PatchTransaction, ...]
    reports: list[UpdateReport] = field(default_factory=list)
    _times: list[int] = field(default_factory=list, repr=False)
    _states: list[dict] = field(default_factory=list, repr=False)

    def state_at(self, t: int) -> dict:
        """Initial document with every transaction active at or before ``t`` applied."""
        k = bisect.bisect_right(self._times, t)
        return copy.deepcopy(self._states[k - 1] if k else self.initial)


def schedule_updates(initial, transactions: Sequence[PatchTransaction],
                     on_failure: str = "skip") -> UpdateTimeline:
    """Precompute states for a list of transactions.

    Transactions are ordered by activation time (ties keep input order).  A
    failing transaction is logged and skipped; with ``on_failure="abort"``
    every later transaction is reported as not applied instead.
    """
    if on_failure not in ("skip", "abort"):
        raise ValueError("on_failure must be 'skip' or 'abort'")
    doc = initial.to_document() if isinstance(initial, SceneGraph) else copy.deepcopy(initial)
    order = sorted(range(len(transactions)), key=lambda i: (transactions[i].activation_time, i))
    timeline = UpdateTimeline(doc, tuple(transactions[i] for i in order))
    current = doc
    aborted = False
    for i in order:
        txn = transactions[i]
        if aborted:
            timeline.reports.append(UpdateReport(i, txn.activation_time, False, "Aborted"))
            continue
        try:
            current = apply_transaction(current, txn)
        except TransactionFailed as exc:
            log.warning("update %d at t=%d skipped: %s", i, txn.activation_time, exc)
            timeline.reports.append(
                UpdateReport(i, txn.activation_time, False, exc.reason, exc.op_index, exc.detail))
            aborted = on_failure == "abort"
            continue
        timeline.reports.append(UpdateReport(i, txn.activation_time, True))
        timeline._times.append(txn.activation_time)
        timeline._states.append(current)
    return timeline
