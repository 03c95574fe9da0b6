"""Bitstream-to-bitstream transforms that let N source streams feed one decoder.

``filter``
    keep a subset of tiles (and optionally a POC window) of a tiled stream.
``insert``
    inject one access unit at a position.
``append``
    temporal concatenation with POC and timestamp rebasing.
``stack``
    spatial composition of same-structured streams into one tiled stream.

Every result is re-validated before it is returned.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DtsOrderViolation,
    EmptyInput,
    EmptyResult,
    FrameStructureMismatch,
    InvariantViolation,
    LayoutArityMismatch,
    ParameterMismatch,
    PositionOutOfRange,
    UnknownTile,
)
from .toy_stream import AccessUnit, CodecProfile, ToyStream, validate_stream
from .vdi_engine import tile_layout

__all__ = [
    "TilePredicate",
    "StackLayout",
    "filter_tiles",
    "insert_unit",
    "append_streams",
    "stack_streams",
    "nominal_frame_interval",
    "picture_size",
    "compose",
]


@dataclass(frozen=True)
class TilePredicate:
    keep: frozenset
    poc_range: tuple[int, int] | None = None

    def __post_init__(self):
        keep = frozenset((int(c), int(r)) for c, r in self.keep)
        if not keep:
            raise ValueError("a tile predicate must keep at least one tile")
        object.__setattr__(self, "keep", keep)
        if self.poc_range is not None:
            lo, hi = self.poc_range
            if lo > hi:
                raise ValueError(f"empty poc range {self.poc_range}")
            object.__setattr__(self, "poc_range", (int(lo), int(hi)))

    def matches(self, unit: AccessUnit) -> bool:
        if unit.tile not in self.keep:
            return False
        if self.poc_range is not None:
            lo, hi = self.poc_range
            return lo <= unit.poc <= hi
        return True


@dataclass(frozen=True)
class StackLayout:
    """``slots`` lists source stream ids row-major over a ``cols`` x ``rows`` grid."""

    cols: int
    rows: int
    slots: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))
        if self.cols < 1 or self.rows < 1:
            raise ValueError("layout needs at least one column and row")
        if len(set(self.slots)) != len(self.slots):
            raise ValueError("a source may occupy only one slot")

    def position(self, slot: int) -> tuple[int, int]:
        return slot % self.cols, slot // self.cols


def picture_size(stream: ToyStream) -> tuple[int, int]:
    """Full decoded picture size (sum of tile column widths and row heights)."""
    widths, heights = tile_layout(stream)
    return sum(widths), sum(heights)


def nominal_frame_interval(stream: ToyStream) -> int:
    """Median decode-time step between consecutive pictures (0 for a single picture)."""
    dts = [units[0].dts for _, units in stream.picture_units()]
    deltas = [b - a for a, b in zip(dts, dts[1:])]
    if not deltas:
        return 0
    return int(statistics.median_low(deltas))


def filter_tiles(stream: ToyStream, predicate: TilePredicate) -> ToyStream:
    if stream.codec_profile != CodecProfile.TOY_TILED:
        raise ParameterMismatch("filtering needs a TOY_TILED stream")
    for c, r in sorted(predicate.keep):
        if c >= stream.grid_cols or r >= stream.grid_rows:
            raise UnknownTile(f"tile ({c}, {r}) outside {stream.grid_cols}x{stream.grid_rows} grid")
    kept = [u for u in stream.units if u.is_parameter_set or predicate.matches(u)]
    if not any(not u.is_parameter_set for u in kept):
        raise EmptyResult("no access unit matches the predicate")

    tiles = {u.tile for u in kept if not u.is_parameter_set}
    c0 = min(c for c, _ in tiles)
    r0 = min(r for _, r in tiles)
    cols = max(c for c, _ in tiles) - c0 + 1
    rows = max(r for _, r in tiles) - r0 + 1
    units = [u if u.is_parameter_set else replace(u, tile_col=u.tile_col - c0, tile_row=u.tile_row - r0)
             for u in kept]
    if (c0, r0, cols, rows) == (0, 0, stream.grid_cols, stream.grid_rows) and len(units) == len(stream.units):
        return stream
    return validate_stream(stream.with_units(units, grid_cols=cols, grid_rows=rows))


def insert_unit(stream: ToyStream, unit: AccessUnit, position: int) -> ToyStream:
    """Insert ``unit`` before index ``position``.

    A parameter-set unit takes the dts (and pts) of the unit it precedes, so
    it never disturbs decode order.
    """
    n = len(stream.units)
    if not 0 <= position <= n:
        raise PositionOutOfRange(f"position {position} outside 0..{n}")
    unit = replace(unit, stream_id=stream.stream_id)
    if unit.is_parameter_set:
        if position < n:
            succ = stream.units[position]
            unit = replace(unit, dts=succ.dts, pts=succ.dts)
        elif n:
            last = stream.units[-1]
            unit = replace(unit, dts=last.dts, pts=last.dts)
    else:
        if position > 0 and unit.dts < stream.units[position - 1].dts:
            raise DtsOrderViolation(
                f"dts {unit.dts} precedes predecessor dts {stream.units[position - 1].dts}")
        if position < n and unit.dts > stream.units[position].dts:
            raise DtsOrderViolation(
                f"dts {unit.dts} follows successor dts {stream.units[position].dts}")
    units = list(stream.units)
    units.insert(position, unit)
    return validate_stream(stream.with_units(units))


def _encoding_parameters(stream: ToyStream):
    dims = sorted({(u.tile, u.width, u.height) for u in stream.units if not u.is_parameter_set})
    return stream.codec_profile, stream.tick_rate, stream.grid_cols, stream.grid_rows, tuple(dims)


def append_streams(streams: Sequence[ToyStream]) -> ToyStream:
    """Concatenate streams in time.

    Each following stream is shifted so its POCs continue after the largest
    POC so far and its first dts lands one nominal frame interval (taken from
    the first stream) after the last dts so far.
    """
    streams = list(streams)
    if not streams:
        raise EmptyInput("nothing to append")
    first = streams[0]
    if len(streams) == 1:
        return validate_stream(first)
    params = _encoding_parameters(first)
    for s in streams[1:]:
        if _encoding_parameters(s) != params:
            raise ParameterMismatch(
                f"stream {s.stream_id} does not share encoding parameters with stream {first.stream_id}")
    interval = nominal_frame_interval(first)
    if interval <= 0:
        # single-picture first stream: borrow the step from the others
        interval = max((nominal_frame_interval(s) for s in streams[1:]), default=0)
    if interval <= 0:
        raise ParameterMismatch("cannot infer a frame interval: no stream has two pictures")

    units = list(first.units)
    for s in streams[1:]:
        if not s.units:
            continue
        max_poc = max((u.poc for u in units if not u.is_parameter_set), default=-1)
        last_dts = max((u.dts for u in units), default=None)
        poc_shift = max_poc + 1 - min((u.poc for u in s.units if not u.is_parameter_set), default=0)
        t_shift = 0 if last_dts is None else last_dts + interval - s.units[0].dts
        for u in s.units:
            units.append(replace(
                u, stream_id=first.stream_id,
                poc=u.poc if u.is_parameter_set else u.poc + poc_shift,
                dts=u.dts + t_shift, pts=u.pts + t_shift,
            ))
    return validate_stream(first.with_units(units))


def stack_streams(streams: Sequence[ToyStream], layout: StackLayout) -> ToyStream:
    """Compose same-structured streams side by side into one tiled stream.

    Every source must be untiled (or a single tile) and share the same POC
    and dts sequence; sources in one layout column share a width and sources
    in one row share a height.  The output takes the first slot's stream id.
    """
    streams = list(streams)
    if len(layout.slots) != layout.cols * layout.rows:
        raise LayoutArityMismatch(f"{len(layout.slots)} slots for a {layout.cols}x{layout.rows} grid")
    if len(streams) != len(layout.slots):
        raise LayoutArityMismatch(f"{len(streams)} streams for {len(layout.slots)} slots")
    by_id = {s.stream_id: s for s in streams}
    if set(by_id) != set(layout.slots):
        raise LayoutArityMismatch("layout slots do not name the given streams")
    if layout.cols > 255 or layout.rows > 255:
        raise LayoutArityMismatch("grid exceeds 255 tiles per axis")

    ref = by_id[layout.slots[0]]
    structure = None
    tick_rate = ref.tick_rate
    col_w: dict[int, int] = {}
    row_h: dict[int, int] = {}
    for slot, sid in enumerate(layout.slots):
        s = by_id[sid]
        if (s.grid_cols, s.grid_rows) != (1, 1):
            raise FrameStructureMismatch(f"stream {sid} is tiled {s.grid_cols}x{s.grid_rows}")
        if s.tick_rate != tick_rate:
            raise FrameStructureMismatch(f"stream {sid} tick rate {s.tick_rate} != {tick_rate}")
        pics = [u for u in s.units if not u.is_parameter_set]
        shape = [(u.poc, u.dts, u.pts) for u in pics]
        if structure is None:
            structure = shape
        elif shape != structure:
            raise FrameStructureMismatch(f"stream {sid} has a different poc/dts/pts sequence")
        if not pics:
            raise FrameStructureMismatch(f"stream {sid} has no pictures")
        c, r = layout.position(slot)
        w, h = pics[0].width, pics[0].height
        if col_w.setdefault(c, w) != w or row_h.setdefault(r, h) != h:
            raise FrameStructureMismatch(f"stream {sid} is {w}x{h}, which does not fit slot ({c}, {r})")

    pictures = [[u for u in by_id[sid].units if not u.is_parameter_set] for sid in layout.slots]
    units = []
    i = 0
    # parameter sets of the first slot keep their place in decode order
    for u in ref.units:
        if u.is_parameter_set:
            units.append(u)
            continue
        for slot in range(len(layout.slots)):
            c, r = layout.position(slot)
            units.append(replace(pictures[slot][i], stream_id=ref.stream_id, tile_col=c, tile_row=r))
        i += 1
    stacked = ToyStream(ref.stream_id, CodecProfile.TOY_TILED, tick_rate, layout.cols, layout.rows, tuple(units))
    try:
        return validate_stream(stacked)
    except InvariantViolation as exc:
        raise FrameStructureMismatch(str(exc)) from exc


def compose(pictures: Iterable, layout: StackLayout) -> np.ndarray:
    """Spatially compose decoded pictures (one per slot, row-major) into one array."""
    pictures = list(pictures)
    rows = []
    for r in range(layout.rows):
        rows.append(np.hstack([pictures[r * layout.cols + c].array() for c in range(layout.cols)]))
    return np.vstack(rows)
