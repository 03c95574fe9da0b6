"""Deterministic toy elementary stream standing in for coded video.

A :class:`ToyStream` is an ordered list of :class:`AccessUnit` records in
decode order.  ``TOY_TILED`` streams carry one unit per tile per picture;
units sharing a POC are the tiles of one coded picture.

Binary container (little endian)::

    "TOYS" | version u16 | stream_id u32 | profile u8 | grid_cols u8 |
    grid_rows u8 | reserved u8 | tick_rate u32 | unit_count u32

followed by ``unit_count`` records::

    poc u32 | dts i64 | pts i64 | width u16 | height u16 | tile_col u8 |
    tile_row u8 | flags u8 | reserved u8 | payload_len u32 | payload
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, replace

from .errors import BadMagic, InvariantViolation, TruncatedInput

__all__ = [
    "MAGIC",
    "VERSION",
    "HEADER",
    "UNIT_HEADER",
    "CodecProfile",
    "AccessUnit",
    "ToyStream",
    "StreamSpec",
    "validate_stream",
    "serialize_stream",
    "parse_stream",
    "make_test_stream",
    "payload_pattern",
]

MAGIC = b"TOYS"
VERSION = 1
HEADER = struct.Struct("<4sHIBBBBII")
UNIT_HEADER = struct.Struct("<IqqHHBBBBI")

FLAG_PARAMETER_SET = 0x01

_U8 = 0xFF
_U16 = 0xFFFF
_U32 = 0xFFFFFFFF
_I64_MIN = -(1 << 63)
_I64_MAX = (1 << 63) - 1


class CodecProfile(enum.IntEnum):
    TOY_BASE = 0
    TOY_TILED = 1


@dataclass(frozen=True)
class AccessUnit:
    """One coded unit: a whole picture (``TOY_BASE``), one tile of a picture
    (``TOY_TILED``) or a parameter set."""

    stream_id: int
    poc: int
    dts: int
    pts: int
    width: int
    height: int
    tile_col: int = 0
    tile_row: int = 0
    payload: bytes = b""
    is_parameter_set: bool = False

    @property
    def tile(self) -> tuple[int, int]:
        return (self.tile_col, self.tile_row)


@dataclass(frozen=True)
class ToyStream:
    stream_id: int
    codec_profile: CodecProfile
    tick_rate: int
    grid_cols: int = 1
    grid_rows: int = 1
    units: tuple[AccessUnit, ...] = ()

    def __post_init__(self):
        # normalise so equality does not depend on list vs tuple
        if not isinstance(self.units, tuple):
            object.__setattr__(self, "units", tuple(self.units))
        if not isinstance(self.codec_profile, CodecProfile):
            object.__setattr__(self, "codec_profile", CodecProfile(self.codec_profile))

    @property
    def pictures(self) -> list[AccessUnit]:
        """Non-parameter-set units."""
        return [u for u in self.units if not u.is_parameter_set]

    def pocs(self) -> list[int]:
        """Distinct picture POCs in decode order."""
        return [poc for poc, _ in self.picture_units()]

    def picture_units(self) -> list[tuple[int, list[AccessUnit]]]:
        """Group picture units by POC, preserving first-appearance order."""
        order: list[int] = []
        groups: dict[int, list[AccessUnit]] = {}
        for u in self.units:
            if u.is_parameter_set:
                continue
            if u.poc not in groups:
                order.append(u.poc)
                groups[u.poc] = []
            groups[u.poc].append(u)
        return [(p, groups[p]) for p in order]

    def with_units(self, units, **changes) -> "ToyStream":
        return replace(self, units=tuple(units), **changes)


def validate_stream(stream: ToyStream) -> ToyStream:
    """Check every container and stream invariant; return the stream unchanged.

    Raises :class:`InvariantViolation` naming the first broken rule.
    """
    def fail(msg):
        raise InvariantViolation(msg)

    if not 0 <= stream.stream_id <= _U32:
        fail(f"stream_id {stream.stream_id} outside u32")
    if not 0 < stream.tick_rate <= _U32:
        fail(f"tick_rate {stream.tick_rate} must be a positive u32")
    if not (1 <= stream.grid_cols <= _U8 and 1 <= stream.grid_rows <= _U8):
        fail(f"grid {stream.grid_cols}x{stream.grid_rows} outside 1..255")
    if stream.codec_profile == CodecProfile.TOY_BASE and (stream.grid_cols, stream.grid_rows) != (1, 1):
        fail("TOY_BASE streams use a 1x1 grid")

    prev_dts = None
    seen_pictures: set[tuple[int, int, int]] = set()
    tile_dims: dict[tuple[int, int], tuple[int, int]] = {}
    for i, u in enumerate(stream.units):
        where = f"unit {i}"
        if u.stream_id != stream.stream_id:
            fail(f"{where}: stream_id {u.stream_id} != {stream.stream_id}")
        if not 0 <= u.poc <= _U32:
            fail(f"{where}: poc {u.poc} outside u32")
        if not (_I64_MIN <= u.dts <= _I64_MAX and _I64_MIN <= u.pts <= _I64_MAX):
            fail(f"{where}: timestamp outside i64")
        if u.pts < u.dts:
            fail(f"{where}: pts {u.pts} < dts {u.dts}")
        if prev_dts is not None and u.dts < prev_dts:
            fail(f"{where}: dts {u.dts} decreases (previous {prev_dts})")
        prev_dts = u.dts
        if not (0 <= u.width <= _U16 and 0 <= u.height <= _U16):
            fail(f"{where}: dimensions outside u16")
        if not (0 <= u.tile_col <= _U8 and 0 <= u.tile_row <= _U8):
            fail(f"{where}: tile index outside u8")
        if len(u.payload) > _U32:
            fail(f"{where}: payload too large")
        if u.is_parameter_set:
            continue
        if u.width <= 0 or u.height <= 0:
            fail(f"{where}: picture unit needs positive width and height")
        if u.tile_col >= stream.grid_cols or u.tile_row >= stream.grid_rows:
            fail(f"{where}: tile {u.tile} outside {stream.grid_cols}x{stream.grid_rows} grid")
        key = (u.poc, u.tile_col, u.tile_row)
        if key in seen_pictures:
            fail(f"{where}: duplicate poc {u.poc} at tile {u.tile}")
        seen_pictures.add(key)
        dims = tile_dims.setdefault(u.tile, (u.width, u.height))
        if dims != (u.width, u.height):
            fail(f"{where}: tile {u.tile} is {u.width}x{u.height}, earlier {dims[0]}x{dims[1]}")
    return stream


def serialize_stream(stream: ToyStream) -> bytes:
    validate_stream(stream)
    out = [
        HEADER.pack(
            MAGIC, VERSION, stream.stream_id, int(stream.codec_profile),
            stream.grid_cols, stream.grid_rows, 0, stream.tick_rate, len(stream.units),
        )
    ]
    for u in stream.units:
        flags = FLAG_PARAMETER_SET if u.is_parameter_set else 0
        out.append(
            UNIT_HEADER.pack(
                u.poc, u.dts, u.pts, u.width, u.height, u.tile_col, u.tile_row,
                flags, 0, len(u.payload),
            )
        )
        out.append(bytes(u.payload))
    return b"".join(out)


def parse_stream(data: bytes) -> ToyStream:
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {data[:4]!r}")
    if len(data) < HEADER.size:
        raise TruncatedInput(f"header needs {HEADER.size} bytes, got {len(data)}")
    _, version, stream_id, profile, cols, rows, _, tick_rate, count = HEADER.unpack_from(data)
    if version != VERSION:
        raise InvariantViolation(f"unsupported container version {version}")
    try:
        profile = CodecProfile(profile)
    except ValueError:
        raise InvariantViolation(f"unknown codec profile {profile}") from None

    units = []
    offset = HEADER.size
    for i in range(count):
        if offset + UNIT_HEADER.size > len(data):
            raise TruncatedInput(f"header declares {count} units, data ends inside unit {i}")
        poc, dts, pts, w, h, col, row, flags, _, plen = UNIT_HEADER.unpack_from(data, offset)
        offset += UNIT_HEADER.size
        if offset + plen > len(data):
            raise TruncatedInput(f"unit {i} declares {plen} payload bytes, {len(data) - offset} remain")
        payload = data[offset:offset + plen]
        offset += plen
        units.append(AccessUnit(
            stream_id=stream_id, poc=poc, dts=dts, pts=pts, width=w, height=h,
            tile_col=col, tile_row=row, payload=payload,
            is_parameter_set=bool(flags & FLAG_PARAMETER_SET),
        ))
    if offset != len(data):
        raise InvariantViolation(f"{len(data) - offset} trailing bytes after last unit")
    stream = ToyStream(stream_id, profile, tick_rate, cols, rows, tuple(units))
    return validate_stream(stream)


def payload_pattern(stream_id: int, poc: int, tile: tuple[int, int], length: int) -> bytes:
    """Deterministic filler bytes keyed by stream, picture and tile."""
    key = struct.pack("<IIBB", stream_id, poc, tile[0], tile[1])
    return hashlib.shake_128(b"toy-payload" + key).digest(length)


@dataclass(frozen=True)
class StreamSpec:
    """Fixture description accepted by :func:`make_test_stream`.

    ``width``/``height`` are the full picture size; with a grid larger than
    1x1 they must divide evenly into tiles.
    """

    frames: int
    width: int
    height: int
    grid: tuple[int, int] = (1, 1)
    fps: int = 30
    payload_bytes_per_frame: int = 16
    tick_rate: int = 90_000
    stream_id: int = 0
    codec_profile: CodecProfile | None = None
    first_poc: int = 0
    start_time: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "StreamSpec":
        d = dict(d)
        if "grid" in d:
            d["grid"] = tuple(d["grid"])
        if d.get("codec_profile") is not None and not isinstance(d["codec_profile"], CodecProfile):
            d["codec_profile"] = CodecProfile[d["codec_profile"]]
        return cls(**d)


def make_test_stream(spec: StreamSpec | dict) -> ToyStream:
    if isinstance(spec, dict):
        spec = StreamSpec.from_dict(spec)
    cols, rows = spec.grid
    for name in ("frames", "width", "height", "fps", "tick_rate"):
        if getattr(spec, name) <= 0:
            raise ValueError(f"{name} must be positive")
    if cols <= 0 or rows <= 0:
        raise ValueError("grid dimensions must be positive")
    if spec.payload_bytes_per_frame < 0:
        raise ValueError("payload_bytes_per_frame must be non-negative")
    if spec.width % cols or spec.height % rows:
        raise ValueError(f"{spec.width}x{spec.height} does not split into a {cols}x{rows} grid")
    profile = spec.codec_profile
    if profile is None:
        profile = CodecProfile.TOY_BASE if (cols, rows) == (1, 1) else CodecProfile.TOY_TILED
    tw, th = spec.width // cols, spec.height // rows

    units = []
    for n in range(spec.frames):
        poc = spec.first_poc + n
        t = spec.start_time + n * spec.tick_rate // spec.fps
        for r in range(rows):
            for c in range(cols):
                units.append(AccessUnit(
                    stream_id=spec.stream_id, poc=poc, dts=t, pts=t, width=tw, height=th,
                    tile_col=c, tile_row=r,
                    payload=payload_pattern(spec.stream_id, poc, (c, r), spec.payload_bytes_per_frame),
                ))
    stream = ToyStream(spec.stream_id, profile, spec.tick_rate, cols, rows, tuple(units))
    return validate_stream(stream)
