"""Simulated video decoding engine.

The engine owns a static capability envelope (instance slots, aggregate luma
sample rate, maximum picture size) and hands out decoder instances against
it.  Instances can be collected into groups whose members are time-locked:
within a group no member may get more than ``skew_tolerance_pocs`` pictures
ahead of the slowest member.

Decoding a toy access unit expands a keyed hash of its payload to
``width * height`` bytes, so every decoded picture is reproducible and
formatting operations can be checked byte for byte.
"""

from __future__ import annotations

import enum
import hashlib
import itertools
import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .circular_buffer import CircularBuffer
from .errors import (
    CropOutOfBounds,
    DecodeError,
    InsufficientCapacity,
    InvalidState,
    NoOutputBuffer,
    OversizedPicture,
    ProfileMismatch,
    UnknownCodecProfile,
    UnknownGroup,
    UnknownInstance,
    UnknownParameter,
    ZeroCapacity,
)
from .toy_stream import AccessUnit, CodecProfile, ToyStream

log = logging.getLogger(__name__)

__all__ = [
    "CapabilityEnvelope",
    "CapabilityReport",
    "DecodeRequirements",
    "DecoderInstance",
    "InstanceGroup",
    "InstanceState",
    "DecodedPicture",
    "DecodeEvent",
    "VideoDecodingEngine",
    "expand_payload",
    "tile_layout",
    "decode_picture",
    "decode_stream",
    "crop_pixels",
]

PARAMETERS = ("crop_window",)


# toy decoder

def expand_payload(payload: bytes, n: int) -> bytes:
    return hashlib.shake_256(b"toy-decode" + bytes(payload)).digest(n)


def tile_layout(stream: ToyStream) -> tuple[list[int], list[int]]:
    """Column widths and row heights of the stream's tile grid.

    Columns (rows) never used by any unit have size 0.
    """
    widths = [0] * stream.grid_cols
    heights = [0] * stream.grid_rows
    for u in stream.units:
        if u.is_parameter_set:
            continue
        for sizes, i, v, axis in ((widths, u.tile_col, u.width, "column"), (heights, u.tile_row, u.height, "row")):
            if sizes[i] == 0:
                sizes[i] = v
            elif sizes[i] != v:
                raise DecodeError(f"tile {axis} {i} has inconsistent sizes {sizes[i]} and {v}")
    return widths, heights


@dataclass(frozen=True)
class DecodedPicture:
    source_stream_id: int
    poc: int
    pts: int
    width: int
    height: int
    pixels: bytes = field(repr=False)

    def array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width)


def crop_pixels(pixels: np.ndarray, crop_window) -> np.ndarray:
    if crop_window is None:
        return pixels
    x, y, w, h = crop_window
    return pixels[y:y + h, x:x + w]


def decode_picture(units: Iterable[AccessUnit], layout=None, crop_window=None) -> DecodedPicture:
    """Decode the units of one picture (all tiles sharing a POC).

    ``layout`` is ``(column_widths, row_heights)``; without it the picture is
    a single untiled unit.  Missing tiles decode as zeros.
    """
    units = [u for u in units if not u.is_parameter_set]
    if not units:
        raise DecodeError("picture has no units")
    if layout is None:
        if len(units) != 1:
            raise DecodeError("several units for an untiled picture")
        layout = ([units[0].width], [units[0].height])
    widths, heights = layout
    xs = np.concatenate(([0], np.cumsum(widths))).astype(int)
    ys = np.concatenate(([0], np.cumsum(heights))).astype(int)
    canvas = np.zeros((int(ys[-1]), int(xs[-1])), dtype=np.uint8)
    for u in units:
        tile = np.frombuffer(expand_payload(u.payload, u.width * u.height), dtype=np.uint8)
        x0, y0 = xs[u.tile_col], ys[u.tile_row]
        canvas[y0:y0 + u.height, x0:x0 + u.width] = tile.reshape(u.height, u.width)
    out = crop_pixels(canvas, crop_window)
    first = units[0]
    return DecodedPicture(
        source_stream_id=first.stream_id, poc=first.poc, pts=min(u.pts for u in units),
        width=out.shape[1], height=out.shape[0], pixels=out.tobytes(),
    )


def decode_stream(stream: ToyStream, crop_window=None) -> list[DecodedPicture]:
    """Decode every picture of ``stream`` in decode order."""
    layout = tile_layout(stream)
    return [decode_picture(units, layout, crop_window) for _, units in stream.picture_units()]


# engine

class InstanceState(enum.Enum):
    CONFIGURED = "CONFIGURED"
    RUNNING = "RUNNING"
    STOPPED = "STOPPED"


def _as_fraction(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


@dataclass(frozen=True)
class CapabilityEnvelope:
    """Static limits of a decoding platform, shared by all its profiles."""

    max_instances: int
    max_samples_per_second: int
    max_width: int
    max_height: int
    profiles: frozenset = frozenset(CodecProfile)

    @classmethod
    def uhd(cls, max_instances=2):
        """3840x2160 at 60 pictures per second."""
        return cls(max_instances, 3840 * 2160 * 60, 3840, 2160)

    @classmethod
    def from_dict(cls, d: dict) -> "CapabilityEnvelope":
        profiles = d.get("profiles")
        profiles = frozenset(CodecProfile[p] for p in profiles) if profiles else frozenset(CodecProfile)
        return cls(int(d["max_instances"]), int(d["max_samples_per_second"]),
                   int(d["max_width"]), int(d["max_height"]), profiles)


@dataclass(frozen=True)
class CapabilityReport:
    codec_profile: CodecProfile
    max_instances: int
    max_aggregate_samples_per_tick: Fraction
    max_width: int
    max_height: int
    available_instances: int
    available_samples_per_tick: Fraction


@dataclass(frozen=True)
class DecodeRequirements:
    width: int
    height: int
    frame_rate: Fraction
    codec_profile: CodecProfile = CodecProfile.TOY_BASE

    def samples_per_second(self) -> Fraction:
        return self.width * self.height * _as_fraction(self.frame_rate)


@dataclass
class DecoderInstance:
    instance_id: int
    requirements: DecodeRequirements
    admitted_rate: Fraction
    decode_rate: int = 1
    output_buffer: CircularBuffer | None = None
    pixel_format_tag: str | None = None
    params: dict = field(default_factory=lambda: {"crop_window": None})
    state: InstanceState = InstanceState.CONFIGURED
    progress_poc: int = -1
    group_id: int | None = None
    stream: ToyStream | None = None
    pictures_decoded: int = 0
    stall_steps: int = 0
    _pending: list = field(default_factory=list, repr=False)
    _layout: tuple | None = field(default=None, repr=False)

    @property
    def exhausted(self) -> bool:
        return self.stream is not None and not self._pending

    def next_poc(self) -> int | None:
        return self._pending[0][0] if self._pending else None


@dataclass
class InstanceGroup:
    group_id: int
    skew_tolerance_pocs: int = 0
    member_ids: set = field(default_factory=set)


@dataclass(frozen=True)
class DecodeEvent:
    instance_id: int
    poc: int
    time: int
    group_id: int | None = None

    def log_line(self) -> str:
        g = "-" if self.group_id is None else self.group_id
        return f"DECODE instance={self.instance_id} poc={self.poc} t={self.time} group={g}"


class VideoDecodingEngine:
    """Capability accounting, instance lifecycle and lock-step decoding.

    Parameters
    ----------
    envelope : CapabilityEnvelope
        Static platform limits.
    tick_rate : int
        Ticks per second; sample budgets are reported per tick.
    """

    def __init__(self, envelope: CapabilityEnvelope, tick_rate: int = 90_000):
        self.envelope = envelope
        self.tick_rate = tick_rate
        self.clock = 0
        self.instances: dict[int, DecoderInstance] = {}
        self.groups: dict[int, InstanceGroup] = {}
        self._instance_ids = itertools.count()
        self._group_ids = itertools.count()

    # capabilities

    @property
    def max_samples_per_tick(self) -> Fraction:
        return Fraction(self.envelope.max_samples_per_second, self.tick_rate)

    def admitted_samples_per_tick(self) -> Fraction:
        return sum((i.admitted_rate for i in self.instances.values()), Fraction(0))

    def query_current_aggregate_capabilities(self, codec_profile) -> CapabilityReport:
        profile = self._profile(codec_profile)
        env = self.envelope
        return CapabilityReport(
            codec_profile=profile,
            max_instances=env.max_instances,
            max_aggregate_samples_per_tick=self.max_samples_per_tick,
            max_width=env.max_width,
            max_height=env.max_height,
            available_instances=env.max_instances - len(self.instances),
            available_samples_per_tick=self.max_samples_per_tick - self.admitted_samples_per_tick(),
        )

    def _profile(self, codec_profile) -> CodecProfile:
        try:
            profile = CodecProfile[codec_profile] if isinstance(codec_profile, str) else CodecProfile(codec_profile)
        except (KeyError, ValueError):
            raise UnknownCodecProfile(f"unknown codec profile {codec_profile!r}") from None
        if profile not in self.envelope.profiles:
            raise UnknownCodecProfile(f"{profile.name} is not supported by this engine")
        return profile

    # lifecycle

    def get_instance(self, requirements: DecodeRequirements, group_id: int | None = None,
                     decode_rate: int = 1) -> DecoderInstance:
        profile = self._profile(requirements.codec_profile)
        if group_id is not None and group_id not in self.groups:
            raise UnknownGroup(f"no group {group_id}")
        env = self.envelope
        if requirements.width > env.max_width or requirements.height > env.max_height:
            raise OversizedPicture(
                f"{requirements.width}x{requirements.height} exceeds {env.max_width}x{env.max_height}"
            )
        if decode_rate < 1:
            raise ValueError("decode_rate must be >= 1 picture per step")
        rate = Fraction(requirements.samples_per_second()) / self.tick_rate
        report = self.query_current_aggregate_capabilities(profile)
        if report.available_instances <= 0:
            raise InsufficientCapacity(f"all {env.max_instances} instance slots are in use")
        if rate > report.available_samples_per_tick:
            raise InsufficientCapacity(
                f"needs {rate} samples/tick, {report.available_samples_per_tick} available"
            )
        inst = DecoderInstance(next(self._instance_ids), requirements, rate, decode_rate)
        self.instances[inst.instance_id] = inst
        if group_id is not None:
            inst.group_id = group_id
            self.groups[group_id].member_ids.add(inst.instance_id)
        log.debug("admitted instance %d at %s samples/tick", inst.instance_id, rate)
        return inst

    def release_instance(self, instance) -> None:
        """Tear an instance down and return its capacity to the pool."""
        inst = self._instance(instance)
        if inst.group_id is not None:
            self.groups[inst.group_id].member_ids.discard(inst.instance_id)
        del self.instances[inst.instance_id]
        inst.state = InstanceState.STOPPED

    def _instance(self, instance) -> DecoderInstance:
        iid = instance.instance_id if isinstance(instance, DecoderInstance) else instance
        try:
            return self.instances[iid]
        except KeyError:
            raise UnknownInstance(f"no instance {iid}") from None

    def set_config(self, instance, capacity_frames: int, pixel_format_tag: str = "gray8",
                   buffer: CircularBuffer | None = None) -> DecoderInstance:
        """Bind the instance's output to a circular buffer.

        A fresh buffer is created unless ``buffer`` is passed, in which case
        its capacity must match ``capacity_frames``.
        """
        inst = self._instance(instance)
        if inst.state is InstanceState.RUNNING:
            raise InvalidState("cannot reconfigure a running instance")
        if capacity_frames < 1:
            raise ZeroCapacity(f"capacity must be >= 1, got {capacity_frames}")
        if buffer is None:
            buffer = CircularBuffer(capacity_frames, pixel_format_tag)
        elif buffer.capacity_frames != capacity_frames:
            raise ValueError("buffer capacity does not match capacity_frames")
        inst.output_buffer = buffer
        inst.pixel_format_tag = pixel_format_tag
        return inst

    def get_parameter(self, instance, key: str):
        inst = self._instance(instance)
        if key not in PARAMETERS:
            raise UnknownParameter(key)
        return inst.params.get(key)

    def set_parameter(self, instance, key: str, value) -> DecoderInstance:
        inst = self._instance(instance)
        if key not in PARAMETERS:
            raise UnknownParameter(key)
        if value is not None:
            x, y, w, h = (int(v) for v in value)
            req = inst.requirements
            if x < 0 or y < 0 or w <= 0 or h <= 0 or x + w > req.width or y + h > req.height:
                raise CropOutOfBounds(f"crop {(x, y, w, h)} outside {req.width}x{req.height}")
            value = (x, y, w, h)
        inst.params[key] = value
        return inst

    def create_group(self, skew_tolerance_pocs: int = 0) -> InstanceGroup:
        if skew_tolerance_pocs < 0:
            raise ValueError("skew tolerance must be non-negative")
        group = InstanceGroup(next(self._group_ids), skew_tolerance_pocs)
        self.groups[group.group_id] = group
        return group

    def submit_stream(self, instance, stream: ToyStream) -> bool:
        inst = self._instance(instance)
        if inst.output_buffer is None:
            raise NoOutputBuffer(f"instance {inst.instance_id} has no output buffer; call set_config first")
        if stream.codec_profile != inst.requirements.codec_profile:
            raise ProfileMismatch(
                f"{stream.codec_profile.name} stream for {inst.requirements.codec_profile.name} instance"
            )
        if inst.state is InstanceState.RUNNING:
            raise InvalidState("instance already has a stream queued")
        inst.stream = stream
        inst._layout = tile_layout(stream)
        inst._pending = stream.picture_units()
        inst.state = InstanceState.RUNNING if inst._pending else InstanceState.STOPPED
        return True

    # decoding

    def _effective_progress(self, inst: DecoderInstance) -> int:
        first = inst.next_poc()
        if inst.pictures_decoded or first is None:
            return inst.progress_poc
        return first - 1

    def _gate(self, proposed: dict[int, int]) -> set[int]:
        """Drop proposals that would break a group's skew bound; return them."""
        dropped = set()
        changed = True
        while changed:
            changed = False
            for group in self.groups.values():
                members = [self.instances[m] for m in sorted(group.member_ids)
                           if self.instances[m].stream is not None]
                if not members:
                    continue
                levels = {m.instance_id: proposed.get(m.instance_id, self._effective_progress(m))
                          for m in members}
                low = min(levels.values())
                for iid, level in levels.items():
                    if iid in proposed and level - low > group.skew_tolerance_pocs:
                        del proposed[iid]
                        dropped.add(iid)
                        changed = True
        return dropped

    def step(self, ticks: int) -> list[DecodeEvent]:
        """Advance the engine clock by ``ticks``, decoding on every running instance.

        Each instance decodes up to ``decode_rate`` pictures, one per round;
        in each round group members only advance as far as their group's
        skew tolerance allows.
        """
        running = sorted((i for i in self.instances.values() if i.state is InstanceState.RUNNING),
                         key=lambda i: i.instance_id)
        events: list[DecodeEvent] = []
        rounds = max((i.decode_rate for i in running), default=0)
        done = Counter()
        stalled = set()
        for r in range(1, rounds + 1):
            proposed = {}
            for inst in running:
                if done[inst.instance_id] < inst.decode_rate and inst._pending:
                    proposed[inst.instance_id] = max(self._effective_progress(inst), inst.next_poc())
            stalled |= self._gate(proposed)
            t = self.clock + (r * ticks) // rounds
            for inst in running:
                if inst.instance_id in proposed:
                    events.append(self._decode_next(inst, t))
                    done[inst.instance_id] += 1
        for inst in running:
            if inst.instance_id in stalled:
                inst.stall_steps += 1
            if not inst._pending:
                inst.state = InstanceState.STOPPED
        self.clock += ticks
        return events

    def _decode_next(self, inst: DecoderInstance, t: int) -> DecodeEvent:
        poc, units = inst._pending.pop(0)
        picture = decode_picture(units, inst._layout, inst.params.get("crop_window"))
        inst.output_buffer.write_frame(picture.pixels, picture.pts)
        inst.progress_poc = max(inst.progress_poc, poc)
        inst.pictures_decoded += 1
        return DecodeEvent(inst.instance_id, poc, t, inst.group_id)

    def group_skew(self, group_id: int) -> int:
        """Current progress spread of a group; exhausted members only count on the low side."""
        members = [self.instances[m] for m in self.groups[group_id].member_ids
                   if self.instances[m].stream is not None]
        high = [self._effective_progress(m) for m in members if not m.exhausted]
        if not high:
            return 0
        return max(0, max(high) - min(self._effective_progress(m) for m in members))
