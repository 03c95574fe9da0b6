"""Bounded frame store with independent read and write pointers.

The writer never waits: writing into a full buffer evicts the oldest unread
frame and moves the read pointer past it.  Frames may differ in length; each
slot simply holds whatever the last write put there.

One producer and one consumer may use a buffer from different threads.  All
pointer updates happen under a short internal lock, and a slot only ever
holds a fully built immutable :class:`Frame`, so a reader cannot observe a
half-written frame.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .errors import Empty, NoFrameAtOrBefore, NotStored, ZeroCapacity

__all__ = ["Frame", "CircularBuffer", "BufferStats"]


@dataclass(frozen=True)
class Frame:
    index: int
    timestamp: int
    data: bytes

    @property
    def length(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class BufferStats:
    capacity: int
    stored: int
    writes: int
    reads: int
    evictions: int


class CircularBuffer:
    """Ring of ``capacity_frames`` slots.

    >>> buf = CircularBuffer(2)
    >>> [buf.write_frame(b"x" * n, t) for n, t in [(1, 0), (5, 10), (3, 20)]]
    [0, 1, 2]
    >>> buf.read_frame().index
    1
    >>> buf.read_frame_at(timestamp=25).index
    2
    """

    def __init__(self, capacity_frames: int, pixel_format_tag: str | None = None):
        if capacity_frames < 1:
            raise ZeroCapacity(f"capacity must be >= 1, got {capacity_frames}")
        self.capacity_frames = capacity_frames
        self.pixel_format_tag = pixel_format_tag
        self.slots: list[Frame | None] = [None] * capacity_frames
        self.read_ptr = 0
        self.write_ptr = 0
        self.stored = 0
        self._next_index = 0
        self._lock = threading.Lock()
        self.writes = 0
        self.reads = 0
        self.evictions = 0

    def __len__(self):
        return self.stored

    def __repr__(self):
        return (f"CircularBuffer(capacity={self.capacity_frames}, stored={self.stored}, "
                f"read_ptr={self.read_ptr}, write_ptr={self.write_ptr})")

    def write_frame(self, data: bytes, timestamp: int) -> int:
        data = bytes(data)
        with self._lock:
            frame = Frame(self._next_index, timestamp, data)
            self._next_index += 1
            # oldest unread frame sits at read_ptr == write_ptr when full
            self.slots[self.write_ptr] = frame
            if self.stored == self.capacity_frames:
                self.read_ptr = (self.read_ptr + 1) % self.capacity_frames
                self.evictions += 1
            else:
                self.stored += 1
            self.write_ptr = (self.write_ptr + 1) % self.capacity_frames
            self.writes += 1
            return frame.index

    def read_frame(self) -> Frame:
        with self._lock:
            if self.stored == 0:
                raise Empty("no stored frame")
            frame = self.slots[self.read_ptr]
            self.read_ptr = (self.read_ptr + 1) % self.capacity_frames
            self.stored -= 1
            self.reads += 1
            return frame

    def frames(self) -> list[Frame]:
        """Readable frames, oldest first (a snapshot)."""
        with self._lock:
            return self._frames_locked()

    def _frames_locked(self):
        n = self.capacity_frames
        return [self.slots[(self.read_ptr + i) % n] for i in range(self.stored)]

    def read_frame_at(self, *, index: int | None = None, timestamp: int | None = None) -> Frame:
        """Non-consuming random access by frame index or by timestamp.

        A timestamp selects the stored frame with the greatest timestamp not
        after the request.
        """
        if (index is None) == (timestamp is None):
            raise TypeError("pass exactly one of index= or timestamp=")
        with self._lock:
            frames = self._frames_locked()
        if index is not None:
            for f in frames:
                if f.index == index:
                    return f
            raise NotStored(f"frame {index} is not stored")
        best = None
        for f in frames:
            if f.timestamp <= timestamp and (best is None or f.timestamp >= best.timestamp):
                best = f
        if best is None:
            raise NoFrameAtOrBefore(f"no stored frame at or before t={timestamp}")
        return best

    def stats(self) -> BufferStats:
        with self._lock:
            return BufferStats(
                capacity=self.capacity_frames, stored=self.stored, writes=self.writes,
                reads=self.reads, evictions=self.evictions,
            )
