"""Discrete-event model of the program-stream System Target Decoder.

Bytes of each elementary stream arrive according to an
:class:`ArrivalSchedule` and accumulate in that stream's input buffer.
Access unit ``j`` is decoded instantaneously at ``td_n(j)``, removing all of
its bytes at once, and yields exactly one presentation unit shown at the
unit's presentation timestamp.

An access unit occupies ``len(payload)`` bytes of the buffer; the container
framing is not carried through the model.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .toy_stream import ToyStream

__all__ = [
    "ArrivalSchedule",
    "StdConfig",
    "Verdict",
    "DecodeRecord",
    "PresentRecord",
    "StreamTrace",
    "StdTrace",
    "RuleViolation",
    "constant_rate_schedule",
    "simulate_std",
    "check_cdm_rules",
    "trace_lines",
    "trace_report",
]


@dataclass(frozen=True)
class ArrivalSchedule:
    """``entries`` holds ``(byte_index, arrival_time)`` pairs."""

    stream_id: int
    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        entries = tuple((int(i), int(t)) for i, t in self.entries)
        object.__setattr__(self, "entries", entries)
        for (i0, t0), (i1, t1) in zip(entries, entries[1:]):
            if i1 <= i0:
                raise ValueError(f"byte indices must increase: {i0} then {i1}")
            if t1 < t0:
                raise ValueError(f"arrival times must not decrease: {t0} then {t1}")

    def arrival_time(self, byte_index: int) -> int:
        """Arrival of a byte; sparse schedules give each byte the time of the
        next listed entry at or after it."""
        lo, hi = 0, len(self.entries)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.entries[mid][0] < byte_index:
                lo = mid + 1
            else:
                hi = mid
        if lo == len(self.entries):
            raise ValueError(f"schedule for stream {self.stream_id} does not cover byte {byte_index}")
        return self.entries[lo][1]


def constant_rate_schedule(stream: ToyStream, rate_bytes_per_tick, start: int = 0) -> ArrivalSchedule:
    """Byte ``i`` arrives at ``start + floor(i / rate)``."""
    rate = Fraction(str(rate_bytes_per_tick)) if isinstance(rate_bytes_per_tick, float) else Fraction(rate_bytes_per_tick)
    if rate <= 0:
        raise ValueError("rate must be positive")
    total = sum(len(u.payload) for u in stream.units)
    return ArrivalSchedule(
        stream.stream_id,
        tuple((i, start + i * rate.denominator // rate.numerator) for i in range(total)),
    )


@dataclass(frozen=True)
class StdConfig:
    """Buffer sizes and decode timing.

    ``buffer_size_bytes`` is either one size for every stream or a mapping
    from stream id to size.  ``explicit_td`` likewise maps stream id to a list
    of decode times, one per access unit; a plain list is accepted when there
    is a single stream.
    """

    buffer_size_bytes: int | Mapping[int, int]
    decode_delay: int = 0
    explicit_td: Sequence[int] | Mapping[int, Sequence[int]] | None = None

    def buffer_size(self, stream_id: int) -> int:
        b = self.buffer_size_bytes
        size = b[stream_id] if isinstance(b, Mapping) else b
        if size <= 0:
            raise ValueError("buffer_size_bytes must be positive")
        return size

    def td_list(self, stream_id: int, n_streams: int):
        td = self.explicit_td
        if td is None:
            return None
        if isinstance(td, Mapping):
            return td.get(stream_id)
        if n_streams != 1:
            raise ValueError("explicit_td must map stream ids when several streams are simulated")
        return td


class Verdict(str, enum.Enum):
    CONFORMANT = "CONFORMANT"
    OVERFLOW = "OVERFLOW"
    UNDERFLOW = "UNDERFLOW"


@dataclass
class DecodeRecord:
    j: int
    td: int
    decoder: int


@dataclass
class PresentRecord:
    k: int
    tp: int
    j: int


@dataclass
class StreamTrace:
    stream_id: int
    buffer_size: int
    arrivals: list[tuple[int, int]] = field(default_factory=list)
    decodes: list[DecodeRecord] = field(default_factory=list)
    presentations: list[PresentRecord] = field(default_factory=list)
    occupancy: list[tuple[int, int]] = field(default_factory=list)
    bytes_in: int = 0
    bytes_out: int = 0

    @property
    def final_occupancy(self) -> int:
        return self.occupancy[-1][1] if self.occupancy else 0

    @property
    def peak_occupancy(self) -> int:
        return max((b for _, b in self.occupancy), default=0)


@dataclass
class StdTrace:
    streams: dict[int, StreamTrace]
    verdict: Verdict = Verdict.CONFORMANT
    failure: dict | None = None

    @property
    def occupancy_samples(self) -> list[tuple[int, int, int]]:
        """``(time, stream_id, bytes)`` across all streams, time ordered."""
        return sorted((t, n, b) for n, s in self.streams.items() for t, b in s.occupancy)


# arrival events sort before decodes at the same tick, presentations last
_ARRIVAL, _DECODE, _PRESENT = 0, 1, 2


def simulate_std(streams: Sequence[ToyStream], schedules: Sequence[ArrivalSchedule],
                 config: StdConfig) -> StdTrace:
    if len(streams) != len(schedules):
        raise ValueError("need exactly one schedule per stream")
    by_id = {s.stream_id: s for s in schedules}
    if len(by_id) != len(schedules):
        raise ValueError("duplicate schedule for a stream")

    events = []
    traces = {}
    for stream in streams:
        n = stream.stream_id
        schedule = by_id.get(n)
        if schedule is None:
            raise ValueError(f"no schedule for stream {n}")
        trace = traces[n] = StreamTrace(n, config.buffer_size(n))
        explicit = config.td_list(n, len(streams))
        if explicit is not None and len(explicit) != len(stream.units):
            raise ValueError(f"stream {n}: {len(explicit)} explicit decode times for {len(stream.units)} units")

        # group byte arrivals by tick
        sizes = [len(u.payload) for u in stream.units]
        total = sum(sizes)
        per_tick: dict[int, int] = {}
        for i in range(total):
            t = schedule.arrival_time(i)
            per_tick[t] = per_tick.get(t, 0) + 1
        for t in sorted(per_tick):
            events.append((t, _ARRIVAL, n, 0, per_tick[t]))
            trace.arrivals.append((t, per_tick[t]))

        offset = 0
        last_time = schedule.entries[0][1] if schedule.entries else 0
        for j, (unit, size) in enumerate(zip(stream.units, sizes)):
            if size:
                last_time = schedule.arrival_time(offset + size - 1)
            offset += size
            td = explicit[j] if explicit is not None else last_time + config.decode_delay
            events.append((td, _DECODE, n, j, (size, last_time)))
        order = sorted(range(len(stream.units)), key=lambda j: (stream.units[j].pts, j))
        for k, j in enumerate(order):
            events.append((stream.units[j].pts, _PRESENT, n, k, j))

    events.sort(key=lambda e: e[:4])
    occupancy = {n: 0 for n in traces}
    verdict, failure = Verdict.CONFORMANT, None
    for t, kind, n, idx, data in events:
        trace = traces[n]
        if kind == _ARRIVAL:
            occupancy[n] += data
            trace.bytes_in += data
            trace.occupancy.append((t, occupancy[n]))
            if occupancy[n] > trace.buffer_size and failure is None:
                verdict = Verdict.OVERFLOW
                failure = {"stream": n, "time": t, "occupancy": occupancy[n], "buffer_size": trace.buffer_size}
        elif kind == _DECODE:
            size, complete = data
            if t < complete and failure is None:
                verdict = Verdict.UNDERFLOW
                failure = {"stream": n, "time": t, "j": idx, "last_byte_arrival": complete}
            occupancy[n] -= size
            trace.bytes_out += size
            trace.decodes.append(DecodeRecord(idx, t, decoder=n))
            trace.occupancy.append((t, occupancy[n]))
        else:
            trace.presentations.append(PresentRecord(idx, t, data))
    return StdTrace(traces, verdict, failure)


@dataclass(frozen=True)
class RuleViolation:
    rule: str
    stream_id: int
    detail: str


def check_cdm_rules(trace: StdTrace, streams: Sequence[ToyStream]) -> list[RuleViolation]:
    """Check the one-decoder-per-stream, one-presentation-per-unit and
    presentation-timestamp rules against a trace."""
    out = []
    owners: dict[int, int] = {}
    for stream in streams:
        n = stream.stream_id
        st = trace.streams.get(n)
        if st is None:
            out.append(RuleViolation("ii", n, "stream missing from trace"))
            continue
        decoders = {d.decoder for d in st.decodes}
        if len(decoders) > 1:
            out.append(RuleViolation("i", n, f"decoded by several decoders {sorted(decoders)}"))
        for d in decoders:
            if owners.setdefault(d, n) != n:
                out.append(RuleViolation("i", n, f"decoder {d} also decodes stream {owners[d]}"))
        if len(st.decodes) != len(st.presentations):
            out.append(RuleViolation(
                "ii", n, f"{len(st.decodes)} decoded units but {len(st.presentations)} presentation units"))
        decoded = {d.j for d in st.decodes}
        sources = [p.j for p in st.presentations]
        if len(set(sources)) != len(sources) or set(sources) - decoded:
            out.append(RuleViolation("ii", n, "presentation units do not map one-to-one onto decoded units"))
        for p in st.presentations:
            if not 0 <= p.j < len(stream.units):
                out.append(RuleViolation("iii", n, f"presentation {p.k} refers to unknown unit {p.j}"))
            elif p.tp != stream.units[p.j].pts:
                out.append(RuleViolation(
                    "iii", n, f"presentation {p.k} at {p.tp} but unit {p.j} has pts {stream.units[p.j].pts}"))
    return out


def trace_lines(trace: StdTrace) -> list[str]:
    """Line-delimited event export, time ordered, ending with the verdict."""
    rows = []
    for n, st in trace.streams.items():
        rows += [((t, _ARRIVAL, n, b), f"EVENT kind=arrival stream={n} time={t} bytes={b}")
                 for t, b in st.arrivals]
        rows += [((d.td, _DECODE, n, d.j), f"EVENT kind=decode stream={n} time={d.td} j={d.j}")
                 for d in st.decodes]
        rows += [((p.tp, _PRESENT, n, p.k), f"EVENT kind=present stream={n} time={p.tp} k={p.k}")
                 for p in st.presentations]
    rows.sort(key=lambda r: r[0])
    return [line for _, line in rows] + [f"VERDICT {trace.verdict.value}"]


def trace_report(trace: StdTrace) -> dict:
    streams = {}
    for n, st in sorted(trace.streams.items()):
        streams[str(n)] = {
            "buffer_size": st.buffer_size,
            "bytes_in": st.bytes_in,
            "bytes_out": st.bytes_out,
            "final_occupancy": st.final_occupancy,
            "peak_occupancy": st.peak_occupancy,
            "decodes": [[d.j, d.td] for d in st.decodes],
            "presentations": [[p.k, p.tp] for p in st.presentations],
            "occupancy": [list(o) for o in st.occupancy],
        }
    return {
        "kind": "std_trace",
        "verdict": trace.verdict.value,
        "failure": trace.failure,
        "streams": streams,
    }
