"""Media access function: scene in, synchronized component pictures out.

The pipeline turns the scene's timed media requests into decoder instances,
feeds each instance's pictures into the circular buffer the scene declares
for that media, and plays the part of a presentation engine that samples
every buffer at each render instant.  The observable result is the tuple of
POCs consumed together for each scene object, which is what a point-cloud
reconstruction would see.

Stepping model
--------------
One engine step advances the clock by ``presentation_ticks_per_step``.
After step ``s`` the renderer samples all buffers at
``T_s = start + (s + 1) * presentation_ticks_per_step - 1`` with a
non-consuming timestamp lookup.  By default a step spans as many frame
intervals as the fastest decoder produces pictures, so the renderer keeps
pace with the fastest component and slower ones fall behind.

Formatting plans
----------------
A scenario may merge or split sources before admission (``filter``,
``append``, ``stack``).  Each merged decoder then writes into a private
staging buffer and the output stage undoes the merge, writing each source's
share of a picture into that source's scene buffer at its original
timestamp.
"""

from __future__ import annotations

import copy
import json
import logging
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .circular_buffer import CircularBuffer
from .errors import (
    AdmissionFailed,
    InsufficientCapacity,
    MissingMedia,
    NoFrameAtOrBefore,
    OversizedPicture,
    ScenarioError,
    TransactionFailed,
    UnknownCodecProfile,
)
from .input_formatting import (
    StackLayout,
    TilePredicate,
    append_streams,
    filter_tiles,
    nominal_frame_interval,
    picture_size,
    stack_streams,
)
from .report import dumps_structured
from .scene import MediaRequest, SceneGraph, _schema, collect_media_requests, parse_scene, request_objects
from .scene_updates import PatchTransaction, UpdateReport, UpdateTimeline, apply_transaction
from .toy_stream import ToyStream, make_test_stream, parse_stream
from .vdi_engine import CapabilityEnvelope, DecodeRequirements, DecoderInstance, VideoDecodingEngine

__all__ = [
    "Scenario",
    "Pipeline",
    "SyncReport",
    "load_scenario",
    "build_pipeline",
    "run",
    "run_with_updates",
    "emit_report",
    "load_updates",
]

log = logging.getLogger(__name__)

GROUPING = ("NONE", "PER_OBJECT")


# scenario

@dataclass
class Scenario:
    scene: dict
    streams: dict[str, ToyStream]
    envelope: CapabilityEnvelope
    steps: int
    tick_rate: int = 90_000
    decode_rates: dict[str, int] = field(default_factory=dict)
    default_decode_rate: int = 1
    grouping: str = "NONE"
    skew_tolerance_pocs: int = 0
    presentation_ticks_per_step: int | None = None
    formatting: list[dict] = field(default_factory=list)
    alternative: int = 0
    base_dir: Path = Path(".")

    def __post_init__(self):
        if self.grouping not in GROUPING:
            raise ScenarioError(f"grouping must be one of {GROUPING}")
        if self.steps < 0:
            raise ScenarioError("steps must be non-negative")
        if self.skew_tolerance_pocs < 0:
            raise ScenarioError("skew tolerance must be non-negative")
        for name, rate in {**self.decode_rates, "default": self.default_decode_rate}.items():
            if rate < 1:
                raise ScenarioError(f"decode rate for {name} must be positive")

    def rate(self, name: str) -> int:
        return self.decode_rates.get(name, self.default_decode_rate)

    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> "Scenario":
        errors = sorted(_schema("scenario").iter_errors(data), key=lambda e: list(map(str, e.path)))
        if errors:
            where = "/".join(map(str, errors[0].absolute_path))
            raise ScenarioError(f"scenario invalid at /{where}: {errors[0].message}")
        base = Path(base_dir)
        scene_path = base / data["scene"]
        try:
            scene = json.loads(scene_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scene {scene_path}: {exc}") from None
        streams = {}
        for i, name in enumerate(sorted(data["streams"])):
            src = data["streams"][name]
            if isinstance(src, str):
                try:
                    streams[name] = parse_stream((base / src).read_bytes())
                except OSError as exc:
                    raise ScenarioError(f"cannot read stream {name}: {exc}") from None
            else:
                gen = {"stream_id": i, **src["generate"]}
                streams[name] = make_test_stream(gen)
        eng = data["engine"]
        return cls(
            scene=scene,
            streams=streams,
            envelope=CapabilityEnvelope.from_dict(eng),
            steps=data["steps"],
            tick_rate=eng.get("tick_rate", 90_000),
            decode_rates=dict(data.get("decode_rates", {})),
            default_decode_rate=data.get("default_decode_rate", 1),
            grouping=data.get("grouping", "NONE"),
            skew_tolerance_pocs=data.get("skew_tolerance_pocs", 0),
            presentation_ticks_per_step=data.get("presentation_ticks_per_step"),
            formatting=list(data.get("formatting", [])),
            alternative=data.get("alternative", 0),
            base_dir=base,
        )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON: {exc}") from None
    return Scenario.from_dict(data, path.parent)


def load_updates(path_or_data) -> list[PatchTransaction]:
    """Read a list of ``{activation_time, patch}`` envelopes (or a single one)."""
    data = path_or_data
    if isinstance(data, (str, Path)):
        data = json.loads(Path(data).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = [data]
    return [PatchTransaction.from_json(item) for item in data]


# routing from decoder output back to scene media

Transform = Callable[[int, int, np.ndarray], "tuple[int, int, np.ndarray] | None"]


def _identity(poc, pts, pixels):
    return poc, pts, pixels


@dataclass(frozen=True)
class Route:
    """Delivers (a share of) a decoded picture to one media's buffers."""

    media: str
    transform: Transform = _identity

    @property
    def direct(self) -> bool:
        return self.transform is _identity


def _chain(outer: Transform, inner: Transform) -> Transform:
    def chained(poc, pts, pixels):
        out = outer(poc, pts, pixels)
        return None if out is None else inner(*out)
    return chained


def _stack_crop(x, y, w, h) -> Transform:
    def crop(poc, pts, pixels):
        return poc, pts, pixels[y:y + h, x:x + w]
    return crop


def _segment(lo, hi, poc_shift, t_shift) -> Transform:
    def seg(poc, pts, pixels):
        if not lo <= poc <= hi:
            return None
        return poc - poc_shift, pts - t_shift, pixels
    return seg


def _apply_plan(sources: dict[str, ToyStream], plan: Sequence[dict]):
    """Run a formatting plan; return ``{decoder input: (stream, routes)}``."""
    env = {name: (s, [Route(name)]) for name, s in sources.items()}

    def take(name):
        if name not in env:
            raise ScenarioError(f"formatting input {name!r} is not available")
        return env.pop(name)

    for step in plan:
        op, out = step["op"], step["output"]
        if out in env:
            raise ScenarioError(f"formatting output {out!r} already exists")
        if op == "filter":
            stream, routes = take(step["input"])
            pred = TilePredicate(frozenset(map(tuple, step["keep"])),
                                 tuple(step["poc_range"]) if "poc_range" in step else None)
            env[out] = (filter_tiles(stream, pred), routes)
        elif op == "stack":
            inputs = [take(n) for n in step["inputs"]]
            layout = StackLayout(step["cols"], step["rows"], tuple(s.stream_id for s, _ in inputs))
            merged = stack_streams([s for s, _ in inputs], layout)
            widths, heights = [0] * layout.cols, [0] * layout.rows
            for slot, (s, _) in enumerate(inputs):
                c, r = layout.position(slot)
                w, h = picture_size(s)
                widths[c], heights[r] = w, h
            routes = []
            for slot, (s, inner) in enumerate(inputs):
                c, r = layout.position(slot)
                crop = _stack_crop(sum(widths[:c]), sum(heights[:r]), widths[c], heights[r])
                routes += [Route(rt.media, _chain(crop, rt.transform)) for rt in inner]
            env[out] = (merged, routes)
        elif op == "append":
            inputs = [take(n) for n in step["inputs"]]
            merged = append_streams([s for s, _ in inputs])
            routes = []
            # recover each input's shift by matching its pictures in order
            merged_pics = [(poc, units[0].pts) for poc, units in merged.picture_units()]
            cursor = 0
            for s, inner in inputs:
                pics = [(poc, units[0].pts) for poc, units in s.picture_units()]
                if not pics:
                    continue
                seg = merged_pics[cursor:cursor + len(pics)]
                cursor += len(pics)
                poc_shift = seg[0][0] - pics[0][0]
                t_shift = seg[0][1] - pics[0][1]
                transform = _segment(seg[0][0], seg[-1][0], poc_shift, t_shift)
                routes += [Route(rt.media, _chain(transform, rt.transform)) for rt in inner]
            env[out] = (merged, routes)
        else:
            raise ScenarioError(f"unknown formatting op {op!r}")
    return env


# pipeline

@dataclass
class Binding:
    """One decoder instance and where its pictures go."""

    name: str
    stream: ToyStream
    instance: DecoderInstance
    routes: list[Route]
    staging: CircularBuffer | None
    object_id: str | None


@dataclass
class MediaSlot:
    request: MediaRequest
    key: str
    object_id: str
    buffer: CircularBuffer
    poc_of: dict[int, int] = field(default_factory=dict)
    occupancy: list[int] = field(default_factory=list)


class Pipeline:
    """Live pipeline state; see :func:`build_pipeline`."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.engine = VideoDecodingEngine(scenario.envelope, scenario.tick_rate)
        self.document: dict = copy.deepcopy(scenario.scene)
        self.graph: SceneGraph | None = None
        self.slots: dict[MediaRequest, MediaSlot] = {}
        self.bindings: dict[str, Binding] = {}
        self.object_groups: dict[str, int] = {}
        self.start_time = 0
        self.ptick = 1
        self.history: list[dict] = []
        self.update_log: list[UpdateReport] = []

    # scene to requests

    def media_key(self, graph: SceneGraph, req: MediaRequest) -> str:
        name = graph.media_list[req.media].name or f"media{req.media}"
        return name if req.track == 0 else f"{name}#{req.track}"

    def _requests(self, graph: SceneGraph) -> dict[MediaRequest, tuple[str, str, int]]:
        owners = request_objects(graph)
        out = {}
        for req in collect_media_requests(graph):
            key = self.media_key(graph, req)
            self._resolve_stream(graph, req, key)
            circ = graph.buffers[req.buffer].circular
            out[req] = (key, owners[req], circ.capacity_frames or 1)
        return out

    def _resolve_stream(self, graph: SceneGraph, req: MediaRequest, key: str) -> ToyStream:
        """Scenario stream named ``key``, else the selected alternative's container file."""
        streams = self.scenario.streams
        if key not in streams:
            alts = graph.media_list[req.media].alternatives
            alt = alts[min(self.scenario.alternative, len(alts) - 1)]
            path = self.scenario.base_dir / (alt.uri or "")
            if not alt.uri or not path.is_file():
                raise MissingMedia(f"no stream provided for media {key!r}")
            streams[key] = parse_stream(path.read_bytes())
        return streams[key]

    # admission

    def _admit(self, name: str, stream: ToyStream, routes: list[Route], object_id: str | None,
               request=None) -> Binding:
        w, h = picture_size(stream)
        interval = nominal_frame_interval(stream)
        fps = Fraction(stream.tick_rate, interval) if interval else Fraction(1)
        req = DecodeRequirements(w, h, fps, stream.codec_profile)
        group = None
        if self.scenario.grouping == "PER_OBJECT" and object_id is not None:
            if object_id not in self.object_groups:
                self.object_groups[object_id] = self.engine.create_group(
                    self.scenario.skew_tolerance_pocs).group_id
            group = self.object_groups[object_id]
        try:
            inst = self.engine.get_instance(req, group_id=group, decode_rate=self.scenario.rate(name))
        except (InsufficientCapacity, OversizedPicture, UnknownCodecProfile) as exc:
            raise AdmissionFailed(request or name, exc) from exc
        direct = len(routes) == 1 and routes[0].direct
        if direct:
            slot = self._slots_for(routes[0].media)
            staging = None
            if len(slot) == 1:
                self.engine.set_config(inst, slot[0].buffer.capacity_frames, buffer=slot[0].buffer)
            else:
                direct = False
        if not direct:
            staging = CircularBuffer(max(inst.decode_rate, 1), "gray8")
            self.engine.set_config(inst, staging.capacity_frames, buffer=staging)
        self.engine.submit_stream(inst, stream)
        binding = Binding(name, stream, inst, routes, staging, object_id)
        self.bindings[name] = binding
        return binding

    def _slots_for(self, media: str) -> list[MediaSlot]:
        return [s for s in self.slots.values() if s.key == media]

    def _release(self, name: str) -> None:
        binding = self.bindings.pop(name)
        self.engine.release_instance(binding.instance)

    def build(self) -> "Pipeline":
        graph = parse_scene(self.document)
        wanted = self._requests(graph)
        for req, (key, obj, cap) in wanted.items():
            self.slots[req] = MediaSlot(req, key, obj, CircularBuffer(cap, "gray8"))
        sources = {key: self.scenario.streams[key] for key, _, _ in wanted.values()}
        plan = _apply_plan(sources, self.scenario.formatting)
        for name in sorted(plan):
            stream, routes = plan[name]
            obj = next((s.object_id for r in routes for s in self._slots_for(r.media)), None)
            self._admit(name, stream, routes, obj)
        self.graph = graph

        streams = [b.stream for b in self.bindings.values() if b.stream.units]
        self.start_time = min((s.units[0].pts for s in streams), default=0)
        ptick = self.scenario.presentation_ticks_per_step
        if ptick is None:
            intervals = [nominal_frame_interval(s) for s in streams]
            interval = min((i for i in intervals if i > 0), default=1)
            ptick = max((b.instance.decode_rate for b in self.bindings.values()), default=1) * interval
        self.ptick = ptick
        return self

    # incremental change from an updated scene

    def reconcile(self, document: dict, at_time: int | None = None) -> None:
        """Admit media the new document adds and tear down media it drops.

        Either every new instance is admitted or none is (the caller then
        keeps the old document).  Media added this way decode directly; the
        formatting plan applies only to the initial build.  With ``at_time``
        an added stream joins live, starting at the picture presented then.
        """
        graph = parse_scene(document)
        wanted = self._requests(graph)
        added = [r for r in wanted if r not in self.slots]
        removed = [r for r in self.slots if r not in wanted]
        new_slots = {r: MediaSlot(r, *wanted[r][:2], CircularBuffer(wanted[r][2], "gray8")) for r in added}
        admitted = []
        self.slots.update(new_slots)
        try:
            for req in added:
                key = wanted[req][0]
                if key in self.bindings:
                    continue
                stream = self.scenario.streams[key]
                if at_time is not None:
                    stream = _join_at(stream, at_time)
                admitted.append(self._admit(key, stream, [Route(key)], wanted[req][1], request=req).name)
        except AdmissionFailed:
            for name in admitted:
                self._release(name)
            for req in added:
                self.slots.pop(req, None)
            raise
        for req in removed:
            self.slots.pop(req)
        live = {s.key for s in self.slots.values()}
        for name in sorted(self.bindings):
            if not any(r.media in live for r in self.bindings[name].routes):
                self._release(name)
        self.document = document
        self.graph = graph

    # one step

    def produce(self, step: int) -> None:
        events = self.engine.step(self.ptick)
        by_instance: dict[int, list[int]] = {}
        for ev in events:
            by_instance.setdefault(ev.instance_id, []).append(ev.poc)
        for name in sorted(self.bindings):
            b = self.bindings[name]
            pocs = by_instance.get(b.instance.instance_id, [])
            if b.staging is None:
                slot = self._slots_for(b.routes[0].media)[0]
                first = b.instance.pictures_decoded - len(pocs)
                for k, poc in enumerate(pocs):
                    slot.poc_of[first + k] = poc
                continue
            for poc in pocs:
                frame = b.staging.read_frame()
                w, h = picture_size(b.stream)
                if b.instance.params.get("crop_window"):
                    _, _, w, h = b.instance.params["crop_window"]
                pixels = np.frombuffer(frame.data, dtype=np.uint8).reshape(h, w)
                for route in b.routes:
                    out = route.transform(poc, frame.timestamp, pixels)
                    if out is None:
                        continue
                    src_poc, pts, share = out
                    for slot in self._slots_for(route.media):
                        index = slot.buffer.write_frame(np.ascontiguousarray(share).tobytes(), pts)
                        slot.poc_of[index] = src_poc
        for slot in self.slots.values():
            slot.occupancy.append(len(slot.buffer))

    def present(self, step: int) -> dict:
        t = self.start_time + (step + 1) * self.ptick - 1
        consumed: dict[str, dict[str, int | None]] = {}
        starved = 0
        for req in sorted(self.slots):
            slot = self.slots[req]
            try:
                frame = slot.buffer.read_frame_at(timestamp=t)
                poc = slot.poc_of[frame.index]
            except NoFrameAtOrBefore:
                poc = None
                starved += 1
            consumed.setdefault(slot.object_id, {})[slot.key] = poc
        record = {"step": step, "time": t, "consumed": consumed, "starved": starved}
        self.history.append(record)
        return record


def _join_at(stream: ToyStream, t: int) -> ToyStream:
    """Drop pictures that would already be superseded at presentation time ``t``."""
    shown = [poc for poc, units in stream.picture_units() if units[0].pts <= t]
    if not shown:
        return stream
    first = max(shown)
    return stream.with_units([u for u in stream.units if u.is_parameter_set or u.poc >= first])


def build_pipeline(scenario: Scenario) -> Pipeline:
    """Parse the scene, apply the formatting plan and admit one instance per decoder input.

    Raises :class:`AdmissionFailed` when the engine cannot host an input and
    :class:`MissingMedia` when the scene names media the scenario lacks.
    """
    return Pipeline(scenario).build()


# runs

def _skew(record: dict) -> dict[str, int]:
    out = {}
    for obj, comps in record["consumed"].items():
        pocs = [p for p in comps.values() if p is not None]
        out[obj] = max(pocs) - min(pocs) if pocs else 0
    return out


def _execute(pipeline: Pipeline, steps: int, before_step, threads: int) -> None:
    if threads not in (1, 2):
        raise ValueError("threads must be 1 or 2")
    if threads == 1:
        for s in range(steps):
            before_step(s)
            pipeline.produce(s)
            pipeline.present(s)
        return
    # producer and presenter on separate threads, alternating per step
    produced = threading.Barrier(2)
    presented = threading.Barrier(2)
    failure: list[BaseException] = []

    def producer():
        try:
            for s in range(steps):
                before_step(s)
                pipeline.produce(s)
                produced.wait()
                presented.wait()
        except BaseException as exc:
            failure.append(exc)
            produced.abort()
            presented.abort()

    def presenter():
        try:
            for s in range(steps):
                produced.wait()
                pipeline.present(s)
                presented.wait()
        except threading.BrokenBarrierError:
            pass
        except BaseException as exc:
            failure.append(exc)
            produced.abort()
            presented.abort()

    workers = [threading.Thread(target=producer, name="xrpipe-producer"),
               threading.Thread(target=presenter, name="xrpipe-presenter")]
    for w in workers:
        w.start()
    for w in workers:
        w.join()
    if failure:
        raise failure[0]


@dataclass(frozen=True)
class SyncReport:
    steps: int
    presentation_ticks_per_step: int
    objects: dict
    instances: dict
    buffers: dict
    timeline: list
    updates: list

    @property
    def max_poc_skew(self) -> int:
        return max((o["max_poc_skew"] for o in self.objects.values()), default=0)

    def to_dict(self) -> dict:
        return {
            "kind": "sync_report",
            "steps": self.steps,
            "presentation_ticks_per_step": self.presentation_ticks_per_step,
            "max_poc_skew": self.max_poc_skew,
            "objects": self.objects,
            "instances": self.instances,
            "buffers": self.buffers,
            "timeline": self.timeline,
            "updates": self.updates,
        }


def _report(pipeline: Pipeline, steps: int, retired: dict) -> SyncReport:
    objects: dict[str, dict] = {}
    for record in pipeline.history:
        for obj, skew in _skew(record).items():
            entry = objects.setdefault(obj, {"max_poc_skew": 0, "components": set(), "starved_reads": 0})
            entry["max_poc_skew"] = max(entry["max_poc_skew"], skew)
            entry["components"].update(record["consumed"][obj])
            entry["starved_reads"] += sum(p is None for p in record["consumed"][obj].values())
    for obj, entry in objects.items():
        entry["components"] = sorted(entry["components"])
        entry["group"] = pipeline.object_groups.get(obj)
    instances = dict(retired)
    for name, b in pipeline.bindings.items():
        instances[name] = _instance_entry(b)
    buffers = {}
    for req in sorted(pipeline.slots):
        slot = pipeline.slots[req]
        stats = slot.buffer.stats()
        buffers[str(req.buffer)] = {
            "media": slot.key,
            "capacity": stats.capacity,
            "occupancy_min": min(slot.occupancy, default=0),
            "occupancy_max": max(slot.occupancy, default=0),
            "writes": stats.writes,
            "evictions": stats.evictions,
        }
    return SyncReport(steps, pipeline.ptick, objects, dict(sorted(instances.items())), buffers,
                      list(pipeline.history), [r.to_dict() for r in pipeline.update_log])


def _instance_entry(b: Binding) -> dict:
    inst = b.instance
    return {
        "instance_id": inst.instance_id,
        "group": inst.group_id,
        "decode_rate": inst.decode_rate,
        "pictures_decoded": inst.pictures_decoded,
        "stall_steps": inst.stall_steps,
        "state": inst.state.value,
        "media": sorted({r.media for r in b.routes}),
    }


def run(pipeline: Pipeline, scenario: Scenario | None = None, threads: int = 1) -> SyncReport:
    """Run ``scenario.steps`` steps and measure per-object POC skew at the renderer."""
    scenario = scenario or pipeline.scenario
    _execute(pipeline, scenario.steps, lambda s: None, threads)
    return _report(pipeline, scenario.steps, {})


def run_with_updates(pipeline: Pipeline, scenario: Scenario | None = None,
                     timeline: UpdateTimeline | Iterable[PatchTransaction] = (),
                     threads: int = 1) -> SyncReport:
    """Like :func:`run`, applying scene updates as their activation time arrives.

    Before step ``s`` every pending transaction active at that step's render
    instant is applied.  A transaction whose new media cannot be admitted
    fails as a whole; the pipeline carries on with the previous scene.
    """
    scenario = scenario or pipeline.scenario
    txns = list(timeline.transactions if isinstance(timeline, UpdateTimeline) else timeline)
    order = sorted(range(len(txns)), key=lambda i: (txns[i].activation_time, i))
    pending = list(order)
    retired: dict[str, dict] = {}

    def before_step(s):
        t = pipeline.start_time + (s + 1) * pipeline.ptick - 1
        while pending and txns[pending[0]].activation_time <= t:
            i = pending.pop(0)
            txn = txns[i]
            try:
                new_doc = apply_transaction(pipeline.document, txn)
                live = dict(pipeline.bindings)
                pipeline.reconcile(new_doc, at_time=t)
                for name in live:
                    if name not in pipeline.bindings:
                        retired[name] = _instance_entry(live[name])
            except TransactionFailed as exc:
                pipeline.update_log.append(
                    UpdateReport(i, txn.activation_time, False, exc.reason, exc.op_index, exc.detail))
                continue
            except (AdmissionFailed, MissingMedia) as exc:
                pipeline.update_log.append(UpdateReport(
                    i, txn.activation_time, False, type(exc).__name__, None, str(exc)))
                continue
            pipeline.update_log.append(UpdateReport(i, txn.activation_time, True))
            log.info("update %d applied at step %d", i, s)

    _execute(pipeline, scenario.steps, before_step, threads)
    return _report(pipeline, scenario.steps, retired)


def emit_report(report: SyncReport, fmt: str = "structured") -> str:
    """Serialize a report.  ``structured`` is sorted JSON; ``text`` is one fact per line."""
    if fmt == "structured":
        return dumps_structured(report.to_dict())
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [f"steps={report.steps} presentation_ticks_per_step={report.presentation_ticks_per_step}"]
    for obj in sorted(report.objects):
        o = report.objects[obj]
        group = "-" if o["group"] is None else o["group"]
        lines.append(f"object={obj} group={group} max_poc_skew={o['max_poc_skew']} "
                     f"starved_reads={o['starved_reads']} components={','.join(o['components'])}")
    for name, i in report.instances.items():
        group = "-" if i["group"] is None else i["group"]
        lines.append(f"instance={name} id={i['instance_id']} group={group} rate={i['decode_rate']} "
                     f"decoded={i['pictures_decoded']} stalls={i['stall_steps']} state={i['state']}")
    for idx, b in report.buffers.items():
        lines.append(f"buffer={idx} media={b['media']} capacity={b['capacity']} "
                     f"occupancy={b['occupancy_min']}..{b['occupancy_max']} evictions={b['evictions']}")
    for rec in report.timeline:
        parts = []
        for obj in sorted(rec["consumed"]):
            comps = rec["consumed"][obj]
            parts.append(obj + ":" + ",".join(
                f"{c}={'-' if p is None else p}" for c, p in sorted(comps.items())))
        lines.append(f"step={rec['step']} t={rec['time']} " + " ".join(parts))
    for u in report.updates:
        status = "applied" if u["applied"] else f"failed reason={u['reason']}"
        lines.append(f"update={u['index']} t={u['activation_time']} {status}")
    lines.append(f"max_poc_skew={report.max_poc_skew}")
    return "\n".join(lines) + "\n"
