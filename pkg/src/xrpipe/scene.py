"""glTF 2.0 subset with MPEG media extensions.

Documents are validated as plain JSON first (:func:`validate_document`) and
then lifted into an immutable typed :class:`SceneGraph`.  Everything outside
the modelled subset, including unknown extensions, is kept verbatim in each
element's ``extra`` dict so a graph serializes back to an equivalent
document.

Supported extensions and the fields this package reads:

* ``MPEG_media`` (top level): ``media[i] = {name, alternatives[{uri, mimeType, tracks[{track}]}]}``
* ``MPEG_circular_buffer`` (buffer): ``{count, media, track}``
* ``MPEG_timed_accessors`` (accessor): ``{suggestedUpdateRate}``
* ``MPEG_video_texture`` (texture): ``{timedAccessor}``
* ``MPEG_spatial_audio`` (top level): ``audioNodes[i] = {type, timedAccessor, inputs, node}``

A mesh may carry ``extras.objectId``; media reached through that mesh belong
to the named object (used for per-object decoder grouping).
"""

from __future__ import annotations

import base64
import copy
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, ClassVar, Iterator

import jsonschema
import numpy as np

from .errors import (
    CycleDetected,
    DanglingReference,
    InvalidAudioGraph,
    MalformedDocument,
    SceneError,
    TimedWithoutCircular,
    VideoTextureNotTimed,
)

__all__ = [
    "MPEG_MEDIA",
    "MPEG_CIRCULAR_BUFFER",
    "MPEG_TIMED_ACCESSORS",
    "MPEG_VIDEO_TEXTURE",
    "MPEG_SPATIAL_AUDIO",
    "ARRAY_PATHS",
    "REFERENCES",
    "Violation",
    "SceneGraph",
    "MediaRequest",
    "parse_scene",
    "load_scene",
    "dump_scene",
    "validate_document",
    "validate_scene",
    "iter_references",
    "collect_media_requests",
    "request_objects",
    "flatten_world_transforms",
    "buffer_data",
    "pointer",
]

MPEG_MEDIA = "MPEG_media"
MPEG_CIRCULAR_BUFFER = "MPEG_circular_buffer"
MPEG_TIMED_ACCESSORS = "MPEG_timed_accessors"
MPEG_VIDEO_TEXTURE = "MPEG_video_texture"
MPEG_SPATIAL_AUDIO = "MPEG_spatial_audio"

# top-level arrays that other elements point into, by their document location
ARRAY_PATHS: dict[str, tuple[str, ...]] = {
    "scenes": ("scenes",),
    "nodes": ("nodes",),
    "meshes": ("meshes",),
    "accessors": ("accessors",),
    "bufferViews": ("bufferViews",),
    "buffers": ("buffers",),
    "textures": ("textures",),
    "images": ("images",),
    "samplers": ("samplers",),
    "materials": ("materials",),
    "cameras": ("cameras",),
    "media": ("extensions", MPEG_MEDIA, "media"),
    "audioNodes": ("extensions", MPEG_SPATIAL_AUDIO, "audioNodes"),
}

# every index-bearing field of the subset; "*" matches any array index or object key
REFERENCES: tuple[tuple[tuple[str, ...], str], ...] = (
    (("scene",), "scenes"),
    (("scenes", "*", "nodes", "*"), "nodes"),
    (("nodes", "*", "children", "*"), "nodes"),
    (("nodes", "*", "mesh"), "meshes"),
    (("nodes", "*", "camera"), "cameras"),
    (("meshes", "*", "primitives", "*", "attributes", "*"), "accessors"),
    (("meshes", "*", "primitives", "*", "indices"), "accessors"),
    (("meshes", "*", "primitives", "*", "material"), "materials"),
    (("accessors", "*", "bufferView"), "bufferViews"),
    (("bufferViews", "*", "buffer"), "buffers"),
    (("buffers", "*", "extensions", MPEG_CIRCULAR_BUFFER, "media"), "media"),
    (("textures", "*", "source"), "images"),
    (("textures", "*", "sampler"), "samplers"),
    (("textures", "*", "extensions", MPEG_VIDEO_TEXTURE, "timedAccessor"), "accessors"),
    (("images", "*", "bufferView"), "bufferViews"),
    (("materials", "*", "pbrMetallicRoughness", "baseColorTexture", "index"), "textures"),
    (("extensions", MPEG_SPATIAL_AUDIO, "audioNodes", "*", "timedAccessor"), "accessors"),
    (("extensions", MPEG_SPATIAL_AUDIO, "audioNodes", "*", "node"), "nodes"),
    (("extensions", MPEG_SPATIAL_AUDIO, "audioNodes", "*", "inputs", "*"), "audioNodes"),
)

_EXTENSION_SITES = (
    ((), MPEG_MEDIA),
    ((), MPEG_SPATIAL_AUDIO),
    (("buffers", "*"), MPEG_CIRCULAR_BUFFER),
    (("accessors", "*"), MPEG_TIMED_ACCESSORS),
    (("textures", "*"), MPEG_VIDEO_TEXTURE),
)

_ERRORS = {
    cls.code: cls
    for cls in (MalformedDocument, DanglingReference, CycleDetected, TimedWithoutCircular,
                VideoTextureNotTimed, InvalidAudioGraph)
}


# JSON pointer helpers

def pointer(path) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def _walk(node, pattern, prefix=()):
    if not pattern:
        yield prefix, node
        return
    head, rest = pattern[0], pattern[1:]
    if head == "*":
        if isinstance(node, list):
            for i, child in enumerate(node):
                yield from _walk(child, rest, prefix + (i,))
        elif isinstance(node, dict):
            for key, child in node.items():
                yield from _walk(child, rest, prefix + (key,))
    elif isinstance(node, dict) and head in node:
        yield from _walk(node[head], rest, prefix + (head,))


def _get(doc, path, default=None):
    node = doc
    for p in path:
        if isinstance(node, dict) and p in node:
            node = node[p]
        elif isinstance(node, list) and isinstance(p, int) and 0 <= p < len(node):
            node = node[p]
        else:
            return default
    return node


def array_of(doc: dict, name: str) -> list:
    arr = _get(doc, ARRAY_PATHS[name], [])
    return arr if isinstance(arr, list) else []


def iter_references(doc: dict) -> Iterator[tuple[tuple, str, object]]:
    """Yield ``(path, target_array, value)`` for every index reference in ``doc``."""
    for pattern, target in REFERENCES:
        for path, value in _walk(doc, pattern):
            yield path, target, value


# violations

@dataclass(frozen=True)
class Violation:
    code: str
    path: str
    message: str
    severity: str = "error"

    def __str__(self):
        return f"{self.code} at {self.path or '/'}: {self.message}"


@lru_cache(maxsize=None)
def _schema(name: str):
    text = resources.files("xrpipe").joinpath("schemas", f"{name}.schema.json").read_text()
    schema = json.loads(text)
    return jsonschema.Draft202012Validator(schema)


def _schema_violations(validator, instance, base) -> list[Violation]:
    out = []
    for err in sorted(validator.iter_errors(instance), key=lambda e: list(map(str, e.absolute_path))):
        out.append(Violation("MalformedDocument", pointer(base + tuple(err.absolute_path)), err.message))
    return out


def _find_cycle(n: int, edges: Callable[[int], list[int]]) -> list[int] | None:
    """Return one cycle (as a node list) in a graph over ``range(n)``, or None."""
    WHITE, GREY, BLACK = 0, 1, 2
    color = [WHITE] * n
    for root in range(n):
        if color[root] != WHITE:
            continue
        stack = [(root, iter(edges(root)))]
        color[root] = GREY
        trail = [root]
        while stack:
            v, it = stack[-1]
            for w in it:
                if color[w] == GREY:
                    return trail[trail.index(w):] + [w]
                if color[w] == WHITE:
                    color[w] = GREY
                    trail.append(w)
                    stack.append((w, iter(edges(w))))
                    break
            else:
                color[v] = BLACK
                trail.pop()
                stack.pop()
    return None


def validate_document(doc) -> list[Violation]:
    """All violations of the supported subset's invariants, errors then warnings.

    Structural (schema) problems short-circuit the semantic checks.
    """
    if not isinstance(doc, dict):
        return [Violation("MalformedDocument", "", "document root must be a JSON object")]
    out = _schema_violations(_schema("gltf_subset"), doc, ())
    for site, ext in _EXTENSION_SITES:
        for path, obj in _walk(doc, site):
            value = _get(obj, ("extensions", ext)) if isinstance(obj, dict) else None
            if value is not None:
                out += _schema_violations(_schema(ext), value, path + ("extensions", ext))
    if out:
        return out

    # index references
    bad_refs = set()
    for path, target, value in iter_references(doc):
        size = len(array_of(doc, target))
        if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < size:
            bad_refs.add(path)
            out.append(Violation("DanglingReference", pointer(path),
                                 f"index {value!r} into {target} (size {size})"))
    media = array_of(doc, "media")
    for path, circ in _walk(doc, ("buffers", "*", "extensions", MPEG_CIRCULAR_BUFFER)):
        m = circ.get("media")
        track = circ.get("track", 0)
        if isinstance(m, int) and 0 <= m < len(media):
            tracks = media[m]["alternatives"][0].get("tracks")
            n_tracks = len(tracks) if tracks else 1
            if track >= n_tracks:
                out.append(Violation("DanglingReference", pointer(path + ("track",)),
                                     f"track {track} of media {m} which has {n_tracks}"))

    nodes = array_of(doc, "nodes")

    def children(i):
        return [c for c in nodes[i].get("children", []) if isinstance(c, int) and 0 <= c < len(nodes)]

    cycle = _find_cycle(len(nodes), children)
    if cycle:
        out.append(Violation("CycleDetected", "/nodes",
                             "node cycle " + " -> ".join(map(str, cycle))))

    audio = array_of(doc, "audioNodes")

    def feeds(i):
        # edge input -> consumer, so a cycle means a node ends up feeding itself
        return [j for j, a in enumerate(audio) if i in a.get("inputs", [])]

    cycle = _find_cycle(len(audio), feeds)
    if cycle:
        out.append(Violation("CycleDetected", pointer(ARRAY_PATHS["audioNodes"]),
                             "audio cycle " + " -> ".join(map(str, cycle))))
    out += _audio_rules(audio)

    accessors = array_of(doc, "accessors")
    views = array_of(doc, "bufferViews")
    buffers = array_of(doc, "buffers")
    for i, acc in enumerate(accessors):
        if MPEG_TIMED_ACCESSORS not in acc.get("extensions", {}):
            continue
        where = pointer(("accessors", i))
        bv = acc.get("bufferView")
        if bv is None:
            out.append(Violation("TimedWithoutCircular", where, "timed accessor has no bufferView"))
            continue
        if ("accessors", i, "bufferView") in bad_refs:
            continue
        b = views[bv]["buffer"]
        if ("bufferViews", bv, "buffer") in bad_refs:
            continue
        if MPEG_CIRCULAR_BUFFER not in buffers[b].get("extensions", {}):
            out.append(Violation("TimedWithoutCircular", where,
                                 f"timed accessor reads buffer {b}, which lacks {MPEG_CIRCULAR_BUFFER}"))
    for path, ta in _walk(doc, ("textures", "*", "extensions", MPEG_VIDEO_TEXTURE, "timedAccessor")):
        if path in bad_refs:
            continue
        if MPEG_TIMED_ACCESSORS not in accessors[ta].get("extensions", {}):
            out.append(Violation("VideoTextureNotTimed", pointer(path),
                                 f"accessor {ta} is not a timed accessor"))

    parents: dict[int, int] = {}
    for i in range(len(nodes)):
        for c in children(i):
            parents[c] = parents.get(c, 0) + 1
    for c, count in sorted(parents.items()):
        if count > 1:
            out.append(Violation("MultipleParents", pointer(("nodes", c)),
                                 f"node {c} has {count} parents", severity="warning"))
    return out


def _audio_rules(audio: list) -> list[Violation]:
    out = []
    base = ARRAY_PATHS["audioNodes"]
    consumers: dict[int, list[int]] = {}
    for j, a in enumerate(audio):
        for i in a.get("inputs", []):
            consumers.setdefault(i, []).append(j)
    for i, a in enumerate(audio):
        kind = a["type"]
        inputs = a.get("inputs", [])
        where = pointer(base + (i,))
        if kind == "AudioSource":
            if inputs:
                out.append(Violation("InvalidAudioGraph", where, "an AudioSource takes no inputs"))
            if "timedAccessor" not in a:
                out.append(Violation("InvalidAudioGraph", where, "an AudioSource needs a timedAccessor"))
        elif kind == "AudioMixer" and not inputs:
            out.append(Violation("InvalidAudioGraph", where, "an AudioMixer needs at least one input"))
        elif kind == "AudioEffect" and len(inputs) > 1:
            out.append(Violation("InvalidAudioGraph", where, "an AudioEffect takes at most one input"))
        if kind == "AudioListener" and consumers.get(i):
            out.append(Violation("InvalidAudioGraph", where,
                                 f"AudioListener {i} feeds audio nodes {consumers[i]}"))
    return out


# typed model

def _tuple(v):
    return tuple(_tuple(x) for x in v) if isinstance(v, list) else v


def _list(v):
    return [_list(x) for x in v] if isinstance(v, tuple) else v


class _Element:
    """JSON-backed element: ``_fields`` are modelled, everything else lands in ``extra``."""

    _fields: ClassVar[tuple[tuple[str, str, object], ...]] = ()
    _extensions: ClassVar[dict[str, tuple[str, type]]] = {}

    @classmethod
    def from_json(cls, obj: dict):
        obj = copy.deepcopy(obj)
        kwargs = {}
        for key, attr, kind in cls._fields:
            if key not in obj:
                continue
            value = obj.pop(key)
            if isinstance(kind, type) and issubclass(kind, _Element):
                value = tuple(kind.from_json(x) for x in value)
            elif kind is tuple:
                value = _tuple(value)
            kwargs[attr] = value
        exts = obj.get("extensions")
        if isinstance(exts, dict):
            for name, (attr, sub) in cls._extensions.items():
                if name in exts:
                    kwargs[attr] = sub.from_json(exts.pop(name))
            if not exts:
                del obj["extensions"]
        kwargs["extra"] = obj
        return cls(**kwargs)

    def to_json(self) -> dict:
        out = {}
        for key, attr, kind in self._fields:
            value = getattr(self, attr)
            if value is None:
                continue
            if isinstance(kind, type) and issubclass(kind, _Element):
                if not value:
                    continue  # glTF arrays are never empty; absent and () serialize alike
                value = [x.to_json() for x in value]
            elif kind is tuple:
                value = _list(value)
            else:
                value = copy.deepcopy(value)
            out[key] = value
        extra = copy.deepcopy(self.extra)
        exts = extra.pop("extensions", {})
        for name, (attr, _) in self._extensions.items():
            value = getattr(self, attr)
            if value is not None:
                exts[name] = value.to_json()
        out.update(extra)
        if exts:
            out["extensions"] = exts
        return out


@dataclass(frozen=True)
class Scene(_Element):
    name: str | None = None
    nodes: tuple[int, ...] | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("name", "name", None), ("nodes", "nodes", tuple))


@dataclass(frozen=True)
class Node(_Element):
    name: str | None = None
    children: tuple[int, ...] | None = None
    mesh: int | None = None
    camera: int | None = None
    matrix: tuple[float, ...] | None = None
    translation: tuple[float, ...] | None = None
    rotation: tuple[float, ...] | None = None
    scale: tuple[float, ...] | None = None
    extra: dict = field(default_factory=dict)
    _fields = (
        ("name", "name", None), ("children", "children", tuple), ("mesh", "mesh", None),
        ("camera", "camera", None), ("matrix", "matrix", tuple), ("translation", "translation", tuple),
        ("rotation", "rotation", tuple), ("scale", "scale", tuple),
    )

    def local_matrix(self) -> np.ndarray:
        if self.matrix is not None:
            # glTF stores matrices column-major
            return np.array(self.matrix, dtype=float).reshape(4, 4).T
        t = np.eye(4)
        if self.translation is not None:
            t[:3, 3] = self.translation
        r = np.eye(4)
        if self.rotation is not None:
            r[:3, :3] = _quaternion_matrix(self.rotation)
        s = np.eye(4)
        if self.scale is not None:
            s[0, 0], s[1, 1], s[2, 2] = self.scale
        return t @ r @ s


def _quaternion_matrix(q) -> np.ndarray:
    x, y, z, w = q
    n = math.sqrt(x * x + y * y + z * z + w * w)
    if n == 0:
        return np.eye(3)
    x, y, z, w = x / n, y / n, z / n, w / n
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


@dataclass(frozen=True)
class Primitive(_Element):
    attributes: dict = field(default_factory=dict)
    indices: int | None = None
    material: int | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("attributes", "attributes", None), ("indices", "indices", None), ("material", "material", None))


@dataclass(frozen=True)
class Mesh(_Element):
    name: str | None = None
    primitives: tuple[Primitive, ...] = ()
    extra: dict = field(default_factory=dict)
    _fields = (("name", "name", None), ("primitives", "primitives", Primitive))

    @property
    def object_id(self) -> str | None:
        extras = self.extra.get("extras")
        return extras.get("objectId") if isinstance(extras, dict) else None


@dataclass(frozen=True)
class TimedAccessor(_Element):
    suggested_update_rate: float | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("suggestedUpdateRate", "suggested_update_rate", None),)


@dataclass(frozen=True)
class Accessor(_Element):
    component_type: int | None = None
    count: int | None = None
    type: str | None = None
    buffer_view: int | None = None
    byte_offset: int | None = None
    timed: TimedAccessor | None = None
    extra: dict = field(default_factory=dict)
    _fields = (
        ("bufferView", "buffer_view", None), ("byteOffset", "byte_offset", None),
        ("componentType", "component_type", None), ("count", "count", None), ("type", "type", None),
    )
    _extensions = {MPEG_TIMED_ACCESSORS: ("timed", TimedAccessor)}


@dataclass(frozen=True)
class BufferView(_Element):
    buffer: int | None = None
    byte_length: int | None = None
    byte_offset: int | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("buffer", "buffer", None), ("byteOffset", "byte_offset", None), ("byteLength", "byte_length", None))


@dataclass(frozen=True)
class CircularBufferDecl(_Element):
    capacity_frames: int | None = None
    media: int | None = None
    track: int | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("count", "capacity_frames", None), ("media", "media", None), ("track", "track", None))


@dataclass(frozen=True)
class Buffer(_Element):
    byte_length: int | None = None
    uri: str | None = None
    circular: CircularBufferDecl | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("byteLength", "byte_length", None), ("uri", "uri", None))
    _extensions = {MPEG_CIRCULAR_BUFFER: ("circular", CircularBufferDecl)}


@dataclass(frozen=True)
class VideoTexture(_Element):
    timed_accessor: int | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("timedAccessor", "timed_accessor", None),)


@dataclass(frozen=True)
class Texture(_Element):
    source: int | None = None
    sampler: int | None = None
    video: VideoTexture | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("source", "source", None), ("sampler", "sampler", None))
    _extensions = {MPEG_VIDEO_TEXTURE: ("video", VideoTexture)}


@dataclass(frozen=True)
class Image(_Element):
    uri: str | None = None
    mime_type: str | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("uri", "uri", None), ("mimeType", "mime_type", None))


@dataclass(frozen=True)
class Material(_Element):
    name: str | None = None
    pbr: dict | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("name", "name", None), ("pbrMetallicRoughness", "pbr", None))

    @property
    def base_color_texture(self) -> int | None:
        if not self.pbr:
            return None
        tex = self.pbr.get("baseColorTexture")
        return tex.get("index") if tex else None


@dataclass(frozen=True)
class Camera(_Element):
    type: str | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("type", "type", None),)


@dataclass(frozen=True)
class Track(_Element):
    track: str | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("track", "track", None),)


@dataclass(frozen=True)
class MediaAlternative(_Element):
    uri: str | None = None
    mime_type: str | None = None
    tracks: tuple[Track, ...] | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("uri", "uri", None), ("mimeType", "mime_type", None), ("tracks", "tracks", Track))


@dataclass(frozen=True)
class Media(_Element):
    name: str | None = None
    alternatives: tuple[MediaAlternative, ...] = ()
    extra: dict = field(default_factory=dict)
    _fields = (("name", "name", None), ("alternatives", "alternatives", MediaAlternative))


@dataclass(frozen=True)
class MpegMedia(_Element):
    media: tuple[Media, ...] = ()
    extra: dict = field(default_factory=dict)
    _fields = (("media", "media", Media),)


@dataclass(frozen=True)
class AudioNode(_Element):
    kind: str | None = None
    timed_accessor: int | None = None
    inputs: tuple[int, ...] | None = None
    node: int | None = None
    extra: dict = field(default_factory=dict)
    _fields = (("type", "kind", None), ("timedAccessor", "timed_accessor", None),
               ("inputs", "inputs", tuple), ("node", "node", None))

    @property
    def standalone(self) -> bool:
        """A scene-wide effect: no input and no attachment."""
        return self.kind == "AudioEffect" and not self.inputs and self.node is None


@dataclass(frozen=True)
class SpatialAudio(_Element):
    audio_nodes: tuple[AudioNode, ...] = ()
    extra: dict = field(default_factory=dict)
    _fields = (("audioNodes", "audio_nodes", AudioNode),)


@dataclass(frozen=True)
class SceneGraph(_Element):
    """Immutable typed view of a validated document."""

    asset: dict | None = None
    scene: int | None = None
    scenes: tuple[Scene, ...] = ()
    nodes: tuple[Node, ...] = ()
    meshes: tuple[Mesh, ...] = ()
    accessors: tuple[Accessor, ...] = ()
    buffer_views: tuple[BufferView, ...] = ()
    buffers: tuple[Buffer, ...] = ()
    textures: tuple[Texture, ...] = ()
    images: tuple[Image, ...] = ()
    materials: tuple[Material, ...] = ()
    cameras: tuple[Camera, ...] = ()
    extensions_used: tuple[str, ...] | None = None
    extensions_required: tuple[str, ...] | None = None
    mpeg_media: MpegMedia | None = None
    spatial_audio: SpatialAudio | None = None
    extra: dict = field(default_factory=dict)
    _fields = (
        ("asset", "asset", None), ("scene", "scene", None), ("scenes", "scenes", Scene),
        ("nodes", "nodes", Node), ("meshes", "meshes", Mesh), ("accessors", "accessors", Accessor),
        ("bufferViews", "buffer_views", BufferView), ("buffers", "buffers", Buffer),
        ("textures", "textures", Texture), ("images", "images", Image),
        ("materials", "materials", Material), ("cameras", "cameras", Camera),
        ("extensionsUsed", "extensions_used", tuple), ("extensionsRequired", "extensions_required", tuple),
    )
    _extensions = {MPEG_MEDIA: ("mpeg_media", MpegMedia), MPEG_SPATIAL_AUDIO: ("spatial_audio", SpatialAudio)}

    @property
    def media_list(self) -> tuple[Media, ...]:
        return self.mpeg_media.media if self.mpeg_media else ()

    @property
    def audio_nodes(self) -> tuple[AudioNode, ...]:
        return self.spatial_audio.audio_nodes if self.spatial_audio else ()

    def to_document(self) -> dict:
        return self.to_json()


# parse / serialize

def parse_scene(document) -> SceneGraph:
    """Parse glTF JSON text (or an already-decoded dict) and validate it.

    Raises the :class:`~xrpipe.errors.SceneError` subclass matching the first
    error found; ``exc.violations`` lists every error.
    """
    if isinstance(document, (bytes, bytearray)):
        document = document.decode("utf-8")
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"not valid JSON: {exc}") from None
    errors = [v for v in validate_document(document) if v.severity == "error"]
    if errors:
        first = errors[0]
        raise _ERRORS.get(first.code, SceneError)(str(first), errors)
    return SceneGraph.from_json(document)


def load_scene(path) -> SceneGraph:
    return parse_scene(Path(path).read_text(encoding="utf-8"))


def dump_scene(graph_or_doc) -> str:
    doc = graph_or_doc.to_document() if isinstance(graph_or_doc, SceneGraph) else graph_or_doc
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def validate_scene(graph, include_warnings: bool = False) -> list[Violation]:
    """Violations of a graph (or raw document); empty when every invariant holds."""
    doc = graph.to_document() if isinstance(graph, SceneGraph) else graph
    found = validate_document(doc)
    if include_warnings:
        return found
    return [v for v in found if v.severity == "error"]


def buffer_data(graph: SceneGraph, index: int, base_dir=".") -> bytes:
    """Bytes of a static buffer from a base64 data URI or a sidecar file."""
    buf = graph.buffers[index]
    if buf.uri is None:
        raise SceneError(f"buffer {index} has no uri (timed buffers are filled by the media pipeline)")
    if buf.uri.startswith("data:"):
        _, _, payload = buf.uri.partition(",")
        data = base64.b64decode(payload)
    else:
        data = (Path(base_dir) / buf.uri).read_bytes()
    if len(data) < buf.byte_length:
        raise SceneError(f"buffer {index} holds {len(data)} bytes, byteLength is {buf.byte_length}")
    return data[:buf.byte_length]


# traversal

def _reachable_nodes(graph: SceneGraph, scene_indices) -> list[int]:
    seen: list[int] = []
    mark = set()
    for s in scene_indices:
        stack = list(reversed(graph.scenes[s].nodes or ()))
        while stack:
            n = stack.pop()
            if n in mark:
                continue
            mark.add(n)
            seen.append(n)
            stack.extend(reversed(graph.nodes[n].children or ()))
    return seen


def flatten_world_transforms(graph: SceneGraph, scene_index: int,
                             cull: Callable[[int, Node, np.ndarray], bool] | None = None
                             ) -> list[tuple[int, np.ndarray]]:
    """World matrix of every node in a scene, depth first, each node once.

    A node shared by several parents takes the chain through which it is
    first reached.  ``cull(index, node, world)`` returning False drops that
    node and its subtree.
    """
    scene = graph.scenes[scene_index]
    out = []
    visited = set()
    stack = [(n, np.eye(4)) for n in reversed(scene.nodes or ())]
    while stack:
        n, parent = stack.pop()
        if n in visited:
            continue
        visited.add(n)
        node = graph.nodes[n]
        world = parent @ node.local_matrix()
        if cull is not None and not cull(n, node, world):
            continue
        out.append((n, world))
        stack.extend((c, world) for c in reversed(node.children or ()))
    return out


@dataclass(frozen=True, order=True)
class MediaRequest:
    media: int
    track: int
    buffer: int


def _timed_target(graph: SceneGraph, accessor: int, alternative: int = 0) -> MediaRequest | None:
    acc = graph.accessors[accessor]
    if acc.timed is None or acc.buffer_view is None:
        return None
    b = graph.buffer_views[acc.buffer_view].buffer
    circ = graph.buffers[b].circular
    if circ is None:
        return None
    return MediaRequest(circ.media, circ.track or 0, b)


def _requests_with_owner(graph: SceneGraph):
    """(request, owner) pairs in discovery order; owner names the reaching object."""
    found = []
    nodes = _reachable_nodes(graph, range(len(graph.scenes)))
    for n in nodes:
        m = graph.nodes[n].mesh
        if m is None:
            continue
        mesh = graph.meshes[m]
        owner = mesh.object_id or f"mesh{m}"
        accessors = []
        for prim in mesh.primitives:
            accessors += [prim.attributes[k] for k in sorted(prim.attributes)]
            if prim.indices is not None:
                accessors.append(prim.indices)
            if prim.material is not None:
                tex = graph.materials[prim.material].base_color_texture
                if tex is not None and graph.textures[tex].video is not None:
                    accessors.append(graph.textures[tex].video.timed_accessor)
        for a in accessors:
            req = _timed_target(graph, a)
            if req is not None:
                found.append((req, owner))
    reachable = set(nodes)
    for i, a in enumerate(graph.audio_nodes):
        if a.kind != "AudioSource" or a.timed_accessor is None:
            continue
        if a.node is not None and a.node not in reachable:
            continue
        req = _timed_target(graph, a.timed_accessor)
        if req is not None:
            found.append((req, f"audio{i}"))
    return found


def collect_media_requests(graph: SceneGraph) -> list[MediaRequest]:
    """Deduplicated media requests reachable from any scene, ordered by
    (media, track, buffer)."""
    return sorted({req for req, _ in _requests_with_owner(graph)})


def request_objects(graph: SceneGraph) -> dict[MediaRequest, str]:
    """Object each request belongs to (first reaching mesh or audio source)."""
    owners: dict[MediaRequest, str] = {}
    for req, owner in _requests_with_owner(graph):
        owners.setdefault(req, owner)
    return owners
