"""Scene and scenario builders shared by the tests."""

from __future__ import annotations

import copy

from xrpipe.maf import Scenario
from xrpipe.toy_stream import make_test_stream
from xrpipe.vdi_engine import CapabilityEnvelope


def component_scene(objects: dict[str, list[str]], capacity: int = 8, video_texture: str | None = None) -> dict:
    """One mesh per object, one timed accessor + circular buffer + media per component.

    ``video_texture`` names a component read through a material's video
    texture instead of a mesh attribute.
    """
    doc = {
        "asset": {"version": "2.0"},
        "scene": 0,
        "scenes": [{"name": "main", "nodes": []}],
        "nodes": [], "meshes": [], "accessors": [], "bufferViews": [], "buffers": [],
        "extensionsUsed": ["MPEG_media", "MPEG_circular_buffer", "MPEG_timed_accessors"],
        "extensions": {"MPEG_media": {"media": []}},
    }
    for obj, comps in objects.items():
        attributes = {}
        material = None
        for comp in comps:
            i = len(doc["extensions"]["MPEG_media"]["media"])
            doc["extensions"]["MPEG_media"]["media"].append({
                "name": comp,
                "alternatives": [{"uri": f"{comp}.toys", "mimeType": "video/x-toy",
                                  "tracks": [{"track": "#track=0"}]}],
            })
            doc["buffers"].append({"byteLength": 1, "extensions": {
                "MPEG_circular_buffer": {"count": capacity, "media": i, "track": 0}}})
            doc["bufferViews"].append({"buffer": i, "byteLength": 1})
            doc["accessors"].append({"bufferView": i, "componentType": 5121, "count": 1, "type": "SCALAR",
                                     "extensions": {"MPEG_timed_accessors": {"suggestedUpdateRate": 30}}})
            if comp == video_texture:
                doc.setdefault("textures", []).append({"extensions": {"MPEG_video_texture": {"timedAccessor": i}}})
                doc.setdefault("materials", []).append(
                    {"pbrMetallicRoughness": {"baseColorTexture": {"index": len(doc["textures"]) - 1}}})
                material = len(doc["materials"]) - 1
                if "MPEG_video_texture" not in doc["extensionsUsed"]:
                    doc["extensionsUsed"].append("MPEG_video_texture")
            else:
                attributes[f"_{comp.upper()}"] = i
        prim = {"attributes": attributes}
        if material is not None:
            prim["material"] = material
        doc["meshes"].append({"name": obj, "primitives": [prim], "extras": {"objectId": obj}})
        doc["nodes"].append({"name": obj, "mesh": len(doc["meshes"]) - 1})
        doc["scenes"][0]["nodes"].append(len(doc["nodes"]) - 1)
    return doc


def component_scenario(rates: dict[str, int], grouping="NONE", tolerance=0, steps=10, frames=40,
                       size=(16, 8), envelope=None, capacity=8, objects=None, **extra) -> Scenario:
    names = sorted(rates)
    objects = objects or {"pointcloud": names}
    streams = {n: make_test_stream({"frames": frames, "width": size[0], "height": size[1], "stream_id": i})
               for i, n in enumerate(names)}
    envelope = envelope or CapabilityEnvelope(16, 10**9, 4096, 4096)
    return Scenario(
        scene=component_scene(objects, capacity), streams=streams, envelope=envelope, steps=steps,
        decode_rates=dict(rates), grouping=grouping, skew_tolerance_pocs=tolerance, **extra,
    )


def clone(doc):
    return copy.deepcopy(doc)
