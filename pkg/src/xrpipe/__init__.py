"""Multi-instance video decoding, decoder timing and MPEG scene description toolkit."""

from .circular_buffer import CircularBuffer, Frame
from .errors import XrPipeError
from .input_formatting import StackLayout, TilePredicate, append_streams, filter_tiles, insert_unit, stack_streams
from .maf import Scenario, SyncReport, build_pipeline, emit_report, load_scenario, run, run_with_updates
from .scene import SceneGraph, collect_media_requests, flatten_world_transforms, parse_scene, validate_scene
from .scene_updates import PatchTransaction, apply_transaction, reindex_references, schedule_updates
from .std_model import ArrivalSchedule, StdConfig, Verdict, check_cdm_rules, simulate_std
from .toy_stream import AccessUnit, CodecProfile, ToyStream, make_test_stream, parse_stream, serialize_stream
from .vdi_engine import CapabilityEnvelope, DecodeRequirements, VideoDecodingEngine, decode_stream

__version__ = "0.1.0"

__all__ = [
    "AccessUnit", "ArrivalSchedule", "CapabilityEnvelope", "CircularBuffer", "CodecProfile",
    "DecodeRequirements", "Frame", "PatchTransaction", "Scenario", "SceneGraph", "StackLayout",
    "StdConfig", "SyncReport", "TilePredicate", "ToyStream", "Verdict", "VideoDecodingEngine",
    "XrPipeError", "append_streams", "apply_transaction", "build_pipeline", "check_cdm_rules",
    "collect_media_requests", "decode_stream", "emit_report", "filter_tiles", "flatten_world_transforms",
    "insert_unit", "load_scenario", "make_test_stream", "parse_scene", "parse_stream",
    "reindex_references", "run", "run_with_updates", "schedule_updates", "serialize_stream",
    "simulate_std", "stack_streams", "validate_scene",
]
