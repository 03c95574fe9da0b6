"""``xrpipe`` command line."""

from __future__ import annotations

import hashlib
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path

import click

from . import maf
from .errors import XrPipeError
from .input_formatting import StackLayout, TilePredicate, append_streams, filter_tiles, insert_unit, stack_streams
from .report import dumps_structured
from .scene import dump_scene, validate_document
from .scene_updates import PatchTransaction, schedule_updates
from .std_model import StdConfig, constant_rate_schedule, simulate_std, trace_lines, trace_report
from .toy_stream import AccessUnit, StreamSpec, make_test_stream, parse_stream, serialize_stream


def _fail(message: str, code: int = 1):
    click.echo(message, err=True)
    sys.exit(code)


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        _fail(f"error: cannot read {path}: {exc}", 2)


def _read_stream(path: str):
    try:
        return parse_stream(Path(path).read_bytes())
    except OSError as exc:
        _fail(f"error: cannot read {path}: {exc}", 2)


def _stream_summary(stream) -> dict:
    data = serialize_stream(stream)
    return {
        "stream_id": stream.stream_id,
        "codec_profile": stream.codec_profile.name,
        "grid": [stream.grid_cols, stream.grid_rows],
        "units": len(stream.units),
        "pocs": stream.pocs(),
        "bytes": len(data),
        "sha256": hashlib.sha256(data).hexdigest(),
    }


def _write_stream(stream, output: str):
    Path(output).write_bytes(serialize_stream(stream))
    click.echo(dumps_structured({"kind": "stream", **_stream_summary(stream)}), nl=False)


@click.group()
@click.option("-v", "--verbose", count=True, help="Log more (repeat for debug).")
def main(verbose):
    """Multi-instance decoding, STD timing and scene description tools."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("scene", type=click.Path(exists=True, dir_okay=False))
@click.option("--warnings", is_flag=True, help="Also report warnings.")
@click.option("--format", "fmt", type=click.Choice(["text", "structured"]), default="text")
def validate(scene, warnings, fmt):
    """Check a scene document; exit 1 if it has any violation."""
    text = Path(scene).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        found = [{"code": "MalformedDocument", "path": "", "message": f"not valid JSON: {exc}",
                  "severity": "error"}]
    else:
        found = [{"code": v.code, "path": v.path, "message": v.message, "severity": v.severity}
                 for v in validate_document(doc) if warnings or v.severity == "error"]
    errors = [v for v in found if v["severity"] == "error"]
    if fmt == "structured":
        click.echo(dumps_structured({"kind": "validation", "valid": not errors, "violations": found}), nl=False)
    else:
        for v in found:
            click.echo(f"{v['severity'].upper()} {v['code']} {v['path'] or '/'}: {v['message']}")
        click.echo("VALID" if not errors else f"INVALID ({len(errors)} errors)")
    sys.exit(1 if errors else 0)


@main.command()
@click.argument("scene", type=click.Path(exists=True, dir_okay=False))
@click.argument("patch", type=click.Path(exists=True, dir_okay=False))
@click.option("-t", "--time", "at", type=int, default=None,
              help="Presentation time; only transactions active by then apply.")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
def patch(scene, patch, at, output):
    """Apply a JSON Patch (or a list of timed envelopes) to a scene."""
    doc = _read_json(scene)
    data = _read_json(patch)
    try:
        if isinstance(data, list) and data and all(isinstance(x, dict) and "patch" in x for x in data):
            txns = [PatchTransaction.from_json(x) for x in data]
        else:
            txns = [PatchTransaction.from_json(data)]
    except XrPipeError as exc:
        _fail(f"error: {exc}", 2)
    if at is not None:
        txns = [t for t in txns if t.activation_time <= at]
    timeline = schedule_updates(doc, txns)
    failed = [r for r in timeline.reports if not r.applied]
    if failed:
        click.echo(dumps_structured({"kind": "patch_failure", "reports": [r.to_dict() for r in timeline.reports]}),
                   nl=False)
        sys.exit(1)
    result = dump_scene(timeline.state_at(max((t.activation_time for t in txns), default=0)))
    if output:
        Path(output).write_text(result, encoding="utf-8")
    else:
        click.echo(result, nl=False)


@main.command()
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--updates", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)
@click.option("--format", "fmt", type=click.Choice(["text", "structured"]), default="structured")
@click.option("--threads", type=click.IntRange(1, 2), default=1)
def run(scenario, updates, report_path, fmt, threads):
    """Run a pipeline scenario and print its synchronization report."""
    try:
        sc = maf.load_scenario(scenario)
        pipeline = maf.build_pipeline(sc)
        if updates:
            report = maf.run_with_updates(pipeline, sc, maf.load_updates(updates), threads=threads)
        else:
            report = maf.run(pipeline, sc, threads=threads)
    except (XrPipeError, KeyError) as exc:
        _fail(f"error: {exc}")
    text = maf.emit_report(report, fmt)
    if report_path:
        Path(report_path).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@main.group(name="format")
def format_group():
    """Bitstream formatting operations on .toys streams."""


def _parse_tile(_ctx, _param, values):
    out = []
    for v in values:
        try:
            c, r = v.split(",")
            out.append((int(c), int(r)))
        except ValueError:
            raise click.BadParameter(f"tile {v!r} is not COL,ROW") from None
    return out


@format_group.command(name="filter")
@click.argument("stream", type=click.Path(exists=True, dir_okay=False))
@click.option("--keep", multiple=True, required=True, callback=_parse_tile, help="COL,ROW (repeatable)")
@click.option("--poc-range", nargs=2, type=int, default=None)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
def format_filter(stream, keep, poc_range, output):
    """Keep a subset of tiles."""
    try:
        out = filter_tiles(_read_stream(stream), TilePredicate(frozenset(keep), poc_range))
    except (XrPipeError, ValueError) as exc:
        _fail(f"error: {exc}")
    _write_stream(out, output)


@format_group.command(name="insert")
@click.argument("stream", type=click.Path(exists=True, dir_okay=False))
@click.option("--position", type=int, required=True)
@click.option("--poc", type=int, default=0)
@click.option("--dts", type=int, default=0)
@click.option("--pts", type=int, default=None)
@click.option("--size", nargs=2, type=int, default=(0, 0), help="WIDTH HEIGHT")
@click.option("--tile", default="0,0")
@click.option("--payload-hex", default="")
@click.option("--parameter-set", is_flag=True)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
def format_insert(stream, position, poc, dts, pts, size, tile, payload_hex, parameter_set, output):
    """Insert one access unit before POSITION."""
    s = _read_stream(stream)
    (col, row), = _parse_tile(None, None, [tile])
    unit = AccessUnit(s.stream_id, poc, dts, dts if pts is None else pts, size[0], size[1], col, row,
                      bytes.fromhex(payload_hex), parameter_set)
    try:
        out = insert_unit(s, unit, position)
    except XrPipeError as exc:
        _fail(f"error: {exc}")
    _write_stream(out, output)


@format_group.command(name="append")
@click.argument("streams", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
def format_append(streams, output):
    """Concatenate streams in time."""
    try:
        out = append_streams([_read_stream(p) for p in streams])
    except XrPipeError as exc:
        _fail(f"error: {exc}")
    _write_stream(out, output)


@format_group.command(name="stack")
@click.argument("streams", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--cols", type=int, required=True)
@click.option("--rows", type=int, required=True)
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
def format_stack(streams, cols, rows, output):
    """Stack streams into one tiled stream (row-major slots in argument order)."""
    parsed = [_read_stream(p) for p in streams]
    try:
        out = stack_streams(parsed, StackLayout(cols, rows, tuple(s.stream_id for s in parsed)))
    except (XrPipeError, ValueError) as exc:
        _fail(f"error: {exc}")
    _write_stream(out, output)


@main.command()
@click.argument("streams", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--rate", type=str, required=True, help="Arrival rate in bytes per tick (integer or fraction).")
@click.option("--buffer", "buffer_size", type=int, required=True, help="Input buffer size in bytes.")
@click.option("--decode-delay", type=int, default=0)
@click.option("--start", type=int, default=0)
@click.option("--td", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON list (one stream) or {stream_id: list} of explicit decode times.")
@click.option("--format", "fmt", type=click.Choice(["lines", "structured"]), default="lines")
def std(streams, rate, buffer_size, decode_delay, start, td, fmt):
    """Simulate the system target decoder over one or more streams."""
    parsed = [_read_stream(p) for p in streams]
    explicit = _read_json(td) if td else None
    if isinstance(explicit, dict):
        explicit = {int(k): v for k, v in explicit.items()}
    try:
        schedules = [constant_rate_schedule(s, Fraction(rate), start) for s in parsed]
        trace = simulate_std(parsed, schedules, StdConfig(buffer_size, decode_delay, explicit))
    except (XrPipeError, ValueError, ZeroDivisionError) as exc:
        _fail(f"error: {exc}")
    if fmt == "structured":
        click.echo(dumps_structured(trace_report(trace)), nl=False)
    else:
        click.echo("\n".join(trace_lines(trace)))
    sys.exit(0 if trace.verdict.value == "CONFORMANT" else 1)


@main.command(name="make-stream")
@click.option("-o", "--output", required=True, type=click.Path(dir_okay=False))
@click.option("--frames", type=int, required=True)
@click.option("--size", nargs=2, type=int, required=True, help="WIDTH HEIGHT of the full picture")
@click.option("--grid", nargs=2, type=int, default=(1, 1))
@click.option("--fps", type=int, default=30)
@click.option("--payload-bytes", type=int, default=16)
@click.option("--stream-id", type=int, default=0)
@click.option("--tick-rate", type=int, default=90_000)
@click.option("--first-poc", type=int, default=0)
@click.option("--start-time", type=int, default=0)
def make_stream(output, frames, size, grid, fps, payload_bytes, stream_id, tick_rate, first_poc, start_time):
    """Generate a deterministic test stream."""
    try:
        stream = make_test_stream(StreamSpec(frames, size[0], size[1], tuple(grid), fps, payload_bytes,
                                             tick_rate, stream_id, None, first_poc, start_time))
    except (XrPipeError, ValueError) as exc:
        _fail(f"error: {exc}")
    _write_stream(stream, output)


if __name__ == "__main__":
    main()
