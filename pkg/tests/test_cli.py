"""Every command, run twice on the same inputs, must print the same bytes."""

import json
import shutil
from pathlib import Path

import pytest
from click.testing import CliRunner

from xrpipe.cli import main
from xrpipe.toy_stream import AccessUnit, CodecProfile, ToyStream, parse_stream, serialize_stream

ROOT = Path(__file__).resolve().parents[1]
SCENES = Path(__file__).parent / "fixtures" / "scenes"


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    for name, args in {
        "a.toys": ["--frames", "6", "--size", "16", "8", "--stream-id", "1"],
        "b.toys": ["--frames", "6", "--size", "16", "8", "--stream-id", "2"],
        "c.toys": ["--frames", "6", "--size", "16", "8", "--stream-id", "3"],
        "d.toys": ["--frames", "6", "--size", "16", "8", "--stream-id", "4"],
        "tiled.toys": ["--frames", "4", "--size", "32", "16", "--grid", "2", "2"],
    }.items():
        res = runner.invoke(main, ["make-stream", "-o", str(d / name), *args])
        assert res.exit_code == 0, res.output
    unit = AccessUnit(0, 0, 0, 3, 8, 8, payload=bytes(100))
    (d / "one.toys").write_bytes(serialize_stream(ToyStream(0, CodecProfile.TOY_BASE, 90000, units=(unit,))))
    (d / "td.json").write_text("[0]")
    for f in ("vpcc_scene.gltf", "vpcc_grouped.json", "vpcc_none.json", "vpcc_updates.json"):
        shutil.copy(ROOT / "scenarios" / f, d / f)
    (d / "patch.json").write_text(json.dumps([{"op": "remove", "path": "/meshes/0/primitives/0/attributes/_OCCUPANCY"}]))
    (d / "bad_patch.json").write_text(json.dumps([{"op": "remove", "path": "/nodes/0"}]))
    return d


def invoke(args):
    res = CliRunner().invoke(main, [str(a) for a in args])
    return res.exit_code, res.stdout


def twice(args, outputs=()):
    """Run twice; return (exit code, stdout, output file bytes) after checking they agree."""
    runs = []
    for _ in range(2):
        code, out = invoke(args)
        runs.append((code, out, [Path(p).read_bytes() for p in outputs]))
    assert runs[0] == runs[1]
    return runs[0]


def test_make_stream(ws):
    out = ws / "gen.toys"
    code, text, (data,) = twice(["make-stream", "-o", out, "--frames", "3", "--size", "16", "16", "--grid", "2", "1"],
                                [out])
    assert code == 0
    summary = json.loads(text)
    assert summary["units"] == 6 and summary["grid"] == [2, 1]
    assert parse_stream(data).pocs() == [0, 1, 2]


def test_make_stream_rejects_bad_size(ws):
    code, _ = invoke(["make-stream", "-o", ws / "x.toys", "--frames", "2", "--size", "15", "8", "--grid", "2", "1"])
    assert code == 1


@pytest.mark.parametrize("fixture,code", [("valid/vpcc_components.gltf", 0), ("invalid/node_self_cycle.gltf", 1),
                                          ("invalid/not_json.gltf", 1), ("valid/shared_child_dag.gltf", 0)])
@pytest.mark.parametrize("fmt", ["text", "structured"])
def test_validate(fixture, code, fmt):
    got, out, _ = twice(["validate", SCENES / fixture, "--warnings", "--format", fmt])
    assert got == code
    if fmt == "structured":
        assert json.loads(out)["valid"] is (code == 0)
    else:
        assert out.splitlines()[-1].startswith("VALID" if code == 0 else "INVALID")


def test_patch(ws):
    out = ws / "patched.gltf"
    code, _, (data,) = twice(["patch", ws / "vpcc_scene.gltf", ws / "patch.json", "-o", out], [out])
    assert code == 0
    assert "_OCCUPANCY" not in json.loads(data)["meshes"][0]["primitives"][0]["attributes"]
    code, text, _ = twice(["patch", ws / "vpcc_scene.gltf", ws / "bad_patch.json"])
    assert code == 1
    assert json.loads(text)["reports"][0]["reason"] == "ResultInvalid"


def test_patch_timed(ws):
    code, text, _ = twice(["patch", ws / "vpcc_scene.gltf", ws / "vpcc_updates.json", "-t", "30000"])
    assert code == 0
    assert "_OCCUPANCY" not in text


@pytest.mark.parametrize("scenario", ["vpcc_none.json", "vpcc_grouped.json"])
@pytest.mark.parametrize("fmt", ["text", "structured"])
def test_run(ws, scenario, fmt):
    code, text, _ = twice(["run", ws / scenario, "--format", fmt])
    assert code == 0
    skew = 0 if "grouped" in scenario else 10
    assert f'"max_poc_skew": {skew}' in text if fmt == "structured" else text.endswith(f"max_poc_skew={skew}\n")


def test_run_with_updates_threads_and_report_file(ws):
    report = ws / "report.json"
    args = ["run", ws / "vpcc_grouped.json", "--updates", ws / "vpcc_updates.json", "--report", report]
    code, text, (one,) = twice([*args, "--threads", "1"], [report])
    assert code == 0 and text == ""
    _, _, (two,) = twice([*args, "--threads", "2"], [report])
    assert one == two
    updates = json.loads(one)["updates"]
    assert [u["applied"] for u in updates] == [True, False]


def test_run_missing_media(ws):
    data = json.loads((ws / "vpcc_none.json").read_text())
    del data["streams"]["texture"]
    (ws / "missing.json").write_text(json.dumps(data))
    code, _ = invoke(["run", ws / "missing.json"])
    assert code == 1


def test_format_filter(ws):
    out = ws / "left.toys"
    code, text, (data,) = twice(["format", "filter", ws / "tiled.toys", "--keep", "0,0", "--keep", "0,1",
                                 "-o", out], [out])
    assert code == 0
    assert json.loads(text)["grid"] == [1, 2]
    assert {u.tile for u in parse_stream(data).units} == {(0, 0), (0, 1)}
    assert invoke(["format", "filter", ws / "tiled.toys", "--keep", "5,5", "-o", out])[0] == 1


def test_format_insert(ws):
    out = ws / "ins.toys"
    code, text, (data,) = twice(["format", "insert", ws / "a.toys", "--position", "0", "--parameter-set",
                                 "--payload-hex", "abcd", "-o", out], [out])
    assert code == 0
    first = parse_stream(data).units[0]
    assert first.is_parameter_set and first.payload == b"\xab\xcd"
    assert invoke(["format", "insert", ws / "a.toys", "--position", "99", "-o", out])[0] == 1


def test_format_append(ws):
    out = ws / "ab.toys"
    code, text, (data,) = twice(["format", "append", ws / "a.toys", ws / "b.toys", "-o", out], [out])
    assert code == 0
    assert parse_stream(data).pocs() == list(range(12))


def test_format_stack(ws):
    out = ws / "abcd.toys"
    srcs = [ws / f"{c}.toys" for c in "abcd"]
    code, text, (data,) = twice(["format", "stack", *srcs, "--cols", "2", "--rows", "2", "-o", out], [out])
    assert code == 0
    assert json.loads(text)["grid"] == [2, 2]
    assert invoke(["format", "stack", *srcs, "--cols", "3", "--rows", "1", "-o", out])[0] == 1


@pytest.mark.parametrize("args,code,verdict", [
    (["--rate", "100", "--buffer", "200", "--decode-delay", "1"], 0, "CONFORMANT"),
    (["--rate", "100", "--buffer", "50", "--decode-delay", "1"], 1, "OVERFLOW"),
    (["--rate", "50", "--buffer", "200", "--td", "TD"], 1, "UNDERFLOW"),
])
@pytest.mark.parametrize("fmt", ["lines", "structured"])
def test_std(ws, args, code, verdict, fmt):
    args = [str(ws / "td.json") if a == "TD" else a for a in args]
    got, text, _ = twice(["std", ws / "one.toys", *args, "--format", fmt])
    assert got == code
    if fmt == "lines":
        assert text.splitlines()[-1] == f"VERDICT {verdict}"
    else:
        assert json.loads(text)["verdict"] == verdict


def test_std_multi_stream(ws):
    code, text, _ = twice(["std", ws / "a.toys", ws / "b.toys", "--rate", "3/2", "--buffer", "4096",
                           "--decode-delay", "3000", "--format", "structured"])
    assert code == 0
    assert sorted(json.loads(text)["streams"]) == ["1", "2"]
