import copy
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from strategies import streams as stream_strategy
from xrpipe.std_model import (
    ArrivalSchedule,
    StdConfig,
    Verdict,
    check_cdm_rules,
    constant_rate_schedule,
    simulate_std,
    trace_lines,
    trace_report,
)
from xrpipe.toy_stream import AccessUnit, CodecProfile, ToyStream, make_test_stream


def one_unit(size=100, pts=3, sid=0):
    return ToyStream(sid, CodecProfile.TOY_BASE, 90000, units=(AccessUnit(sid, 0, 0, pts, 8, 8, payload=bytes(size)),))


# hand-traced fixtures

def conformant_fixture():
    s = one_unit()
    return [s], [constant_rate_schedule(s, 100, 0)], StdConfig(200, decode_delay=1)


def overflow_fixture():
    s = one_unit()
    return [s], [constant_rate_schedule(s, 100, 0)], StdConfig(50, decode_delay=1)


def underflow_fixture():
    s = one_unit()
    return [s], [constant_rate_schedule(s, 50, 0)], StdConfig(200, explicit_td=[0])


def test_conformant_hand_trace():
    trace = simulate_std(*conformant_fixture())
    assert trace.verdict is Verdict.CONFORMANT
    assert trace_lines(trace) == [
        "EVENT kind=arrival stream=0 time=0 bytes=100",
        "EVENT kind=decode stream=0 time=1 j=0",
        "EVENT kind=present stream=0 time=3 k=0",
        "VERDICT CONFORMANT",
    ]
    st_ = trace.streams[0]
    assert st_.occupancy == [(0, 100), (1, 0)]
    assert st_.peak_occupancy == 100 and st_.final_occupancy == 0


def test_overflow_hand_trace():
    trace = simulate_std(*overflow_fixture())
    assert trace.verdict is Verdict.OVERFLOW
    assert trace.failure == {"stream": 0, "time": 0, "occupancy": 100, "buffer_size": 50}
    assert trace_lines(trace)[:3] == [
        "EVENT kind=arrival stream=0 time=0 bytes=100",
        "EVENT kind=decode stream=0 time=1 j=0",
        "EVENT kind=present stream=0 time=3 k=0",
    ]


def test_underflow_hand_trace():
    trace = simulate_std(*underflow_fixture())
    assert trace.verdict is Verdict.UNDERFLOW
    assert trace.failure["j"] == 0 and trace.failure["last_byte_arrival"] == 1
    assert trace_lines(trace) == [
        "EVENT kind=arrival stream=0 time=0 bytes=50",
        "EVENT kind=decode stream=0 time=0 j=0",
        "EVENT kind=arrival stream=0 time=1 bytes=50",
        "EVENT kind=present stream=0 time=3 k=0",
        "VERDICT UNDERFLOW",
    ]


def test_two_unit_trace_ordering_and_reordered_presentation():
    # unit 1 is presented before unit 0 (B-picture style reordering)
    s = ToyStream(4, CodecProfile.TOY_BASE, 90000, units=(
        AccessUnit(4, 1, 0, 20, 8, 8, payload=bytes(3)),
        AccessUnit(4, 0, 5, 10, 8, 8, payload=bytes(2)),
    ))
    trace = simulate_std([s], [ArrivalSchedule(4, [(0, 0), (1, 1), (2, 2), (3, 4), (4, 5)])],
                         StdConfig(10, decode_delay=2))
    assert trace.verdict is Verdict.CONFORMANT
    assert trace_lines(trace) == [
        "EVENT kind=arrival stream=4 time=0 bytes=1",
        "EVENT kind=arrival stream=4 time=1 bytes=1",
        "EVENT kind=arrival stream=4 time=2 bytes=1",
        "EVENT kind=arrival stream=4 time=4 bytes=1",
        "EVENT kind=decode stream=4 time=4 j=0",
        "EVENT kind=arrival stream=4 time=5 bytes=1",
        "EVENT kind=decode stream=4 time=7 j=1",
        "EVENT kind=present stream=4 time=10 k=0",
        "EVENT kind=present stream=4 time=20 k=1",
        "VERDICT CONFORMANT",
    ]
    assert [(p.k, p.j) for p in trace.streams[4].presentations] == [(0, 1), (1, 0)]


def test_arrival_before_decode_at_same_tick():
    s = one_unit(size=4)
    trace = simulate_std([s], [ArrivalSchedule(0, [(0, 0), (3, 2)])], StdConfig(4, explicit_td=[2]))
    assert trace.verdict is Verdict.CONFORMANT
    assert trace.streams[0].occupancy == [(0, 1), (2, 4), (2, 0)]


def test_constant_rate_schedule_examples():
    s = one_unit(size=6)
    assert [t for _, t in constant_rate_schedule(s, 1, 0).entries] == list(range(6))
    assert constant_rate_schedule(s, 2, 10).arrival_time(5) == 12
    assert constant_rate_schedule(ToyStream(0, CodecProfile.TOY_BASE, 1), 3, 0).entries == ()
    assert constant_rate_schedule(s, Fraction(1, 3), 0).arrival_time(4) == 12
    with pytest.raises(ValueError):
        constant_rate_schedule(s, 0, 0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        ArrivalSchedule(0, [(1, 0), (1, 1)])
    with pytest.raises(ValueError):
        ArrivalSchedule(0, [(0, 5), (1, 4)])


def test_multi_stream_buffers_are_independent():
    a, b = one_unit(100, sid=0), one_unit(30, sid=1)
    trace = simulate_std([a, b], [constant_rate_schedule(a, 100, 0), constant_rate_schedule(b, 10, 0)],
                         StdConfig({0: 100, 1: 40}, decode_delay=1))
    assert trace.verdict is Verdict.CONFORMANT
    assert trace.streams[1].decodes[0].td == 3
    assert check_cdm_rules(trace, [a, b]) == []
    with pytest.raises(ValueError):
        simulate_std([a, b], [constant_rate_schedule(a, 1, 0), constant_rate_schedule(b, 1, 0)],
                     StdConfig(100, explicit_td=[0]))


def test_cdm_rules_clean_on_fixtures():
    for fixture in (conformant_fixture, overflow_fixture, underflow_fixture):
        streams, schedules, config = fixture()
        assert check_cdm_rules(simulate_std(streams, schedules, config), streams) == []


def seeded_violations():
    streams, schedules, config = conformant_fixture()
    base = simulate_std(streams, schedules, config)
    two_decoders = copy.deepcopy(base)
    two_decoders.streams[0].decodes.append(copy.copy(two_decoders.streams[0].decodes[0]))
    two_decoders.streams[0].decodes[-1].decoder = 9
    two_decoders.streams[0].presentations.append(copy.copy(two_decoders.streams[0].presentations[0]))
    two_decoders.streams[0].presentations[-1].j = 1
    missing = copy.deepcopy(base)
    missing.streams[0].presentations.clear()
    shifted = copy.deepcopy(base)
    shifted.streams[0].presentations[0].tp += 1
    return streams, {"i": two_decoders, "ii": missing, "iii": shifted}


@pytest.mark.parametrize("rule", ["i", "ii", "iii"])
def test_cdm_rules_flag_seeded_violation(rule):
    streams, traces = seeded_violations()
    found = {v.rule for v in check_cdm_rules(traces[rule], streams)}
    assert rule in found


def test_trace_report_is_stable():
    r1 = trace_report(simulate_std(*conformant_fixture()))
    r2 = trace_report(simulate_std(*conformant_fixture()))
    assert r1 == r2
    assert r1["verdict"] == "CONFORMANT"
    assert r1["streams"]["0"]["occupancy"] == [[0, 100], [1, 0]]


@given(stream_strategy(), st.integers(1, 64), st.integers(0, 20), st.integers(1, 400))
def test_conservation_and_rules(stream, rate, delay, size):
    trace = simulate_std([stream], [constant_rate_schedule(stream, rate, 0)], StdConfig(size, decode_delay=delay))
    st_ = trace.streams[stream.stream_id]
    assert st_.bytes_in == st_.bytes_out + st_.final_occupancy
    assert st_.final_occupancy == 0
    assert check_cdm_rules(trace, [stream]) == []
    times = [t for t, _ in st_.occupancy]
    assert times == sorted(times)
    if trace.verdict is Verdict.CONFORMANT:
        assert all(0 <= b <= size for _, b in st_.occupancy)
    # with default decode times nothing decodes early
    assert trace.verdict is not Verdict.UNDERFLOW
    assert simulate_std([stream], [constant_rate_schedule(stream, rate, 0)],
                        StdConfig(size, decode_delay=delay)) == trace


def test_generated_stream_overflows_small_buffer():
    s = make_test_stream({"frames": 3, "width": 4, "height": 4, "payload_bytes_per_frame": 30})
    trace = simulate_std([s], [constant_rate_schedule(s, 1, 0)], StdConfig(20))
    assert trace.verdict is Verdict.OVERFLOW
    assert trace.failure["time"] == 20
