from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dailylog.errors import DecodeError, EmptyStream, InvalidInput, SchemaError
from dailylog.ingest import (
    AudioChunk, CivilTimestamp, GeoFix, PhysioSnapshot, SensorRecord, make_record, parse_stream,
    serialize_stream, to_civil_time, window_align,
)


def _line(ts, modality, payload):
    return json.dumps({"unix_ts": ts, "modality": modality, "payload": payload})


@pytest.mark.parametrize("ts,off,text", [
    (0, 0, "1970-01-01 00:00:00 +00:00"),
    (1700000000, 0, "2023-11-14 22:13:20 +00:00"),
    (0, -300, "1969-12-31 19:00:00 -05:00"),
    (1700000000.9, 330, "2023-11-15 03:43:20 +05:30"),
])
def test_civil_time_examples(ts, off, text):
    c = to_civil_time(ts, off)
    assert str(c) == text
    assert CivilTimestamp.parse(text) == c


@settings(max_examples=300)
@given(st.integers(0, 4_000_000_000), st.integers(-720, 840))
def test_civil_time_round_trip(ts, off):
    c = to_civil_time(ts, off)
    assert c.to_unix() == ts
    # independent oracle: stdlib datetime arithmetic on the fixed offset
    ref = datetime(1970, 1, 1, tzinfo=timezone.utc) + timedelta(seconds=ts)
    ref = ref.astimezone(timezone(timedelta(minutes=off)))
    assert (c.year, c.month, c.day, c.hour, c.minute, c.second) == (
        ref.year, ref.month, ref.day, ref.hour, ref.minute, ref.second)


def test_parse_jsonl_and_line_numbers():
    raw = "\n".join([
        _line(0, "imu_accel", [0.1, 0.2, 9.8]),
        _line(1, "gps", [43.7, -72.3]),
        _line(2, "gps", [91.0, 0.0]),
    ]).encode()
    with pytest.raises(SchemaError) as exc:
        parse_stream(raw)
    assert exc.value.line == 3
    assert "lat" in str(exc.value)


def test_csv_latitude_bound():
    raw = b"unix_ts,modality,p0,p1\n0,gps,91,0\n"
    with pytest.raises(SchemaError) as exc:
        parse_stream(raw, "csv")
    assert exc.value.line == 2 and "lat" in str(exc.value).lower()


@pytest.mark.parametrize("raw", [
    b'{"unix_ts": 0, "modality": "light"}',
    b'{"unix_ts": 0, "modality": "nose", "payload": [1]}',
    b'{"unix_ts": -1, "modality": "light", "payload": [1]}',
    b"[1, 2]",
    b"{not json",
    b'{"unix_ts": 0, "modality": "bluetooth", "payload": ["zz:zz"]}',
    b'{"unix_ts": 0, "modality": "physio", "payload": {"hr_bpm": -3}}',
])
def test_schema_errors(raw):
    with pytest.raises(SchemaError):
        parse_stream(raw)


def test_decode_error():
    with pytest.raises(DecodeError):
        parse_stream(b"\xff\xfe\x00")


def test_physio_keeps_latest():
    raw = "\n".join([
        _line(5, "physio", {"hr_bpm": 70}),
        _line(50, "physio", {"hr_bpm": 72}),
        _line(0, "imu_accel", [0, 0, 9.8]),
    ]).encode()
    (w,) = window_align(parse_stream(raw), 120)
    assert w.physio.hr_bpm == 72
    assert w.record_count == 2


def test_floor_assignment():
    recs = [make_record(0, "light", [1.0]), make_record(120, "light", [3.0])]
    ws = window_align(recs, 120)
    assert [w.start_unix_ts for w in ws] == [0, 120]
    assert ws[0].light_lux == 1.0 and ws[1].light_lux == 3.0


def test_windows_anchor_at_earliest_and_keep_gaps():
    recs = [make_record(t, "light", [float(t)]) for t in (1000, 1001, 1400)]
    ws = window_align(recs, 120)
    assert [w.start_unix_ts for w in ws] == [1000, 1120, 1240, 1360]
    assert ws[1].record_count == 0 and ws[1].light_lux is None


def test_duplicates_keep_last_and_sort_is_stable():
    recs = [make_record(3, "light", [5.0]), make_record(1, "light", [1.0]), make_record(3, "light", [7.0])]
    (w,) = window_align(recs, 60)
    assert w.light_lux == pytest.approx(4.0)  # mean of 1 and the last 3-second reading, 7
    assert w.record_count == 2


def test_gps_carried_forward_and_radio_union():
    recs = [
        make_record(0, "gps", [10.0, 20.0]),
        make_record(1, "wifi", {"ssids": ["b", "a"]}),
        make_record(2, "wifi", ["a", "c"]),
        make_record(3, "bluetooth", ["AA:BB:CC:DD:EE:FF"]),
        make_record(130, "light", [1.0]),
    ]
    w0, w1 = window_align(recs, 120)
    assert w0.geo.wifi_ssids == ("a", "b", "c")
    assert w0.geo.bt_macs == ("AA:BB:CC:DD:EE:FF",)
    assert (w1.geo.lat, w1.geo.lon) == (10.0, 20.0) and w1.geo.wifi_ssids == ()


def test_imu_rate_estimated_and_audio_concatenated():
    recs = [make_record(i / 50, "imu_accel", [0, 0, 9.8 + i]) for i in range(100)]
    recs += [make_record(0, "audio", [8000, 0.1, 0.2]), make_record(1, "audio", {"sample_rate_hz": 8000, "samples": [0.3]})]
    (w,) = window_align(recs, 120)
    assert w.imu["imu_accel"].sample_rate_hz == pytest.approx(50.0)
    assert list(w.audio.samples) == [0.1, 0.2, 0.3]


def test_window_errors():
    with pytest.raises(EmptyStream):
        window_align([], 120)
    with pytest.raises(InvalidInput):
        window_align([make_record(0, "light", [1.0])], 0)


def test_value_types_validate():
    with pytest.raises(InvalidInput):
        GeoFix(0.0, 181.0)
    with pytest.raises(InvalidInput):
        PhysioSnapshot(spo2_percent=101.0)
    with pytest.raises(InvalidInput):
        SensorRecord(0.0, "smell", None)


# ---------------------------------------------------------------------------
# round trip

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
ts = st.one_of(st.integers(0, 2_000_000_000), st.floats(0, 2e9, allow_nan=False))
ssid = st.text(st.characters(min_codepoint=97, max_codepoint=122), min_size=1, max_size=8)
mac = st.lists(st.integers(0, 255), min_size=6, max_size=6).map(lambda b: ":".join(f"{v:02X}" for v in b))

records = st.one_of(
    st.builds(lambda t, v: make_record(t, "imu_gyro", v), ts, st.lists(finite, min_size=3, max_size=3)),
    st.builds(lambda t, v: make_record(t, "light", [v]), ts, st.floats(0, 1e5)),
    st.builds(lambda t, v: make_record(t, "barometer", [v]), ts, st.floats(1, 1100)),
    st.builds(lambda t, la, lo: make_record(t, "gps", [la, lo]), ts, st.floats(-90, 90), st.floats(-180, 180)),
    st.builds(lambda t, v: make_record(t, "wifi", v), ts, st.lists(ssid, max_size=3)),
    st.builds(lambda t, v: make_record(t, "bluetooth", v), ts, st.lists(mac, max_size=2)),
    st.builds(lambda t, hr, sp: SensorRecord(float(t), "physio", PhysioSnapshot(hr_bpm=hr, spo2_percent=sp)),
              ts, st.floats(30, 200), st.one_of(st.none(), st.floats(50, 100))),
    st.builds(lambda t, s: SensorRecord(float(t), "audio", AudioChunk(8000.0, tuple(s))),
              ts, st.lists(st.floats(-1, 1), min_size=1, max_size=5)),
)


def _key(r):
    p = r.payload
    if isinstance(p, AudioChunk):
        p = (p.sample_rate_hz, tuple(p.samples))
    elif isinstance(p, PhysioSnapshot):
        p = tuple(sorted(p.to_dict().items()))
    else:
        p = tuple(p)
    return (float(r.unix_ts), r.modality, p)


@settings(max_examples=150)
@given(st.lists(records, max_size=12), st.sampled_from(["jsonl", "csv"]))
def test_parse_serialize_identity(recs, fmt):
    back = parse_stream(serialize_stream(recs, fmt), fmt)
    assert [_key(r) for r in back] == [_key(r) for r in recs]


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(0, 2000), st.sampled_from(["light", "physio", "imu_accel"])), min_size=1,
                max_size=40), st.sampled_from([30, 60, 120]))
def test_window_partition_counts(items, window_s):
    recs = []
    for t, mod in items:
        payload = {"hr_bpm": 60 + t % 10} if mod == "physio" else ([1.0] if mod == "light" else [0, 0, 1])
        recs.append(make_record(t, mod, payload))
    windows = window_align(recs, window_s)
    unique = {(float(r.unix_ts), r.modality) for r in recs}
    t0 = min(t for t, _ in unique)
    superseded = 0
    for k in range(len(windows)):
        n_physio = sum(1 for t, m in unique if m == "physio" and int((t - t0) // window_s) == k)
        superseded += max(n_physio - 1, 0)
    assert sum(w.record_count for w in windows) == len(unique) - superseded
