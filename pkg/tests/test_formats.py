import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evhta.errors import ParseError
from evhta.events import Event, EventArray, SensorGeometry
from evhta.formats import (
    parse_evh1,
    parse_text_stream,
    read_fhw1,
    read_htf1,
    read_hts1,
    write_evh1,
    write_fhw1,
    write_htf1,
    write_hts1,
    write_text_stream,
)

GEOM = SensorGeometry(width=304, height=240)


class TestTextParse:
    def test_basic_line(self):
        events = parse_text_stream(b"1000,3,4,1\n", GEOM)
        assert list(events) == [Event(3, 4, 1000, 1)]

    def test_empty_file(self):
        assert len(parse_text_stream(b"", GEOM)) == 0

    def test_comments_and_blanks_ignored(self):
        events = parse_text_stream(b"# header\n\n1000,1,2,-1\n", GEOM)
        assert list(events) == [Event(1, 2, 1000, -1)]

    def test_out_of_bounds_x(self):
        with pytest.raises(ParseError, match="999"):
            parse_text_stream(b"500,999,0,1\n", GEOM)

    def test_malformed_line_reports_number(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_text_stream(b"0,0,0,1\n10,0,0,1\n20,zero,0,1\n", GEOM)

    def test_field_count_error(self):
        with pytest.raises(ParseError, match="4 comma-separated"):
            parse_text_stream(b"10,0,0\n", GEOM)

    def test_polarity_conventions(self):
        with pytest.raises(ParseError, match="polarity 0"):
            parse_text_stream(b"10,0,0,0\n", GEOM)
        events = parse_text_stream(b"10,0,0,0\n20,0,0,1\n", GEOM,
                                   polarity_zero_neg=True)
        assert [e.p for e in events] == [-1, 1]
        with pytest.raises(ParseError, match="polarity -1"):
            parse_text_stream(b"10,0,0,-1\n", GEOM, polarity_zero_neg=True)

    def test_decreasing_timestamp_rejected(self):
        data = b"100,0,0,1\n50,1,1,1\n"
        with pytest.raises(ParseError, match="decreasing"):
            parse_text_stream(data, GEOM)
        events = parse_text_stream(data, GEOM, allow_unsorted=True)
        assert [e.t for e in events] == [50, 100]

    def test_negative_timestamp_rejected(self):
        with pytest.raises(ParseError, match="negative"):
            parse_text_stream(b"-5,0,0,1\n", GEOM)

    def test_text_roundtrip(self):
        events = EventArray.from_events(
            [Event(1, 2, 10, 1), Event(3, 4, 20, -1)])
        buf = io.BytesIO()
        write_text_stream(buf, events)
        again = parse_text_stream(buf.getvalue(), GEOM)
        assert list(again) == list(events)


def random_events(rng, n, geometry=GEOM):
    return EventArray.from_arrays(
        np.sort(rng.integers(0, 1_000_000, n).astype(np.uint64)),
        rng.integers(0, geometry.width, n),
        rng.integers(0, geometry.height, n),
        rng.choice(np.array([-1, 1], np.int8), n),
    )


class TestEVH1:
    def test_single_record(self):
        events = EventArray.from_events([Event(1, 2, 50, 1)])
        buf = io.BytesIO()
        write_evh1(buf, events, GEOM)
        parsed, geom = parse_evh1(buf.getvalue())
        assert list(parsed) == [Event(1, 2, 50, 1)]
        assert geom == GEOM

    def test_header_only(self):
        buf = io.BytesIO()
        write_evh1(buf, EventArray.empty(), GEOM)
        assert len(buf.getvalue()) == 16
        parsed, _ = parse_evh1(buf.getvalue())
        assert len(parsed) == 0

    def test_bad_magic(self):
        with pytest.raises(ParseError, match="magic"):
            parse_evh1(b"NOPE" + bytes(12))

    def test_truncated_record(self):
        buf = io.BytesIO()
        write_evh1(buf, EventArray.from_events([Event(1, 2, 50, 1)]), GEOM)
        with pytest.raises(ParseError, match="truncated"):
            parse_evh1(buf.getvalue()[:-5])

    def test_count_mismatch(self):
        buf = io.BytesIO()
        write_evh1(buf, EventArray.from_events([Event(1, 2, 50, 1)]), GEOM)
        raw = buf.getvalue() + buf.getvalue()[16:]  # duplicate the record
        with pytest.raises(ParseError, match="claims 1 records"):
            parse_evh1(raw)

    def test_invalid_polarity_byte(self):
        buf = io.BytesIO()
        write_evh1(buf, EventArray.from_events([Event(1, 2, 50, 1)]), GEOM)
        raw = bytearray(buf.getvalue())
        raw[16 + 12] = 3
        with pytest.raises(ParseError, match="polarity byte 3"):
            parse_evh1(bytes(raw))

    def test_geometry_check(self):
        buf = io.BytesIO()
        write_evh1(buf, EventArray.empty(), GEOM)
        with pytest.raises(ParseError, match="does not match"):
            parse_evh1(buf.getvalue(), SensorGeometry(width=10, height=10))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=500), st.integers(0, 2**32 - 1))
    def test_roundtrip_identity(self, n, seed):
        rng = np.random.default_rng(seed)
        events = random_events(rng, n)
        buf = io.BytesIO()
        write_evh1(buf, events, GEOM)
        parsed, _ = parse_evh1(buf.getvalue())
        buf2 = io.BytesIO()
        write_evh1(buf2, parsed, GEOM)
        assert buf.getvalue() == buf2.getvalue()
        assert np.array_equal(parsed.t, events.t)
        assert np.array_equal(parsed.p, events.p)


class TestHTF1:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 12), st.integers(1, 12),
           st.booleans(), st.integers(0, 2**32 - 1))
    def test_roundtrip_bytes(self, c, h, w, as_float, seed):
        rng = np.random.default_rng(seed)
        if as_float:
            data = rng.standard_normal((c, h, w)).astype(np.float32)
        else:
            data = rng.integers(0, 256, (c, h, w)).astype(np.uint8)
        buf = io.BytesIO()
        write_htf1(buf, data)
        out = read_htf1(buf.getvalue())
        assert out.dtype == data.dtype and np.array_equal(out, data)
        buf2 = io.BytesIO()
        write_htf1(buf2, out)
        assert buf.getvalue() == buf2.getvalue()

    def test_size_mismatch(self):
        buf = io.BytesIO()
        write_htf1(buf, np.zeros((1, 2, 2), np.uint8))
        with pytest.raises(ParseError, match="payload"):
            read_htf1(buf.getvalue()[:-1])

    def test_bad_dtype_code(self):
        raw = bytearray()
        buf = io.BytesIO()
        write_htf1(buf, np.zeros((1, 1, 1), np.uint8))
        raw = bytearray(buf.getvalue())
        raw[16] = 9
        with pytest.raises(ParseError, match="dtype code 9"):
            read_htf1(bytes(raw))

    def test_rejects_other_dtypes(self):
        with pytest.raises(ValueError, match="dtype"):
            write_htf1(io.BytesIO(), np.zeros((1, 1, 1), np.float64))


class TestHTS1:
    def test_roundtrip(self):
        rng = np.random.default_rng(1)
        mp = rng.random((6, 7)).astype(np.float32)
        mn = rng.random((6, 7)).astype(np.float32)
        buf = io.BytesIO()
        write_hts1(buf, mp, mn, 41)
        mp2, mn2, idx = read_hts1(buf.getvalue())
        assert idx == 41
        assert np.array_equal(mp, mp2) and np.array_equal(mn, mn2)

    def test_unset_index(self):
        buf = io.BytesIO()
        write_hts1(buf, np.zeros((2, 2)), np.zeros((2, 2)), None)
        _, _, idx = read_hts1(buf.getvalue())
        assert idx is None


class TestFHW1:
    def test_roundtrip_named_tensors(self):
        rng = np.random.default_rng(2)
        tensors = {
            "a.weight": rng.standard_normal((3, 4)).astype(np.float32),
            "scalar": np.float32(2.5),
            "deep": rng.standard_normal((2, 3, 2, 2)).astype(np.float32),
        }
        buf = io.BytesIO()
        write_fhw1(buf, tensors)
        out = read_fhw1(buf.getvalue())
        assert list(out) == list(tensors)
        for name in tensors:
            assert np.array_equal(out[name], np.asarray(tensors[name]))
        assert out["scalar"].shape == ()

    def test_truncation_detected(self):
        buf = io.BytesIO()
        write_fhw1(buf, {"w": np.ones((4, 4), np.float32)})
        with pytest.raises(ParseError, match="truncated"):
            read_fhw1(buf.getvalue()[:-3])

    def test_bad_magic(self):
        with pytest.raises(ParseError, match="magic"):
            read_fhw1(b"XXXX\x01\x00\x00\x00")
