import io
import logging

import pytest
from hypothesis import given, strategies as st

from gmphd_ogm.geometry import BoundingBox
from gmphd_ogm.motio import (
    MotParseError, Observation, SequenceMeta, parse_detections, parse_ground_truth,
    parse_results, parse_seqinfo, write_detections, write_ground_truth, write_results,
)


def test_detection_row():
    det = parse_detections("1,-1,10,20,30,40,0.9,-1,-1,-1\n")
    (obs,) = det[1]
    assert obs.box == BoundingBox(10, 20, 30, 40) and obs.confidence == 0.9
    assert det[2] == []


def test_empty_stream():
    assert dict(parse_detections("")) == {}


def test_crlf_and_blank_lines():
    det = parse_detections("1,-1,1,2,3,4,0.5\r\n\r\n2,-1,1,2,3,4,0.5\r\n")
    assert sorted(det) == [1, 2]


def test_malformed_rows_name_their_line():
    with pytest.raises(MotParseError, match="line 1"):
        parse_detections("1,-1,10,20,abc,40,0.9,-1,-1,-1\n")
    with pytest.raises(MotParseError, match="line 2"):
        parse_detections("1,-1,10,20,30,40,0.9\n1,-1,10\n")
    with pytest.raises(MotParseError):
        parse_detections("0,-1,10,20,30,40,0.9\n")


def test_degenerate_detections_dropped_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        det = parse_detections("1,-1,0,0,0,10,1\n1,-1,0,0,5,5,1\n")
    assert len(det[1]) == 1
    assert "dropped 1" in caplog.text


def test_confidence_floor():
    det = parse_detections("1,-1,0,0,5,5,0.2\n1,-1,0,0,5,5,0.8\n", conf_floor=0.5)
    assert [o.confidence for o in det[1]] == [0.8]


def test_ground_truth_rows():
    gt = parse_ground_truth("5,3,0,0,50,100,1,1,1.0\n5,4,0,0,50,100,0,1,1.0\n5,6,0,0,5,5,1,7,1\n")
    by_id = {e.id: e for e in gt[5]}
    assert by_id[3].considered and by_id[3].box == BoundingBox(0, 0, 50, 100)
    assert not by_id[4].considered
    assert not by_id[6].considered
    legacy = parse_ground_truth("1,1,0,0,5,5,1,-1,-1,-1\n")
    assert legacy[1][0].considered
    with pytest.raises(MotParseError, match="duplicate"):
        parse_ground_truth("5,3,0,0,50,100,1,1,1\n5,3,1,1,50,100,1,1,1\n")


def test_write_results_format():
    buf = io.StringIO()
    rows = write_results({1: [(2, BoundingBox(1, 2, 3, 4)), (1, BoundingBox(10, 20, 30, 40))]}, buf)
    assert rows == 2
    assert buf.getvalue().splitlines() == [
        "1,1,10.00,20.00,30.00,40.00,-1,-1,-1,-1",
        "1,2,1.00,2.00,3.00,4.00,-1,-1,-1,-1",
    ]
    assert write_results({}, io.StringIO()) == 0


coord = st.floats(-1000, 1000, allow_nan=False).map(lambda v: round(v, 2))
size = st.floats(0.5, 500, allow_nan=False).map(lambda v: round(v, 2))
tracks = st.dictionaries(
    st.integers(1, 50),
    st.lists(st.tuples(st.integers(1, 20), st.builds(BoundingBox, coord, coord, size, size)),
             unique_by=lambda t: t[0], max_size=4),
)


@given(tracks)
def test_results_round_trip(data):
    buf = io.StringIO()
    write_results(data, buf)
    back = parse_results(buf.getvalue())
    again = io.StringIO()
    write_results(back, again)
    assert again.getvalue() == buf.getvalue()
    for frame, items in data.items():
        got = dict(back.get(frame, []))
        for tid, box in items:
            for x, y in zip(got[tid].as_tuple(), box.as_tuple()):
                assert abs(x - y) <= 0.005 + 1e-9


def test_detection_and_truth_writers_round_trip():
    det = {2: [Observation(2, BoundingBox(1, 2, 3, 4), 0.75)]}
    buf = io.StringIO()
    write_detections(det, buf)
    assert parse_detections(buf.getvalue())[2] == det[2]
    gt = parse_ground_truth("1,1,0,0,5,5,1,1,1\n1,2,0,0,5,5,0,1,1\n")
    buf = io.StringIO()
    write_ground_truth(gt, buf)
    assert parse_ground_truth(buf.getvalue()) == gt


def test_seqinfo():
    meta = parse_seqinfo("[Sequence]\nname=PETS09-S2L1\nimDir=img1\nframeRate=7\n"
                         "seqLength=795\nimWidth=768\nimHeight=576\nimExt=.jpg\n")
    assert meta == SequenceMeta("PETS09-S2L1", 7.0, 768, 576, 795)
    with pytest.raises(MotParseError):
        parse_seqinfo("name=x\nframeRate=7\n")
    with pytest.raises(ValueError):
        SequenceMeta("x", 7.0, 0, 1, 1)
