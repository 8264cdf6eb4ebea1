import json
import random

import oracles
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcom import toolbox as tb
from semcom.dataset import BBox, ScenarioSpec, clip_from_dict, dump_clip, generate_synthetic_clip
from semcom.synth import random_scenario

TABLE_ORDER = [
    "Object Detection",
    "Vehicle Detection",
    "License Plate Detection",
    "Traffic Sign Detection",
    "Vehicle Motion Detection",
    "Lane Number Detection",
    "Traffic Flow Estimation",
    "Vehicle Density Estimation",
]


def make_clip(frames, road_area=1000.0):
    """Clip from a list of per-frame vehicle lists [(track, (x, y, w, h)), ...]."""
    doc = {
        "clip_id": "t",
        "fps": 30,
        "frame_count": len(frames),
        "compressed_size_bytes": 1,
        "road_area_px": road_area,
        "frames": [
            {
                "frame_id": i,
                "size_bytes": 10,
                "vehicles": [
                    {"track_id": tid, "color": "white", "vtype": "sedan", "bbox": list(box)} for tid, box in vehicles
                ],
                "plates": [],
                "objects": [],
                "signs": [],
                "lane_count": 3,
            }
            for i, vehicles in enumerate(frames)
        ],
    }
    return clip_from_dict(doc)


def test_registry_order_and_size(tools):
    assert [t.name for t in tools] == TABLE_ORDER
    assert [t.index for t in tools] == list(range(1, 9))


def test_descriptions_have_three_parts(tools):
    for tool in tools:
        text = tool.describe()
        assert tool.name in text
        assert tool.output_example in text
        json.dumps(tool.to_dict())


def test_label_sets(tools):
    by_name = {t.name: t for t in tools}
    assert len(by_name["Object Detection"].labels) == 80
    assert "car" in by_name["Object Detection"].labels
    assert "SUV" in by_name["Vehicle Detection"].labels
    assert by_name["Traffic Sign Detection"].labels == {"Traffic Sign"}
    assert by_name["Vehicle Motion Detection"].labels == {"accident", "collision"}
    assert not by_name["Lane Number Detection"].labels


def test_unknown_tool():
    with pytest.raises(tb.UnknownToolError):
        tb.get_tool("Weather Detection")
    with pytest.raises(tb.UnknownToolError):
        tb.run_annotation_lookup("Object Detection", make_clip([[]]), [0])


def test_unknown_frame():
    with pytest.raises(tb.UnknownFrameError):
        tb.execute("Vehicle Density Estimation", make_clip([[]]), [1])


def test_object_detection_sorted_and_formatted(clips):
    result = tb.run_object_detection(clips["c03"], [60, 90])
    for fid, found in result.per_frame.items():
        confs = [c for c, _ in found]
        assert confs == sorted(confs, reverse=True)
    assert "(0.91, 'motorcycle')" in result.summary
    assert result.summary.startswith("60: [")


def test_lane_summary_format(clips):
    result = tb.execute("Lane Number Detection", clips["c04"], [0, 50, 100])
    assert result.summary == "number of lanes : [3]"


def test_plate_lookup(clips, raw_clips):
    doc = raw_clips["c01"]
    fid = next(i for i, f in enumerate(doc["frames"]) if f["plates"])
    result = tb.execute("License Plate Detection", clips["c01"], [fid])
    assert result.per_frame[fid] == doc["frames"][fid]["plates"]
    assert repr(doc["frames"][fid]["plates"][0]) in result.summary


def test_plate_example_shape():
    doc = json.loads(dump_clip(make_clip([[(1, (0, 0, 10, 10))]])))
    doc["frames"][0]["plates"] = [list("BC54950")]
    result = tb.execute("License Plate Detection", clip_from_dict(doc), [0])
    assert result.summary == "0: ['B', 'C', '5', '4', '9', '5', '0']"


def test_motion_equal_areas_not_moving():
    clip = make_clip([[(1, (0, 0, 10, 100))], [(1, (5, 0, 10, 100))]])
    result = tb.run_vehicle_motion_detection(clip, [0, 1])
    assert result.details["track_states"] == {1: "not moving"}
    assert result.summary == "[not moving]"


def test_motion_growth_is_moving_both_ways():
    grow = make_clip([[(1, (0, 0, 10, 100))], [(1, (0, 0, 15, 100))]])
    shrink = make_clip([[(1, (0, 0, 15, 100))], [(1, (0, 0, 10, 100))]])
    assert tb.run_vehicle_motion_detection(grow, [0, 1]).details["track_states"][1] == "moving"
    assert tb.run_vehicle_motion_detection(shrink, [0, 1]).details["track_states"][1] == "moving"


def test_motion_track_missing_from_endpoint_is_moving():
    clip = make_clip([[(1, (0, 0, 10, 10))], [(1, (0, 0, 10, 10)), (2, (0, 0, 5, 5))], [(1, (0, 0, 10, 10))]])
    states = tb.run_vehicle_motion_detection(clip, [0, 1, 2]).details["track_states"]
    assert states == {1: "not moving", 2: "moving"}


def test_motion_needs_two_frames_and_tau_above_one():
    clip = make_clip([[(1, (0, 0, 10, 10))], [(1, (0, 0, 10, 10))]])
    with pytest.raises(tb.ToolError):
        tb.run_vehicle_motion_detection(clip, [0])
    with pytest.raises(tb.ToolError):
        tb.run_vehicle_motion_detection(clip, [0, 1], tau=1.0)


def test_motion_threshold_boundary():
    assert tb.motion_state(1000, 1150) == "not moving"
    assert tb.motion_state(1000, 1151) == "moving"


@given(a=st.floats(1, 1e6), b=st.floats(1, 1e6), tau=st.floats(1.01, 3))
def test_motion_state_symmetric(a, b, tau):
    assert tb.motion_state(a, b, tau) == tb.motion_state(b, a, tau)


def test_flow_counts_distinct_tracks():
    clip = make_clip([[(3, (0, 0, 1, 1)), (7, (0, 0, 1, 1))], [(7, (0, 0, 1, 1)), (9, (0, 0, 1, 1))]])
    result = tb.run_traffic_flow_estimation(clip, [0, 1])
    assert result.details["total"] == 3
    assert result.summary == "Total vehicle number: 3"


def test_density_example_and_clamp():
    clip = make_clip([[(1, (0, 0, 23, 10))], [(1, (0, 0, 100, 20))]])
    assert tb.vehicle_density(clip, 0) == 0.23
    assert tb.vehicle_density(clip, 1) == 1.0


@given(
    boxes=st.lists(st.tuples(st.floats(0.5, 500), st.floats(0.5, 500)), max_size=12),
    road=st.floats(1, 1e6),
)
@settings(max_examples=300)
def test_density_in_unit_interval(boxes, road):
    clip = make_clip([[(i, (0, 0, w, h)) for i, (w, h) in enumerate(boxes)]], road)
    assert 0.0 <= tb.vehicle_density(clip, 0) <= 1.0


def test_matched_frames_for_motion_proxy(clips):
    result = tb.execute("Vehicle Motion Detection", clips["c01"], list(range(0, 450, 15)))
    matched = result.matched_frame_ids("accident")
    assert matched
    assert all(200 <= fid <= 449 for fid in matched)


def test_label_index_first_tool_wins(tools):
    index = tb.label_index(tools)
    assert index[("car",)] == ("Object Detection", "car")
    assert index[("traffic", "sign")] == ("Traffic Sign Detection", "Traffic Sign")
    assert index[("accident",)] == ("Vehicle Motion Detection", "accident")


# --- oracle agreement ---------------------------------------------------------

def check_against_oracles(doc, clip, fids):
    assert tb.run_traffic_flow_estimation(clip, fids).details["total"] == oracles.flow(doc, fids)
    dens = tb.run_vehicle_density_estimation(clip, fids).per_frame
    assert dens == {fid: oracles.density(doc, fid) for fid in sorted(set(fids))}
    if len(set(fids)) >= 2:
        states = tb.run_vehicle_motion_detection(clip, fids).details["track_states"]
        assert states == oracles.motion_summary(doc, fids)
    for fid in fids:
        assert tb.execute("Vehicle Detection", clip, [fid]).per_frame[fid] == oracles.vehicles(doc, fid)
        assert tb.execute("License Plate Detection", clip, [fid]).per_frame[fid] == oracles.plates(doc, fid)
        assert tb.execute("Traffic Sign Detection", clip, [fid]).per_frame[fid] == oracles.signs(doc, fid)
        assert tb.execute("Object Detection", clip, [fid]).per_frame[fid] == oracles.objects(doc, fid)
    assert tb.execute("Lane Number Detection", clip, fids).details["lane_counts"] == oracles.lanes(doc, sorted(set(fids)))


def test_fixture_clips_match_oracles(clips, raw_clips):
    for clip_id, doc in raw_clips.items():
        clip = clips[clip_id]
        stride = int(clip.fps // 2)
        check_against_oracles(doc, clip, list(range(0, clip.frame_count, stride)))


def generated_clip(seed, i):
    rng = random.Random(seed * 1000 + i)
    clip = generate_synthetic_clip(rng.randrange(2**31), random_scenario(rng, f"g{i}"))
    return json.loads(dump_clip(clip)), clip


def test_generated_clips_match_oracles():
    for i in range(6):
        doc, clip = generated_clip(11, i)
        rng = random.Random(i)
        fids = sorted(rng.sample(range(clip.frame_count), 12))
        check_against_oracles(doc, clip, fids)


def test_congested_clip_reaches_high_density(clips):
    top = max(tb.vehicle_density(clips["c02"], f) for f in range(0, 450, 15))
    assert top >= 0.5
    light = max(tb.vehicle_density(clips["c01"], f) for f in range(0, 450, 15))
    assert light < 0.5


def test_bbox_area():
    assert BBox(1, 2, 3, 4).area == 12
    with pytest.raises(ValueError):
        ScenarioSpec(frames=0).validate()
