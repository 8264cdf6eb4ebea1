"""Bundled fixture clips, the labeled request corpus, and synthetic corpora.

``python -m semcom.synth`` (or ``semcom-data``) regenerates
``semcom/fixtures/``. Fixture parameters:

====  ======  ===  ========  =============================================
clip  frames  fps  vehicles  notes
====  ======  ===  ========  =============================================
c01   450     30   6         light traffic, vehicle stopped in 200-449
c02   450     30   14        congested queue, small road area
c03   450     30   8         motorcyclists in 60-130 and 300-360
c04   375     25   10        two traffic signs, 3 lanes
c05   450     30   5         vehicle stopped in 90-449, 2 lanes
====  ======  ===  ========  =============================================
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path
from typing import Sequence

from . import toolbox as tb
from .dataset import AnnotatedClip, RequestRecord, ScenarioSpec, generate_synthetic_clip, write_clip, write_request_corpus

FIXTURE_SEED = 7

FIXTURE_SCENARIOS: tuple[ScenarioSpec, ...] = (
    ScenarioSpec(
        clip_id="c01", frames=450, vehicles=6, stopped_vehicle=(200, 449), lane_count=3,
        signs=("Speed Limit 70",), pedestrians=2,
    ),
    ScenarioSpec(
        clip_id="c02", frames=450, vehicles=14, congestion=True, road_area_px=300_000.0, lane_count=4,
        signs=("No Entry",),
    ),
    ScenarioSpec(
        clip_id="c03", frames=450, vehicles=8, motorcycle_spans=((60, 130), (300, 360)), lane_count=2,
        signs=("Pedestrian Crossing", "Speed Limit 50"), pedestrians=4,
    ),
    ScenarioSpec(
        clip_id="c04", frames=375, fps=25.0, vehicles=10, lane_count=3, signs=("Speed Limit 60", "No U-Turn"),
        pedestrians=1,
    ),
    ScenarioSpec(clip_id="c05", frames=450, vehicles=5, stopped_vehicle=(90, 449), lane_count=2),
)

OD, VD, LPD, TSD = tb.OBJECT_DETECTION, tb.VEHICLE_DETECTION, tb.LICENSE_PLATE_DETECTION, tb.TRAFFIC_SIGN_DETECTION
VMD, LND, TFE, VDE = (
    tb.VEHICLE_MOTION_DETECTION, tb.LANE_NUMBER_DETECTION, tb.TRAFFIC_FLOW_ESTIMATION, tb.VEHICLE_DENSITY_ESTIMATION,
)

# (clip, text, expected tool)
_Y_REQUESTS = (
    ("c01", "Is there a traffic jam in the video?", VDE),
    ("c02", "How congested is the road?", VDE),
    ("c02", "Is the traffic heavy on this road?", VDE),
    ("c04", "What is the vehicle density in the first 5 seconds?", VDE),
    ("c03", "What objects can be seen in the video?", OD),
    ("c01", "Is there a person in the video?", OD),
    ("c03", "Are there any pedestrians in the first 3 seconds?", OD),
    ("c03", "Is there a motorcycle in the video?", OD),
    ("c04", "What colors are the vehicles in the video?", VD),
    ("c01", "How many SUVs appear in the video?", VD),
    ("c05", "Is there a red sedan?", VD),
    ("c02", "What type of vehicles are on the road?", VD),
    ("c01", "What is the license plate number of the car?", LPD),
    ("c04", "Read the plates of the vehicles in the last 3 seconds.", LPD),
    ("c03", "What traffic signs are visible?", TSD),
    ("c01", "What is the speed limit on this road?", TSD),
    ("c05", "Are the vehicles moving?", VMD),
    ("c02", "Is any vehicle stopped or parked?", VMD),
    ("c04", "How many lanes does the road have?", LND),
    ("c05", "What is the number of road lanes?", LND),
    ("c04", "How many vehicles passed in the video?", TFE),
    ("c01", "What is the total number of different vehicles?", TFE),
    ("c03", "Estimate the traffic flow in the last 10 seconds.", TFE),
    ("c02", "Is the road crowded?", VDE),
)

# (clip, text, relevant span or None)
_N_REQUESTS = (
    ("c01", "Did an accident happen in the video?", (200, 449)),
    ("c05", "Was there a collision between two cars?", (90, 449)),
    ("c03", "How many motorcyclists wearing helmet in the whole video?", (60, 130)),
    ("c04", "What is the weather like in the video?", None),
    ("c02", "Is it raining?", None),
    ("c04", "Is any vehicle speeding?", None),
    ("c01", "What brand is the white SUV?", None),
    ("c02", "Is the driver of the bus wearing a seatbelt?", None),
    ("c04", "Did the truck run a red light?", None),
    ("c05", "Was anyone injured?", None),
    ("c03", "How fast is the blue car going?", None),
    ("c05", "Did any car crash into the barrier?", (90, 449)),
    ("c01", "What time of day was the video recorded?", None),
    ("c03", "Are there any potholes on the road?", None),
    ("c02", "Is anyone smoking in the video?", None),
    ("c03", "Did a person fall down near the crossroad?", None),
)


def fixture_corpus() -> list[RequestRecord]:
    records = [
        RequestRecord(f"y{i:02d}", clip, text, "Y", tool) for i, (clip, text, tool) in enumerate(_Y_REQUESTS, 1)
    ]
    records += [
        RequestRecord(f"n{i:02d}", clip, text, "N", relevant_span=span)
        for i, (clip, text, span) in enumerate(_N_REQUESTS, 1)
    ]
    return records


def fixture_clips() -> list[AnnotatedClip]:
    return [generate_synthetic_clip(FIXTURE_SEED, spec) for spec in FIXTURE_SCENARIOS]


def build_fixtures(out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for clip in fixture_clips():
        write_clip(clip, out / f"{clip.clip_id}.json")
    write_request_corpus(fixture_corpus(), out / "corpus.jsonl")


def random_scenario(rng: random.Random, clip_id: str) -> ScenarioSpec:
    frames = rng.choice((300, 375, 450, 450, 480))
    stop = None
    if rng.random() < 0.5:
        start = rng.randrange(frames // 4, frames // 2)
        stop = (start, frames - 1)
    motorcycles = ()
    if rng.random() < 0.5:
        start = rng.randrange(0, frames - 60)
        motorcycles = ((start, start + 50),)
    return ScenarioSpec(
        clip_id=clip_id,
        frames=frames,
        vehicles=rng.randint(0, 12),
        stopped_vehicle=stop,
        motorcycle_spans=motorcycles,
        congestion=rng.random() < 0.2,
        signs=tuple(rng.sample(("Speed Limit 60", "No Entry", "Yield", "Keep Right", "No Trucks"), rng.randint(0, 2))),
        lane_count=rng.randint(1, 5),
        pedestrians=rng.randint(0, 4),
    )


def synthetic_corpus(seed: int, n_clips: int, y_per_clip: int = 3, n_per_clip: int = 4):
    """Random clips plus requests in a fixed Y:N mix (3:4 by default).

    Requests are drawn from the fixture request pools; spans tied to a
    specific fixture clip are dropped.
    """
    rng = random.Random(seed)
    clips, records = [], []
    for c in range(n_clips):
        clip_id = f"s{seed}-{c:03d}"
        clips.append(generate_synthetic_clip(rng.randrange(2**31), random_scenario(rng, clip_id)))
        for k, (_, text, tool) in enumerate(rng.sample(_Y_REQUESTS, y_per_clip)):
            records.append(RequestRecord(f"{clip_id}-y{k}", clip_id, text, "Y", tool))
        for k, (_, text, _) in enumerate(rng.sample(_N_REQUESTS, n_per_clip)):
            records.append(RequestRecord(f"{clip_id}-n{k}", clip_id, text, "N"))
    return clips, records


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="semcom-data", description="Regenerate the bundled fixtures.")
    parser.add_argument("--out-dir", type=Path, default=Path(__file__).parent / "fixtures")
    args = parser.parse_args(argv)
    build_fixtures(args.out_dir)
    print(f"fixtures written to {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
