import pytest
from hypothesis import given
from hypothesis import strategies as st

from semcom import toolbox as tb
from semcom.llm_backend import DeterministicBackend, StubBackend
from semcom.planning import (
    FULFILL_PREFIX,
    PLAN_EXAMPLE,
    ExcludedToolError,
    PlanError,
    PlannerContext,
    PlanParseError,
    TaskPlan,
    ToolboxExhausted,
    UnknownToolInPlan,
    VideoInfo,
    analyze,
    generate_plan,
    parse_plan,
    render_planning_prompt,
    sample_frames,
    select_tool_deterministic,
    temporal_window,
)
from semcom.synth import fixture_corpus

CLIP = VideoInfo(fps=30, frame_count=450)


def test_example_plan_parses_verbatim():
    plan = parse_plan("Video Sampler | Vehicle Density Estimation | Analysis")
    assert plan.tool == "Vehicle Density Estimation"
    assert plan.raw == PLAN_EXAMPLE == "Video Sampler | Vehicle Density Estimation | Analysis"
    assert plan.steps == ("Video Sampler", "Vehicle Density Estimation", "Analysis")


@pytest.mark.parametrize(
    "text",
    [
        "Video Sampler | Analysis",
        "Video Sampler | Object Detection | Lane Number Detection | Analysis",
        "Object Detection | Video Sampler | Analysis",
        "Video Sampler | Object Detection | Summary",
        "",
    ],
)
def test_malformed_plans_rejected(text):
    with pytest.raises(PlanParseError):
        parse_plan(text)


def test_unknown_tool_rejected():
    with pytest.raises(UnknownToolInPlan) as info:
        parse_plan("Video Sampler | Weather Detection | Analysis")
    assert info.value.name == "Weather Detection"


@given(st.sampled_from([t.name for t in tb.registry()]))
def test_every_tool_round_trips(name):
    assert parse_plan(TaskPlan(name).raw).tool == name


def span(text, clip=CLIP):
    window = temporal_window(text, clip)
    return window.start, window.end


def test_temporal_windows():
    assert span("What happens in the first 5 seconds?") == (0, 150)
    assert span("the last three seconds") == (360, 450)
    assert span("between 2 and 4 seconds") == (60, 120)
    assert span("at second 3") == (90, 120)
    assert span("Is there a car?") == (0, 450)


def test_out_of_range_cue_falls_back():
    window = temporal_window("in the first 40 seconds", CLIP)
    assert (window.start, window.end, window.fallback) == (0, 450, True)


def test_sampling_stride():
    assert sample_frames("any car?", CLIP) == list(range(0, 450, 15))
    assert sample_frames("any car?", VideoInfo(25, 375)) == list(range(0, 375, 12))
    assert sample_frames("any car?", VideoInfo(1, 5)) == [0, 1, 2, 3, 4]


def test_deterministic_planner_picks_density_for_jam():
    ctx = PlannerContext("Is there a traffic jam in the video?", CLIP)
    assert select_tool_deterministic(ctx, tb.registry()) == "Vehicle Density Estimation"


def test_planner_respects_exclusions():
    tools = tb.registry()
    excluded = {"Vehicle Density Estimation"}
    ctx = PlannerContext("Is there a traffic jam in the video?", CLIP, excluded)
    assert select_tool_deterministic(ctx, tools) not in excluded


def test_planner_exhausted():
    ctx = PlannerContext("anything", CLIP, {t.name for t in tb.registry()})
    with pytest.raises(ToolboxExhausted):
        generate_plan(ctx, tb.registry(), DeterministicBackend())


def test_excluded_names_must_exist():
    with pytest.raises(PlanError):
        generate_plan(PlannerContext("x", CLIP, {"Nope"}), tb.registry(), DeterministicBackend())


def test_first_choice_matches_corpus_labels():
    tools = tb.registry()
    ys = [r for r in fixture_corpus() if r.label == "Y"]
    hits = sum(select_tool_deterministic(PlannerContext(r.text, CLIP), tools) == r.expected_tool for r in ys)
    assert hits / len(ys) >= 0.95


def test_prompt_lists_only_available_tools():
    ctx = PlannerContext("Is there a traffic jam?", CLIP, {"Object Detection"})
    prompt = render_planning_prompt(ctx, tb.registry())
    assert "Is there a traffic jam?" in prompt
    assert "Vehicle Density Estimation" in prompt
    assert "Tool: Object Detection" not in prompt and "1. Object Detection" not in prompt
    assert PLAN_EXAMPLE in prompt


def test_prompted_plan_with_chatter():
    backend = StubBackend(["Sure! Plan: Video Sampler | Lane Number Detection | Analysis."])
    plan = generate_plan(PlannerContext("lanes?", CLIP), tb.registry(), backend)
    assert plan.tool == "Lane Number Detection"


def test_prompted_plan_reasked_once():
    backend = StubBackend(["I would look at the lanes.", "Video Sampler | Lane Number Detection | Analysis"])
    assert generate_plan(PlannerContext("lanes?", CLIP), tb.registry(), backend).tool == "Lane Number Detection"
    assert "previous reply could not be read" in backend.prompts[-1]


def test_prompted_plan_fails_after_second_bad_reply():
    backend = StubBackend(["nope", "still nope"])
    with pytest.raises(PlanParseError):
        generate_plan(PlannerContext("lanes?", CLIP), tb.registry(), backend)


def test_prompted_plan_cannot_reuse_excluded_tool():
    backend = StubBackend(["Video Sampler | Lane Number Detection | Analysis"])
    ctx = PlannerContext("lanes?", CLIP, {"Lane Number Detection"})
    with pytest.raises(ExcludedToolError):
        generate_plan(ctx, tb.registry(), backend)


def test_density_analysis_reports_jam(clips):
    plan = TaskPlan("Vehicle Density Estimation")
    request = "Is there a traffic jam in the video?"
    jam = analyze(request, plan, tb.execute(plan.tool, clips["c02"], sample_frames(request, clips["c02"])))
    clear = analyze(request, plan, tb.execute(plan.tool, clips["c01"], sample_frames(request, clips["c01"])))
    assert jam.startswith(FULFILL_PREFIX) and "a traffic jam is detected" in jam
    assert "there is no traffic jam detected" in clear


def test_analysis_with_prompting_backend(clips):
    plan = TaskPlan("Lane Number Detection")
    result = tb.execute(plan.tool, clips["c04"], [0, 12])
    assert analyze("lanes?", plan, result, StubBackend(["The road has 3 lanes."])) == "The road has 3 lanes."
