import pytest

from semcom import toolbox as tb
from semcom.llm_backend import DeterministicBackend, StubBackend
from semcom.planning import TaskPlan
from semcom.reflection import NO, YES, VerdictParseError, judge, parse_verdict, reflect, render_reflection_prompt
from semcom.synth import fixture_corpus


@pytest.mark.parametrize(
    "text, verdict",
    [
        ("Yes, this plan works.", YES),
        ("yes", YES),
        ("**No**. The tool cannot see helmets.", NO),
        ("NO - wrong tool", NO),
    ],
)
def test_parse_verdict(text, verdict):
    assert parse_verdict(text)[0] == verdict


@pytest.mark.parametrize("text", ["", "Maybe, it depends.", "Probably yes"])
def test_unreadable_verdict(text):
    with pytest.raises(VerdictParseError):
        parse_verdict(text)


def test_explanation_follows_verdict():
    assert parse_verdict("No, the tool cannot see helmets.")[1] == "the tool cannot see helmets."


def test_jam_approved_for_density(tools):
    result = reflect("Is there a traffic jam in the video?", TaskPlan("Vehicle Density Estimation"), tools, DeterministicBackend())
    assert result.approved
    assert result.explanation


def test_helmet_request_rejected_for_object_detection(tools):
    verdict, text = judge(
        "How many motorcyclists wearing helmet in the whole video?", TaskPlan("Object Detection"), tools
    )
    assert verdict == NO and text.startswith("No,")
    assert "helmet" in text


def test_accident_rejected_for_every_tool(tools):
    for tool in tools:
        assert judge("Did an accident happen in the video?", TaskPlan(tool.name), tools)[0] == NO


def test_unrelated_tool_rejected(tools):
    assert judge("How many lanes does the road have?", TaskPlan("License Plate Detection"), tools)[0] == NO


def test_fixture_corpus_verdicts(tools):
    """Y requests approve their expected tool; N requests approve no tool at all."""
    for record in fixture_corpus():
        if record.label == "Y":
            assert judge(record.text, TaskPlan(record.expected_tool), tools)[0] == YES, record.text
        else:
            assert all(judge(record.text, TaskPlan(t.name), tools)[0] == NO for t in tools), record.text


def test_prompt_contains_request_plan_and_toolbox(tools):
    prompt = render_reflection_prompt("Is it raining?", TaskPlan("Object Detection"), tools)
    assert "Is it raining?" in prompt
    assert "Video Sampler | Object Detection | Analysis" in prompt
    assert "Vehicle Density Estimation" in prompt


def test_prompted_reflection_reasks_once(tools):
    backend = StubBackend(["I think it could work", "Yes, density shows congestion."])
    result = reflect("jam?", TaskPlan("Vehicle Density Estimation"), tools, backend)
    assert result.verdict == YES
    assert len(backend.prompts) == 2


def test_prompted_reflection_gives_up(tools):
    backend = StubBackend(["hmm", "hmm again"])
    with pytest.raises(VerdictParseError):
        reflect("jam?", TaskPlan("Vehicle Density Estimation"), tools, backend)


def test_unknown_plan_tool(tools):
    with pytest.raises(tb.UnknownToolError):
        judge("jam?", TaskPlan("Weather Detection"), tools)
