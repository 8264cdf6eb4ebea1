"""Task reflection: does the current plan exactly address the request?"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from string import Template
from typing import Sequence

from . import toolbox as tb
from .llm_backend import Backend
from .frame_selection import extract_key_term_deterministic
from .planning import TaskPlan
from .text import default_tables, find_terms, load_template, tokenize
from .toolbox import ToolDescriptor

logger = logging.getLogger(__name__)

YES = "YES"
NO = "NO"

_FIRST_WORD = re.compile(r"[A-Za-z]+")

VERDICT_REMINDER = (
    '\n\nYour previous reply did not start with "Yes" or "No". '
    'Start your reply with "Yes" or "No", then give your explanation.'
)


class VerdictParseError(ValueError):
    pass


@dataclass(frozen=True)
class ReflectionResult:
    verdict: str
    explanation: str
    plan: TaskPlan

    @property
    def approved(self) -> bool:
        return self.verdict == YES


def render_reflection_prompt(request: str, plan: TaskPlan, tools: Sequence[ToolDescriptor]) -> str:
    return Template(load_template("reflection_prompt.txt")).substitute(
        request=request, plan=plan.raw, toolbox=tb.render_toolbox(tools)
    )


def parse_verdict(text: str) -> tuple[str, str]:
    """Split a reflection reply into (YES|NO, explanation)."""
    m = _FIRST_WORD.search(text)
    if m is None:
        raise VerdictParseError(f"no verdict in {text!r}")
    word = m.group(0).casefold()
    if word not in ("yes", "no"):
        raise VerdictParseError(f"reply must start with Yes or No, got {m.group(0)!r}")
    explanation = text[m.end():].lstrip(" ,.:;-\n\t")
    return (YES if word == "yes" else NO), explanation


def _quoted(terms) -> str:
    return ", ".join(f'"{" ".join(t)}"' for t in terms)


def judge(request: str, plan: TaskPlan, tools: Sequence[ToolDescriptor]) -> tuple[str, str]:
    """Rule-based verdict and explanation for the deterministic backend.

    A plan is approved when its tool matches something in the request
    (keyword overlap, or a directly detected label being the request's key
    term) and the request names nothing the tool, or the toolbox as a whole,
    is unable to handle.
    """
    tool = tb.get_tool(plan.tool, tools)
    tokens = tokenize(request)
    blockers = find_terms(tokens, [tuple(t.split()) for t in tool.limitations] + list(default_tables().unsupported))
    hits = find_terms(tokens, [tuple(k.split()) for k in tool.keywords])
    key = extract_key_term_deterministic(request, tools)
    by_label = key.matched and key.tool == tool.name and not tool.proxy_labels

    if blockers:
        terms = list(dict.fromkeys(term for _, term in blockers))
        return NO, (
            f"No, the task plan cannot exactly address the receiver's request. The request asks about "
            f"{_quoted(terms)}, which the {tool.name} tool cannot detect or estimate, so the Analysis step "
            f"would not have the information it needs."
        )
    if hits or by_label:
        terms = list(dict.fromkeys(term for _, term in hits)) or [tuple(key.key_term.split())]
        return YES, (
            f"Yes, this task plan can address the receiver's request. The Video Sampler step picks the relevant "
            f"frames, the {tool.name} tool extracts the information the request refers to ({_quoted(terms)}), "
            f"and the Analysis step summarizes its output for the receiver."
        )
    return NO, (
        f"No, the task plan cannot exactly address the receiver's request. Nothing in the request matches "
        f"what the {tool.name} tool can detect or estimate."
    )


def reflect(request: str, plan: TaskPlan, tools: Sequence[ToolDescriptor], backend: Backend) -> ReflectionResult:
    if backend.deterministic:
        verdict, text = judge(request, plan, tools)
        _, explanation = parse_verdict(text)
        return ReflectionResult(verdict, explanation, plan)
    prompt = render_reflection_prompt(request, plan, tools)
    try:
        verdict, explanation = parse_verdict(backend.complete(prompt))
    except VerdictParseError as exc:
        logger.info("reflection reply unreadable (%s); asking again", exc)
        verdict, explanation = parse_verdict(backend.complete(prompt + VERDICT_REMINDER))
    return ReflectionResult(verdict, explanation or "(no explanation given)", plan)
