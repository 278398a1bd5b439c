"""Tool-calling agent runtime: trajectory model, tag grammar, rendering.

Each round the model emits exactly one think block followed by one
action block. Round 0 must plan; later rounds may refine the plan, call
a tool, or answer; an answer terminates the trajectory. The grammar is
strict: recognized tags only, balanced and non-nested, and nothing but
whitespace outside them. Format validity gates the reward, so the rules
here are the single source of truth for what counts as well-formed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .tools import RAG_RETRIEVE, WEB_SEARCH, ToolRequest

PLAN = "plan"
TOOL_CALL = "tool_call"
ANSWER = "answer"

TRUNCATION_MARKER = "[tool response truncated]"

DEFAULT_SYSTEM_PROMPT = (
    "You are a legal research assistant. Your built-in knowledge of statutes"
    " may be stale or incomplete, so ground every claim in tool results before"
    " answering.\n"
    "Output rules: in the first round write your reasoning inside"
    " <think></think> and then a step-by-step research plan inside"
    " <plan></plan>. Every later round must also start with <think></think>,"
    " followed by either a refined <plan></plan>, a single"
    ' <tool_call>{"name": ..., "arguments": ...}</tool_call>, or your final'
    " answer inside <answer></answer>. Emit nothing outside these tags.\n"
    "Tool routing: use rag_retrieve for statute and article lookups, including"
    " the relevant date or year in the query; use web_search for case law,"
    " commentary, and general questions; browse_webpage may only open URLs"
    " returned by an earlier web_search in this session."
)


class FormatError(ValueError):
    """Model output that violates the round grammar; the message names the
    first violated rule."""


@dataclass(frozen=True)
class Action:
    """One of plan / tool_call / answer with the matching payload."""

    kind: str
    payload: str | ToolRequest

    def __post_init__(self) -> None:
        if self.kind not in (PLAN, TOOL_CALL, ANSWER):
            raise ValueError(f"unknown action kind {self.kind!r}")
        if self.kind == TOOL_CALL:
            if not isinstance(self.payload, ToolRequest):
                raise ValueError("tool_call payload must be a ToolRequest")
        elif not isinstance(self.payload, str):
            raise ValueError(f"{self.kind} payload must be a string")

    @classmethod
    def plan(cls, text: str) -> "Action":
        return cls(PLAN, text)

    @classmethod
    def tool_call(cls, request: ToolRequest) -> "Action":
        return cls(TOOL_CALL, request)

    @classmethod
    def answer(cls, text: str) -> "Action":
        return cls(ANSWER, text)

    @property
    def request(self) -> ToolRequest:
        if self.kind != TOOL_CALL:
            raise ValueError(f"{self.kind} action has no tool request")
        assert isinstance(self.payload, ToolRequest)
        return self.payload

    def to_dict(self) -> dict:
        if self.kind == TOOL_CALL:
            return {"kind": self.kind, "request": self.request.to_dict()}
        return {"kind": self.kind, "text": self.payload}

    @classmethod
    def from_dict(cls, raw: dict) -> "Action":
        if raw["kind"] == TOOL_CALL:
            req = raw["request"]
            return cls.tool_call(ToolRequest(req["name"], req["arguments"]))
        return cls(raw["kind"], raw["text"])


@dataclass(frozen=True)
class Step:
    """One round: the think text, the action, and any tool response.

    ``raw`` preserves the exact model output the step was parsed from;
    synthetic steps leave it unset and are re-serialized for format
    checks.
    """

    think: str
    action: Action
    tool_response: Optional[str] = None
    raw: Optional[str] = field(default=None, compare=False)

    def to_dict(self) -> dict:
        out = {"think": self.think, "action": self.action.to_dict()}
        if self.tool_response is not None:
            out["tool_response"] = self.tool_response
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "Step":
        return cls(
            think=raw["think"],
            action=Action.from_dict(raw["action"]),
            tool_response=raw.get("tool_response"),
        )


@dataclass
class Trajectory:
    system_prompt: str
    query: str
    temporal_context: Optional[str] = None
    steps: list[Step] = field(default_factory=list)
    terminal_reward: Optional[float] = None
    item_id: Optional[str] = None
    invalid_output: Optional[str] = None
    invalid_reason: Optional[str] = None

    def to_dict(self) -> dict:
        out = {
            "query": self.query,
            "temporal_context": self.temporal_context,
            "steps": [s.to_dict() for s in self.steps],
            "reward": self.terminal_reward,
        }
        if self.item_id is not None:
            out["item_id"] = self.item_id
        if self.invalid_output is not None:
            out["invalid_output"] = self.invalid_output
            out["invalid_reason"] = self.invalid_reason
        return out

    @classmethod
    def from_dict(cls, raw: dict, system_prompt: str = DEFAULT_SYSTEM_PROMPT) -> "Trajectory":
        traj = cls(
            system_prompt=system_prompt,
            query=raw["query"],
            temporal_context=raw.get("temporal_context"),
            steps=[Step.from_dict(s) for s in raw.get("steps", [])],
            terminal_reward=raw.get("reward"),
            item_id=raw.get("item_id"),
        )
        traj.invalid_output = raw.get("invalid_output")
        traj.invalid_reason = raw.get("invalid_reason")
        return traj


@dataclass(frozen=True)
class RolloutLimits:
    """Turn and character budgets for one rollout.

    Character limits stand in for token budgets at a configurable ratio;
    the defaults assume four characters per token over a 32767-token
    context and a 28671-token response.
    """

    max_turns: int = 15
    max_context_length: int = 131068
    max_response_length: int = 114684

    def __post_init__(self) -> None:
        if self.max_turns < 1:
            raise ValueError("max_turns must be at least 1")
        if self.max_context_length < 1 or self.max_response_length < 1:
            raise ValueError("length limits must be positive")


# --- serialization of model output -------------------------------------------

def serialize_action(action: Action) -> str:
    if action.kind == TOOL_CALL:
        payload = json.dumps(action.request.to_dict(), ensure_ascii=False)
        return f"<tool_call>{payload}</tool_call>"
    return f"<{action.kind}>{action.payload}</{action.kind}>"


def serialize_step(step: Step) -> str:
    """The model-output text for a step: think block plus action block."""
    return f"<think>{step.think}</think>{serialize_action(step.action)}"


_TAG_RE = re.compile(r"</?(think|plan|tool_call|answer)>")


def _split_blocks(text: str) -> list[tuple[str, str]]:
    tokens = list(_TAG_RE.finditer(text))
    blocks: list[tuple[str, str]] = []
    pos = 0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.group(0).startswith("</"):
            raise FormatError(f"unbalanced tag {tok.group(0)}")
        name = tok.group(1)
        if i + 1 >= len(tokens) or tokens[i + 1].group(0) != f"</{name}>":
            raise FormatError(f"unbalanced tag <{name}>")
        if text[pos : tok.start()].strip():
            raise FormatError("text outside tags")
        blocks.append((name, text[tok.end() : tokens[i + 1].start()]))
        pos = tokens[i + 1].end()
        i += 2
    if text[pos:].strip():
        raise FormatError("text outside tags")
    return blocks


def parse_agent_output(text: str, round_index: int) -> Step:
    """Parse one round of model output under the round grammar.

    Raises FormatError naming the first violated rule: missing think,
    unbalanced tags, stray text, a missing first-round plan, or a
    malformed tool request.
    """
    blocks = _split_blocks(text)
    if not blocks or blocks[0][0] != "think":
        raise FormatError("round must begin with a think block")
    if len(blocks) == 1:
        raise FormatError("think block must be followed by exactly one action block")
    if len(blocks) > 2:
        raise FormatError("expected exactly one action block after think")
    think = blocks[0][1].strip()
    if not think:
        raise FormatError("think block must be non-empty")
    name, payload = blocks[1]
    if name == "think":
        raise FormatError("expected exactly one action block after think")
    if round_index == 0 and name != PLAN:
        raise FormatError("first round must contain a plan block")
    if name == PLAN:
        action = Action.plan(payload.strip())
    elif name == ANSWER:
        action = Action.answer(payload.strip())
    else:
        try:
            obj = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise FormatError(f"malformed tool request: {exc}") from None
        if (
            not isinstance(obj, dict)
            or not isinstance(obj.get("name"), str)
            or not isinstance(obj.get("arguments"), dict)
        ):
            raise FormatError(
                "malformed tool request: expected an object with string 'name'"
                " and object 'arguments'"
            )
        action = Action.tool_call(ToolRequest(obj["name"], obj["arguments"]))
    return Step(think=think, action=action, raw=text)


def validate_format(trajectory: Trajectory) -> bool:
    """True iff the whole trajectory is well-formed.

    Well-formed means: every step parses under its round's grammar
    (steps parsed from live output are re-checked from their raw text),
    round 0 plans, exactly one answer exists, and it is the final step.
    A trajectory cut off without an answer, or one recording an
    unparseable output, is not well-formed.
    """
    if trajectory.invalid_output is not None:
        return False
    if not trajectory.steps:
        return False
    for round_index, step in enumerate(trajectory.steps):
        text = step.raw if step.raw is not None else serialize_step(step)
        try:
            parsed = parse_agent_output(text, round_index)
        except FormatError:
            return False
        if parsed.action.kind != step.action.kind:
            return False
    answers = [i for i, s in enumerate(trajectory.steps) if s.action.kind == ANSWER]
    return answers == [len(trajectory.steps) - 1]


def extract_answer(trajectory: Trajectory) -> Optional[str]:
    """The trimmed text of the terminal answer block, if any."""
    if trajectory.steps and trajectory.steps[-1].action.kind == ANSWER:
        payload = trajectory.steps[-1].action.payload
        assert isinstance(payload, str)
        return payload.strip()
    return None


# --- state rendering ----------------------------------------------------------

def _render(trajectory: Trajectory, replaced: int) -> str:
    parts = [trajectory.system_prompt, "", f"Question: {trajectory.query}"]
    if trajectory.temporal_context:
        parts.append(f"Temporal context: {trajectory.temporal_context}")
    seen_responses = 0
    for step in trajectory.steps:
        parts.append(serialize_step(step))
        if step.tool_response is not None:
            seen_responses += 1
            body = TRUNCATION_MARKER if seen_responses <= replaced else step.tool_response
            parts.append(f"<tool_response>{body}</tool_response>")
    return "\n".join(parts)


def render_state(trajectory: Trajectory, limits: RolloutLimits | None = None) -> str:
    """Deterministic prompt text for the next round.

    When the rendering exceeds the context budget, whole tool responses
    are replaced by a truncation marker, oldest first, until it fits (or
    none are left to replace).
    """
    limits = limits or RolloutLimits()
    n_responses = sum(1 for s in trajectory.steps if s.tool_response is not None)
    for replaced in range(n_responses + 1):
        rendered = _render(trajectory, replaced)
        if len(rendered) <= limits.max_context_length:
            return rendered
    return rendered


# --- benchmark items ----------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkItem:
    """One evaluation item: a question, its temporal context, and the gold
    answer, tagged with the task kind that decides how it is scored."""

    id: str
    task: str
    question: str
    answer: str
    temporal_context: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "task": self.task,
            "question": self.question,
            "temporal_context": self.temporal_context,
            "answer": self.answer,
        }


def load_items(path: str | Path) -> list[BenchmarkItem]:
    items = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        raw = json.loads(line)
        try:
            items.append(
                BenchmarkItem(
                    id=str(raw["id"]),
                    task=str(raw["task"]),
                    question=str(raw["question"]),
                    answer=str(raw["answer"]),
                    temporal_context=(
                        str(raw["temporal_context"])
                        if raw.get("temporal_context") is not None
                        else None
                    ),
                )
            )
        except KeyError as exc:
            raise ValueError(f"{path}, line {line_no}: missing item field {exc}") from None
    return items


# --- temporal query accounting --------------------------------------------------

# A query is temporal when it carries a standalone 1900-2099 year or a
# full date in ISO, slash, or CJK form.
_TEMPORAL_RE = re.compile(
    r"(?<!\d)(?:19|20)\d{2}(?!\d)"
    r"|\d{4}-\d{1,2}-\d{1,2}"
    r"|\d{4}/\d{1,2}/\d{1,2}"
    r"|\d{4}年\d{1,2}月\d{1,2}日"
)


def is_temporal_query(query: str) -> bool:
    return bool(_TEMPORAL_RE.search(query))


@dataclass
class QueryCounts:
    total: int = 0
    temporal: int = 0

    @property
    def share(self) -> Optional[float]:
        return self.temporal / self.total if self.total else None

    def to_dict(self) -> dict:
        return {"total": self.total, "temporal": self.temporal, "share": self.share}


def count_temporal_queries(trajectories: Iterable[Trajectory]) -> dict[str, QueryCounts]:
    """Count date-bearing search queries per tool across trajectories.

    Every string in a web_search or rag_retrieve query list counts as
    one query; it is temporal when it contains a standalone 1900-2099
    year or a full date token.
    """
    counts = {WEB_SEARCH: QueryCounts(), RAG_RETRIEVE: QueryCounts()}
    for trajectory in trajectories:
        for step in trajectory.steps:
            if step.action.kind != TOOL_CALL:
                continue
            request = step.action.request
            if request.name not in counts:
                continue
            queries = request.arguments.get("query")
            if not isinstance(queries, list):
                continue
            for query in queries:
                if not isinstance(query, str):
                    continue
                counts[request.name].total += 1
                if is_temporal_query(query):
                    counts[request.name].temporal += 1
    return counts


def write_trajectories(trajectories: Sequence[Trajectory], path: str | Path) -> None:
    lines = [json.dumps(t.to_dict(), ensure_ascii=False) for t in trajectories]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_trajectories(path: str | Path) -> list[Trajectory]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(Trajectory.from_dict(json.loads(line)))
    return out
