"""Rollout execution: drive a policy against the tool registry.

The policy is any text-in/text-out callable; the runtime renders the
conversation state, parses the policy's output under the round grammar,
executes tool calls, and stops on an answer, a grammar violation, or
the turn limit. Nothing here embeds a model: scripted policies serve
tests and offline benchmarks, and RemotePolicy forwards the rendered
state to an HTTP text-generation endpoint.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import requests

from .agent import (
    ANSWER,
    DEFAULT_SYSTEM_PROMPT,
    BenchmarkItem,
    FormatError,
    RolloutLimits,
    Step,
    TOOL_CALL,
    Trajectory,
    parse_agent_output,
    render_state,
)
from .tools import ContextStore, ToolRegistry, dispatch


class PolicyBackend(Protocol):
    def generate(self, context: str) -> str: ...


class RolloutError(RuntimeError):
    """Policy backend failure; carries the partial trajectory."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


def run_rollout(
    item: BenchmarkItem,
    policy: PolicyBackend,
    registry: ToolRegistry,
    limits: RolloutLimits | None = None,
    system_prompt: str = DEFAULT_SYSTEM_PROMPT,
) -> Trajectory:
    """Roll one item until answer, grammar violation, or the turn limit.

    Grammar violations do not raise: the offending output is recorded on
    the trajectory, which simply fails format validation downstream.
    Each rollout gets a fresh ContextStore, so search context never
    leaks across rollouts.
    """
    limits = limits or RolloutLimits()
    store = ContextStore()
    trajectory = Trajectory(
        system_prompt=system_prompt,
        query=item.question,
        temporal_context=item.temporal_context,
        item_id=item.id,
    )
    for round_index in range(limits.max_turns):
        context = render_state(trajectory, limits)
        try:
            output = policy.generate(context)
        except Exception as exc:
            raise RolloutError(f"policy backend failed: {exc}", trajectory) from exc
        output = output[: limits.max_response_length]
        try:
            step = parse_agent_output(output, round_index)
        except FormatError as exc:
            trajectory.invalid_output = output
            trajectory.invalid_reason = str(exc)
            break
        if step.action.kind == TOOL_CALL:
            response = dispatch(step.action.request, registry, store)
            step = replace(step, tool_response=response)
        trajectory.steps.append(step)
        if step.action.kind == ANSWER:
            break
    return trajectory


def run_items(
    items: Sequence[BenchmarkItem],
    policy_factory: Callable[[BenchmarkItem], PolicyBackend],
    registry: ToolRegistry,
    limits: RolloutLimits | None = None,
    workers: int = 4,
    system_prompt: str = DEFAULT_SYSTEM_PROMPT,
) -> list[Trajectory]:
    """Roll every item in a bounded worker pool, preserving item order."""
    if workers < 1:
        raise ValueError("workers must be at least 1")

    def roll(item: BenchmarkItem) -> Trajectory:
        return run_rollout(item, policy_factory(item), registry, limits, system_prompt)

    if workers == 1 or len(items) <= 1:
        return [roll(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(roll, items))


# --- policies -------------------------------------------------------------------

@dataclass
class ScriptedPolicy:
    """Replays canned outputs in order; optionally cycles when exhausted."""

    outputs: Sequence[str]
    cycle: bool = False
    _cursor: int = 0

    def generate(self, context: str) -> str:
        if not self.outputs:
            raise RuntimeError("scripted policy has no outputs")
        if self._cursor >= len(self.outputs):
            if not self.cycle:
                raise RuntimeError("scripted policy exhausted")
            self._cursor = 0
        out = self.outputs[self._cursor]
        self._cursor += 1
        return out


_TEXT_LINE_RE = re.compile(r"^text: (.*)$", re.MULTILINE)
_RESPONSE_RE = re.compile(r"<tool_response>(.*?)</tool_response>", re.DOTALL)


@dataclass
class RecitePolicy:
    """Plan, retrieve with the item's temporal context, recite the top hit.

    A deterministic stand-in for a trained model on recitation-style
    benchmarks: the answer is whatever provision text the retrieval tool
    returned first, so scoring reflects retrieval quality.
    """

    item: BenchmarkItem
    _round: int = 0

    def generate(self, context: str) -> str:
        self._round += 1
        if self._round == 1:
            return (
                "<think>The statute text depends on which version was in force,"
                " so I should retrieve it with the date attached.</think>"
                "<plan>1. Retrieve the provision with rag_retrieve, including"
                " the temporal context in the query. 2. Answer with the exact"
                " retrieved text.</plan>"
            )
        if self._round == 2:
            query = self.item.question
            if self.item.temporal_context and self.item.temporal_context not in query:
                query = f"{self.item.temporal_context} {query}"
            call = json.dumps(
                {"name": "rag_retrieve", "arguments": {"query": [query]}},
                ensure_ascii=False,
            )
            return (
                "<think>Retrieving the provision as planned.</think>"
                f"<tool_call>{call}</tool_call>"
            )
        responses = _RESPONSE_RE.findall(context)
        text = None
        if responses:
            m = _TEXT_LINE_RE.search(responses[-1])
            if m:
                text = m.group(1).strip()
        if text:
            return (
                "<think>The top provision matches the requested date, so I answer"
                " with its exact text.</think>"
                f"<answer>{text}</answer>"
            )
        return (
            "<think>Retrieval returned nothing usable, so I cannot recite the"
            " provision.</think><answer>unknown</answer>"
        )


@dataclass
class RemotePolicy:
    """Forwards the rendered state to an HTTP completion endpoint.

    The endpoint receives {"prompt": ...} and must answer with JSON
    carrying a "text" field.
    """

    endpoint: str
    timeout: float = 60.0
    session: Optional[requests.Session] = None

    def generate(self, context: str) -> str:
        session = self.session or requests
        response = session.post(self.endpoint, json={"prompt": context}, timeout=self.timeout)
        response.raise_for_status()
        payload = response.json()
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str):
            raise RuntimeError("remote policy response must carry a 'text' field")
        return payload["text"]


@dataclass
class ScriptFilePolicy:
    """Per-item scripted outputs loaded from a JSON file.

    The file maps item ids to lists of round outputs; use as a policy
    factory via ``for_item``.
    """

    scripts: dict[str, list[str]]

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptFilePolicy":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls({str(k): [str(s) for s in v] for k, v in raw.items()})

    def for_item(self, item: BenchmarkItem) -> ScriptedPolicy:
        if item.id not in self.scripts:
            raise KeyError(f"no script for item {item.id!r}")
        return ScriptedPolicy(self.scripts[item.id])
