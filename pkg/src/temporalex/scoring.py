"""Task scoring: per-kind answer checks behind a format-gated reward.

Training rewards are binary. A trajectory that fails format validation
scores zero no matter what it answered; otherwise the task kind picks
the check: character-level ROUGE-L thresholding for recitation, set
match with suffix normalization for charge prediction, judge-based
grading for subjective consultation, unit-normalized or plain exact
match for everything else. Evaluation reuses the same checks but
reports the continuous metric where one exists.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from .agent import BenchmarkItem, Trajectory, extract_answer, validate_format

TASK_LAR = "LAR"
TASK_LCS = "LCS"
TASK_KQA = "KQA"
TASK_LAP = "LAP"
TASK_CCP = "CCP"
TASK_PTP = "PTP"
TASK_LCA = "LCA"
TASK_OOD_MC = "OOD_MC"
TASK_KINDS = (
    TASK_LAR,
    TASK_LCS,
    TASK_KQA,
    TASK_LAP,
    TASK_CCP,
    TASK_PTP,
    TASK_LCA,
    TASK_OOD_MC,
)

MODE_TRAIN = "train"
MODE_EVAL = "eval"

LAR_THRESHOLD = 0.95
JUDGE_CUT = 0.5

# Crime names in charge-prediction answers commonly carry a trailing
# suffix token; labels compare equal with or without it.
DEFAULT_CCP_SUFFIXES = ("罪",)

# Unit spellings normalized before the participation-task exact match.
DEFAULT_UNIT_TABLE = {
    "个月": " months",
    "月": " months",
    "年": " years",
    "天": " days",
    "日": " days",
    "元": " yuan",
}

_LABEL_SPLIT_RE = re.compile(r"[,;，；、/]+")
_WS_RE = re.compile(r"\s+")


class ScoringError(ValueError):
    """Unknown task kind or malformed scoring input."""


class JudgeError(RuntimeError):
    """The consultation judge failed or returned out-of-range scores."""


def _lcs_len(a: str, b: str) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for ch_a in a:
        cur = [0]
        for j, ch_b in enumerate(b, start=1):
            if ch_a == ch_b:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[len(b)]


def rouge_l_char(pred: str, gold: str) -> float:
    """Character-level ROUGE-L F1.

    P = LCS/|pred|, R = LCS/|gold|, F1 = 2PR/(P+R); zero when either
    side is empty or nothing is shared.
    """
    if not pred or not gold:
        return 0.0
    lcs = _lcs_len(pred, gold)
    if lcs == 0:
        return 0.0
    precision = lcs / len(pred)
    recall = lcs / len(gold)
    return 2.0 * precision * recall / (precision + recall)


def score_lar(pred: str, gold: str, mode: str = MODE_TRAIN, threshold: float = LAR_THRESHOLD) -> float:
    """Recitation score: thresholded ROUGE-L in training, raw F1 in eval."""
    value = rouge_l_char(pred, gold)
    if mode == MODE_EVAL:
        return value
    return 1.0 if value >= threshold else 0.0


def parse_labels(text: str, suffixes: Sequence[str] = DEFAULT_CCP_SUFFIXES) -> frozenset[str]:
    """Split a delimiter-separated answer into normalized label set."""
    labels = set()
    for part in _LABEL_SPLIT_RE.split(text):
        label = part.strip().casefold()
        changed = True
        while changed and label:
            changed = False
            for suffix in suffixes:
                if suffix and label.endswith(suffix.casefold()) and len(label) > len(suffix):
                    label = label[: -len(suffix)].strip()
                    changed = True
        if label:
            labels.add(label)
    return frozenset(labels)


def score_ccp(pred: str, gold: str, suffixes: Sequence[str] = DEFAULT_CCP_SUFFIXES) -> float:
    """Charge prediction: unordered label-set equality after normalization."""
    pred_labels = parse_labels(pred, suffixes)
    gold_labels = parse_labels(gold, suffixes)
    if not gold_labels:
        return 0.0
    return 1.0 if pred_labels == gold_labels else 0.0


_ALPHA_RE = re.compile(r"[a-z]+\Z")


def score_exact(pred: str, gold: str) -> float:
    """Exact match after trimming and casefolding.

    Purely alphabetic answers compare as character sets so multi-letter
    choice answers are order-insensitive ("BA" matches "AB").
    """
    p = pred.strip().casefold()
    g = gold.strip().casefold()
    if _ALPHA_RE.match(p) and _ALPHA_RE.match(g):
        return 1.0 if set(p) == set(g) else 0.0
    return 1.0 if p == g else 0.0


def normalize_units(text: str, table: dict[str, str] | None = None) -> str:
    """Rewrite unit spellings through the table, then squeeze whitespace."""
    table = DEFAULT_UNIT_TABLE if table is None else table
    out = text
    for src, dst in table.items():
        out = out.replace(src, dst)
    return _WS_RE.sub(" ", out).strip()


def score_ptp(pred: str, gold: str, table: dict[str, str] | None = None) -> float:
    """Participation tasks: exact match after unit normalization."""
    return score_exact(normalize_units(pred, table), normalize_units(gold, table))


class JudgeBackend(Protocol):
    """Grades a consultation answer; returns (answer_score, basis_score),
    both in [0, 1]: correctness of the conclusion and of the cited legal
    basis."""

    def judge(self, pred: str, gold: str) -> tuple[float, float]: ...


@dataclass(frozen=True)
class PhraseJudge:
    """Deterministic judge: full marks iff all gold key phrases appear.

    The gold reference may be a JSON object with "answer" and "basis"
    phrase lists; a plain string is treated as a single answer phrase
    with no basis requirement.
    """

    def judge(self, pred: str, gold: str) -> tuple[float, float]:
        answer_phrases, basis_phrases = [gold], []
        try:
            obj = json.loads(gold)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict):
            answer_phrases = [str(p) for p in obj.get("answer", [])]
            basis_phrases = [str(p) for p in obj.get("basis", [])]
        answer_ok = all(p in pred for p in answer_phrases)
        basis_ok = all(p in pred for p in basis_phrases)
        return (1.0 if answer_ok else 0.0, 1.0 if basis_ok else 0.0)


def score_lcs(
    pred: str,
    gold: str,
    judge: JudgeBackend,
    mode: str = MODE_TRAIN,
    cut: float = JUDGE_CUT,
) -> float:
    """Consultation score via the judge backend.

    Training demands both components pass the cut; evaluation reports
    their mean. Judge failures (including out-of-range scores) raise
    JudgeError.
    """
    try:
        answer_score, basis_score = judge.judge(pred, gold)
    except JudgeError:
        raise
    except Exception as exc:
        raise JudgeError(f"judge backend failed: {exc}") from exc
    for value in (answer_score, basis_score):
        if not isinstance(value, (int, float)) or not 0.0 <= float(value) <= 1.0:
            raise JudgeError(f"judge returned out-of-range score {value!r}")
    if mode == MODE_EVAL:
        return (float(answer_score) + float(basis_score)) / 2.0
    return 1.0 if answer_score >= cut and basis_score >= cut else 0.0


@dataclass(frozen=True)
class ScoringConfig:
    ccp_suffixes: tuple[str, ...] = DEFAULT_CCP_SUFFIXES
    unit_table: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_UNIT_TABLE))
    lar_threshold: float = LAR_THRESHOLD
    judge_cut: float = JUDGE_CUT


def _task_score(
    answer: str, item: BenchmarkItem, mode: str, judge: JudgeBackend, config: ScoringConfig
) -> float:
    if item.task == TASK_LAR:
        return score_lar(answer, item.answer, mode, config.lar_threshold)
    if item.task == TASK_CCP:
        return score_ccp(answer, item.answer, config.ccp_suffixes)
    if item.task == TASK_LCS:
        return score_lcs(answer, item.answer, judge, mode, config.judge_cut)
    if item.task == TASK_PTP:
        return score_ptp(answer, item.answer, config.unit_table)
    if item.task in TASK_KINDS:
        return score_exact(answer, item.answer)
    raise ScoringError(f"unknown task kind {item.task!r}")


def reward(
    trajectory: Trajectory,
    item: BenchmarkItem,
    judge: JudgeBackend | None = None,
    config: ScoringConfig | None = None,
) -> float:
    """Binary training reward with the format gate applied first.

    A trajectory that fails format validation earns 0 regardless of its
    answer; otherwise the task-specific binary check decides.
    """
    config = config or ScoringConfig()
    if not validate_format(trajectory):
        return 0.0
    answer = extract_answer(trajectory)
    if answer is None:
        return 0.0
    return _task_score(answer, item, MODE_TRAIN, judge or PhraseJudge(), config)


@dataclass
class ItemScore:
    item_id: str
    task: str
    reward: Optional[float]
    metric: Optional[float]
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "task": self.task,
            "reward": self.reward,
            "metric": self.metric,
            "error": self.error,
        }


@dataclass
class ScoreReport:
    items: list[ItemScore]
    per_task: dict[str, float]
    task_counts: dict[str, int]
    average: Optional[float]

    def to_dict(self) -> dict:
        return {
            "items": [i.to_dict() for i in self.items],
            "per_task": self.per_task,
            "task_counts": self.task_counts,
            "average": self.average,
        }

    def format_table(self) -> str:
        tasks = sorted(self.per_task)
        header = ["task", "n", "score"]
        rows = [[t, str(self.task_counts[t]), f"{self.per_task[t]:.4f}"] for t in tasks]
        if self.average is not None:
            rows.append(["Avg", str(sum(self.task_counts.values())), f"{self.average:.4f}"])
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(3)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        for row in rows:
            lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
        return "\n".join(lines)


def evaluate_run(
    trajectories: Sequence[Trajectory],
    items: Sequence[BenchmarkItem],
    judge: JudgeBackend | None = None,
    config: ScoringConfig | None = None,
) -> ScoreReport:
    """Score one trajectory per item and aggregate per task.

    The eval metric is continuous where the task defines one (recitation
    F1, mean judge score) and the binary reward elsewhere. Items whose
    judge fails are marked unscored with a diagnostic and excluded from
    aggregates. The overall average weights each task equally.
    """
    config = config or ScoringConfig()
    judge = judge or PhraseJudge()
    by_id = {item.id: item for item in items}
    if len(by_id) != len(items):
        raise ScoringError("duplicate item ids")
    if len(trajectories) != len(items):
        raise ScoringError(f"{len(items)} items but {len(trajectories)} trajectories")
    scored: list[ItemScore] = []
    for trajectory in trajectories:
        if trajectory.item_id is None or trajectory.item_id not in by_id:
            raise ScoringError(f"trajectory item id {trajectory.item_id!r} matches no item")
        item = by_id.pop(trajectory.item_id)
        answer = extract_answer(trajectory)
        formatted = validate_format(trajectory)
        try:
            train = (
                _task_score(answer, item, MODE_TRAIN, judge, config)
                if formatted and answer is not None
                else 0.0
            )
            # The eval metric measures answer quality alone; the format
            # gate applies only to the training reward.
            if answer is None:
                metric = 0.0
            else:
                mode = MODE_EVAL if item.task in (TASK_LAR, TASK_LCS) else MODE_TRAIN
                metric = _task_score(answer, item, mode, judge, config)
            scored.append(ItemScore(item.id, item.task, train, metric))
        except JudgeError as exc:
            scored.append(ItemScore(item.id, item.task, None, None, error=str(exc)))
    per_task: dict[str, list[float]] = {}
    counts: dict[str, int] = {}
    for entry in scored:
        counts[entry.task] = counts.get(entry.task, 0) + 1
        if entry.metric is not None:
            per_task.setdefault(entry.task, []).append(entry.metric)
    task_means = {task: sum(vals) / len(vals) for task, vals in per_task.items()}
    average = sum(task_means.values()) / len(task_means) if task_means else None
    return ScoreReport(items=scored, per_task=task_means, task_counts=counts, average=average)
