"""Task scorers, the format-gated reward, and run-level aggregation."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from temporalex import (
    Action,
    BenchmarkItem,
    JudgeError,
    PhraseJudge,
    ScoringConfig,
    ScoringError,
    Step,
    Trajectory,
    evaluate_run,
    reward,
    rouge_l_char,
    score_ccp,
    score_exact,
    score_lar,
    score_lcs,
    score_ptp,
)
from temporalex.scoring import normalize_units, parse_labels


def answered(text, item_id=None, valid=True):
    """A minimal trajectory that answers with `text`; optionally malformed."""
    steps = [
        Step(think="t", action=Action.plan("p")),
        Step(think="t", action=Action.answer(text)),
    ]
    if not valid:
        steps = steps[1:]  # drops the round-0 plan, failing the grammar
    return Trajectory(system_prompt="S", query="Q", steps=steps, item_id=item_id)


def item(id, task="LAR", answer="gold"):
    return BenchmarkItem(id=id, task=task, question="q", answer=answer)


# --- rouge ------------------------------------------------------------------

def test_rouge_hand_cases():
    assert rouge_l_char("abc", "abc") == 1.0
    assert rouge_l_char("abc", "axc") == 2 / 3
    assert rouge_l_char("abc", "xyz") == 0.0
    assert rouge_l_char("", "abc") == 0.0
    assert rouge_l_char("abc", "") == 0.0


def test_rouge_is_symmetric_in_f1():
    assert rouge_l_char("abcd", "abc") == rouge_l_char("abc", "abcd")


def lcs_table(a, b):
    """Quadratic-space LCS for cross-checking the rolling-row version."""
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i, ch_a in enumerate(a, 1):
        for j, ch_b in enumerate(b, 1):
            table[i][j] = (table[i - 1][j - 1] + 1 if ch_a == ch_b
                           else max(table[i - 1][j], table[i][j - 1]))
    return table[len(a)][len(b)]


@given(st.text("ab甲乙", max_size=24), st.text("ab甲乙", max_size=24))
def test_rouge_matches_the_full_dp_table(pred, gold):
    if not pred or not gold:
        assert rouge_l_char(pred, gold) == 0.0
        return
    lcs = lcs_table(pred, gold)
    if lcs == 0:
        assert rouge_l_char(pred, gold) == 0.0
    else:
        p, r = lcs / len(pred), lcs / len(gold)
        assert rouge_l_char(pred, gold) == 2 * p * r / (p + r)


def test_lar_threshold_is_inclusive_at_the_boundary():
    # 19 shared chars out of 20 on both sides: F1 is the float just above
    # 0.95, so the inclusive threshold passes it.
    pred, gold = "a" * 19 + "b", "a" * 19 + "c"
    assert rouge_l_char(pred, gold) == 0.9500000000000001
    assert score_lar(pred, gold) == 1.0


def test_lar_rejects_just_below_the_threshold():
    # 28 shared out of 30 vs 29: F1 is 56/59, just under 0.95.
    pred, gold = "a" * 28 + "xx", "a" * 28 + "y"
    assert rouge_l_char(pred, gold) == 0.9491525423728815
    assert score_lar(pred, gold) == 0.0


def test_lar_eval_mode_reports_the_raw_metric():
    pred, gold = "a" * 28 + "xx", "a" * 28 + "y"
    assert score_lar(pred, gold, mode="eval") == 0.9491525423728815
    assert score_lar("same", "same", mode="eval") == 1.0


# --- charge prediction ---------------------------------------------------------

def test_parse_labels_strips_suffix_and_casefolds():
    assert parse_labels("盗窃罪、抢劫罪") == frozenset({"盗窃", "抢劫"})
    assert parse_labels("Theft; ROBBERY") == frozenset({"theft", "robbery"})
    assert parse_labels("罪") == frozenset({"罪"})  # bare suffix stays a label
    assert parse_labels("") == frozenset()


def test_ccp_ignores_order_and_delimiters():
    assert score_ccp("盗窃罪，抢劫", "抢劫罪、盗窃") == 1.0
    assert score_ccp("theft/robbery", "robbery; theft") == 1.0


def test_ccp_demands_the_exact_set():
    assert score_ccp("盗窃", "盗窃、抢劫") == 0.0  # subset
    assert score_ccp("盗窃、抢劫、诈骗", "盗窃、抢劫") == 0.0  # superset
    assert score_ccp("anything", "") == 0.0  # empty gold never matches


def test_ccp_custom_suffixes():
    assert score_ccp("theft-crime", "theft", suffixes=("-crime",)) == 1.0


def test_suffix_stripping_iterates():
    assert parse_labels("盗窃罪罪") == frozenset({"盗窃"})


# --- exact and participation ------------------------------------------------------

def test_exact_match_trims_and_casefolds():
    assert score_exact(" c ", "C") == 1.0
    assert score_exact("12", "21") == 0.0
    assert score_exact("yes", "no") == 0.0


def test_pure_alpha_answers_compare_as_character_sets():
    assert score_exact("BA", "AB") == 1.0
    assert score_exact("ABC", "AB") == 0.0
    assert score_exact("A1", "1A") == 0.0  # digits disable the set rule


def test_unit_normalization():
    assert normalize_units("12个月") == "12 months"
    assert normalize_units("3年") == "3 years"
    assert normalize_units("5000元") == "5000 yuan"
    assert normalize_units("  padded   out  ") == "padded out"


def test_ptp_matches_across_unit_spellings():
    assert score_ptp("12个月", "12 months") == 1.0
    assert score_ptp("3年", "3 years") == 1.0
    assert score_ptp("5000元", "5000 yuan") == 1.0
    assert score_ptp("12个月", "13 months") == 0.0


def test_ptp_custom_table():
    assert score_ptp("2 wk", "2 weeks", table={"wk": "weeks"}) == 1.0


# --- consultation judging -----------------------------------------------------------

def test_phrase_judge_plain_string_gold():
    judge = PhraseJudge()
    assert judge.judge("the notarized will prevails here", "notarized will") == (1.0, 1.0)
    assert judge.judge("no mention", "notarized will") == (0.0, 1.0)


def test_phrase_judge_structured_gold():
    gold = json.dumps({"answer": ["may revoke"], "basis": ["Article 1142"]})
    judge = PhraseJudge()
    assert judge.judge("You may revoke it under Article 1142.", gold) == (1.0, 1.0)
    assert judge.judge("You may revoke it.", gold) == (1.0, 0.0)
    assert judge.judge("See Article 1142.", gold) == (0.0, 1.0)


def test_phrase_judge_missing_basis_key_means_no_requirement():
    gold = json.dumps({"answer": ["ok"]})
    assert PhraseJudge().judge("ok then", gold) == (1.0, 1.0)


class FixedJudge:
    def __init__(self, answer_score, basis_score):
        self.scores = (answer_score, basis_score)

    def judge(self, pred, gold):
        return self.scores


def test_lcs_training_demands_both_components_pass():
    assert score_lcs("p", "g", FixedJudge(0.6, 0.5)) == 1.0
    assert score_lcs("p", "g", FixedJudge(0.6, 0.4)) == 0.0
    assert score_lcs("p", "g", FixedJudge(0.4, 0.9)) == 0.0


def test_lcs_eval_reports_the_mean():
    assert score_lcs("p", "g", FixedJudge(0.6, 0.4), mode="eval") == 0.5


def test_judge_failures_are_wrapped():
    class Broken:
        def judge(self, pred, gold):
            raise ConnectionError("judge offline")

    with pytest.raises(JudgeError, match="judge backend failed: judge offline"):
        score_lcs("p", "g", Broken())


def test_out_of_range_judge_scores_are_rejected():
    with pytest.raises(JudgeError, match="out-of-range score 1.5"):
        score_lcs("p", "g", FixedJudge(1.5, 0.5))
    with pytest.raises(JudgeError, match="out-of-range"):
        score_lcs("p", "g", FixedJudge(0.5, -0.1))


# --- the reward gate ------------------------------------------------------------------

def test_reward_requires_format_validity():
    gold = item("x", task="LAR", answer="exact text")
    assert reward(answered("exact text"), gold) == 1.0
    assert reward(answered("exact text", valid=False), gold) == 0.0


def test_reward_zero_without_an_answer():
    unanswered = Trajectory(system_prompt="S", query="Q",
                            steps=[Step(think="t", action=Action.plan("p"))])
    assert reward(unanswered, item("x")) == 0.0


def test_reward_dispatches_on_the_task_kind():
    assert reward(answered("12个月"), item("x", task="PTP", answer="12 months")) == 1.0
    assert reward(answered("BA"), item("x", task="OOD_MC", answer="AB")) == 1.0
    assert reward(answered("盗窃罪"), item("x", task="CCP", answer="盗窃")) == 1.0
    assert reward(answered("wrong"), item("x", task="KQA", answer="right")) == 0.0


def test_reward_unknown_task_kind_raises():
    with pytest.raises(ScoringError, match="unknown task kind 'XXX'"):
        reward(answered("a"), item("x", task="XXX"))


def test_scoring_config_overrides_flow_through():
    config = ScoringConfig(lar_threshold=0.5)
    # Two of three chars shared: F1=2/3 passes a 0.5 threshold.
    assert reward(answered("abc"), item("x", answer="axc"), config=config) == 1.0


# --- run evaluation ---------------------------------------------------------------

def test_evaluate_run_aggregates_per_task():
    items = [item("a", "LAR", "text one"), item("b", "LAR", "text two"),
             item("c", "KQA", "yes")]
    trajectories = [answered("text one", "a"), answered("wrong", "b"),
                    answered("yes", "c")]
    report = evaluate_run(trajectories, items)
    assert report.task_counts == {"LAR": 2, "KQA": 1}
    lar_mean = (1.0 + rouge_l_char("wrong", "text two")) / 2
    assert report.per_task["LAR"] == lar_mean
    assert report.per_task["KQA"] == 1.0
    assert report.average == (lar_mean + 1.0) / 2  # tasks weigh equally


def test_evaluate_run_metric_ignores_the_format_gate():
    items = [item("a", "LAR", "the text")]
    report = evaluate_run([answered("the text", "a", valid=False)], items)
    assert report.items[0].reward == 0.0
    assert report.items[0].metric == 1.0


def test_evaluate_run_order_independent_matching():
    items = [item("a", "KQA", "1"), item("b", "KQA", "2")]
    report = evaluate_run([answered("2", "b"), answered("1", "a")], items)
    assert [s.item_id for s in report.items] == ["b", "a"]
    assert report.average == 1.0


def test_evaluate_run_input_validation():
    with pytest.raises(ScoringError, match="duplicate item ids"):
        evaluate_run([answered("x", "a")], [item("a"), item("a")])
    with pytest.raises(ScoringError, match="2 items but 1 trajectories"):
        evaluate_run([answered("x", "a")], [item("a"), item("b")])
    with pytest.raises(ScoringError, match="matches no item"):
        evaluate_run([answered("x", "zz")], [item("a")])
    with pytest.raises(ScoringError, match="matches no item"):
        # A second trajectory for the same item hits the consumed-id check.
        evaluate_run([answered("x", "a"), answered("y", "a")],
                     [item("a"), item("b")])


def test_judge_failures_mark_items_unscored_but_keep_the_run():
    class Broken:
        def judge(self, pred, gold):
            raise RuntimeError("offline")

    items = [item("a", "LCS", "advice"), item("b", "KQA", "yes")]
    report = evaluate_run([answered("x", "a"), answered("yes", "b")], items,
                          judge=Broken())
    failed = next(s for s in report.items if s.item_id == "a")
    assert failed.reward is None and failed.metric is None
    assert "offline" in failed.error
    assert report.per_task == {"KQA": 1.0}  # the failed task is excluded
    assert report.task_counts == {"LCS": 1, "KQA": 1}


def test_format_table_lists_tasks_then_average():
    items = [item("a", "LAR", "t"), item("b", "KQA", "y")]
    report = evaluate_run([answered("t", "a"), answered("y", "b")], items)
    table = report.format_table()
    lines = table.splitlines()
    assert lines[0].split() == ["task", "n", "score"]
    assert lines[1].split() == ["KQA", "1", "1.0000"]
    assert lines[2].split() == ["LAR", "1", "1.0000"]
    assert lines[3].split() == ["Avg", "2", "1.0000"]
