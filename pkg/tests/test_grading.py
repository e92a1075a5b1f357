"""Question model and grading engine.

The oracle at the top restates the credit rules from scratch; the engine is
judged against it on randomized tests further down. test_acceptance leans on
the same generator and oracle at a larger case count.
"""

import decimal
import random
from fractions import Fraction

import pytest

import agentry as ag
from agentry.grading import (
    FILL_NUMERIC,
    FILL_TEXT,
    MULTIPLE_CHOICE,
    SINGLE_CHOICE,
    TRUE_FALSE,
    test_kind_from_jsonable as kind_from_jsonable,
)
from agentry.model import AgentId


# ---------------------------------------------------------------------------
# Independent oracle
# ---------------------------------------------------------------------------


def oracle_credit(question, answer):
    """Reference restatement of the credit rules: full weight for an exact
    match in the kind's own comparison space, nothing otherwise."""
    if question.kind == SINGLE_CHOICE:
        return type(answer) is int and answer == question.key
    if question.kind == MULTIPLE_CHOICE:
        if not isinstance(answer, (list, tuple, set, frozenset)):
            return False
        chosen = set()
        for element in answer:
            try:
                chosen.add(int(element))
            except (TypeError, ValueError):
                return False
        return chosen == set(question.key)
    if question.kind == TRUE_FALSE:
        return type(answer) is bool and answer == question.key
    if question.kind == FILL_NUMERIC:
        if type(answer) is bool or answer is None:
            return False
        try:
            return decimal.Decimal(str(answer)) == decimal.Decimal(str(question.key))
        except decimal.InvalidOperation:
            return False
    if question.kind == FILL_TEXT:
        if not isinstance(answer, str):
            return False
        return answer.strip().casefold() == question.key.strip().casefold()
    return False


def oracle_grade(test, answers):
    breakdown = {}
    for q in test.questions:
        credited = q.id in answers and oracle_credit(q, answers[q.id])
        breakdown[q.id] = q.weight if credited else Fraction(0)
    return sum(breakdown.values(), Fraction(0)), breakdown


# ---------------------------------------------------------------------------
# Random test and answer generation (shared with the acceptance suite)
# ---------------------------------------------------------------------------

_WEIGHTS = [1, 2, 3, "1/2", "3/2", "2/3", 1.5, 0.25]
_NUMERIC_KEYS = ["0.5", "2", "-3.25", "10", "0.125"]
_TEXT_KEYS = ["alpha", "Beta", " gamma ", "Straße"]


def random_question(rng, qid):
    kind = rng.choice([SINGLE_CHOICE, MULTIPLE_CHOICE, TRUE_FALSE, FILL_NUMERIC, FILL_TEXT])
    weight = rng.choice(_WEIGHTS)
    if kind in (SINGLE_CHOICE, MULTIPLE_CHOICE):
        options = tuple(f"opt{i}" for i in range(rng.randint(2, 5)))
        if kind == SINGLE_CHOICE:
            key = rng.randrange(len(options))
        else:
            key = sorted(rng.sample(range(len(options)), rng.randint(1, len(options))))
        return ag.Question(qid, kind, "?", key, weight, options)
    if kind == TRUE_FALSE:
        key = rng.random() < 0.5
    elif kind == FILL_NUMERIC:
        key = rng.choice(_NUMERIC_KEYS)
    else:
        key = rng.choice(_TEXT_KEYS)
    return ag.Question(qid, kind, "?", key, weight)


def random_test(rng, test_id="t"):
    n = rng.randint(1, 6)
    return ag.Test(test_id, "generated", tuple(random_question(rng, f"q{i}") for i in range(n)))


def _correct_answer(rng, q):
    if q.kind == SINGLE_CHOICE:
        return q.key
    if q.kind == MULTIPLE_CHOICE:
        chosen = list(q.key)
        rng.shuffle(chosen)
        shape = rng.choice(["list", "tuple", "set", "strings", "dupes"])
        if shape == "tuple":
            return tuple(chosen)
        if shape == "set":
            return set(chosen)
        if shape == "strings":
            return [str(i) for i in chosen]
        if shape == "dupes":
            return chosen + chosen[:1]
        return chosen
    if q.kind == TRUE_FALSE:
        return q.key
    if q.kind == FILL_NUMERIC:
        variant = rng.choice(["verbatim", "float", "padded", "signed"])
        if variant == "float":
            return float(q.key)
        if variant == "padded":
            return q.key + "0" if "." in q.key else q.key + ".0"
        if variant == "signed" and not q.key.startswith("-"):
            return "+" + q.key
        return q.key
    return rng.choice([q.key, q.key.upper(), f"  {q.key} "])


def _wrong_answer(rng, q):
    if rng.random() < 0.4:
        # Wrong shape entirely.
        return rng.choice([None, "x", [], {"a": 1}, 3.7, True])
    if q.kind == SINGLE_CHOICE:
        return q.key + 1
    if q.kind == MULTIPLE_CHOICE:
        universe = range(len(q.options) + 1)
        while True:
            guess = set(rng.sample(universe, rng.randint(0, len(universe))))
            if guess != set(q.key):
                return sorted(guess)
    if q.kind == TRUE_FALSE:
        return not q.key
    if q.kind == FILL_NUMERIC:
        return "123456"
    return q.key + "x"


def random_answers(rng, test):
    answers = {}
    for q in test.questions:
        roll = rng.random()
        if roll < 0.2:
            continue  # left blank
        answers[q.id] = _correct_answer(rng, q) if roll < 0.65 else _wrong_answer(rng, q)
    return answers


@pytest.mark.parametrize("seed", range(8))
def test_grade_matches_the_oracle_on_random_tests(seed):
    rng = random.Random(seed)
    for _ in range(50):
        test = random_test(rng)
        answers = random_answers(rng, test)
        want_score, want_breakdown = oracle_grade(test, answers)
        got = ag.grade(test, answers)
        assert got.score == want_score
        assert got.max_score == test.total_weight
        assert got.breakdown == want_breakdown


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------


def test_parse_weight_forms():
    assert ag.parse_weight(3) == Fraction(3)
    assert ag.parse_weight(1.5) == Fraction(3, 2)
    assert ag.parse_weight("3/4") == Fraction(3, 4)
    assert ag.parse_weight("2.5") == Fraction(5, 2)
    assert ag.parse_weight(Fraction(7, 3)) == Fraction(7, 3)


def test_parse_weight_rejects_booleans_and_garbage():
    with pytest.raises(ValueError):
        ag.parse_weight(True)
    with pytest.raises(ValueError):
        ag.parse_weight(False)
    with pytest.raises(ValueError):
        ag.parse_weight("three")


def test_weight_jsonable_round_trips():
    for w in [Fraction(3), Fraction(3, 2), Fraction(-1, 4), Fraction(0)]:
        assert ag.parse_weight(ag.weight_to_jsonable(w)) == w
    assert ag.weight_to_jsonable(Fraction(3)) == 3
    assert ag.weight_to_jsonable(Fraction(3, 2)) == "3/2"


# ---------------------------------------------------------------------------
# Question validation and serialization
# ---------------------------------------------------------------------------


def q(kind, key, options=(), weight=1):
    return ag.Question("q1", kind, "?", key, weight, tuple(options))


def test_question_rejects_unknown_kind():
    with pytest.raises(ValueError):
        q("essay", "anything")


def test_question_rejects_non_positive_weight():
    with pytest.raises(ValueError):
        q(TRUE_FALSE, True, weight=0)
    with pytest.raises(ValueError):
        q(TRUE_FALSE, True, weight="-1/2")


def test_choice_question_needs_options():
    with pytest.raises(ValueError):
        q(SINGLE_CHOICE, 0)


def test_choice_key_must_index_the_options():
    with pytest.raises(ValueError):
        q(SINGLE_CHOICE, 5, options=("a", "b", "c"))
    with pytest.raises(ValueError):
        q(MULTIPLE_CHOICE, [-1], options=("a", "b"))
    with pytest.raises(ValueError):
        q(SINGLE_CHOICE, "a", options=("a", "b"))


def test_multiple_choice_key_normalizes_to_a_set():
    question = q(MULTIPLE_CHOICE, [2, 0], options=("a", "b", "c"))
    assert question.key == frozenset({0, 2})
    assert question.to_jsonable()["key"] == [0, 2]


def test_keys_must_match_their_kind():
    with pytest.raises(ValueError):
        q(TRUE_FALSE, 1)
    with pytest.raises(ValueError):
        q(FILL_NUMERIC, "half")
    with pytest.raises(ValueError):
        q(FILL_TEXT, 42)


def test_question_round_trips_for_every_kind():
    rng = random.Random(99)
    for _ in range(40):
        question = random_question(rng, "q1")
        assert ag.Question.from_jsonable(question.to_jsonable()) == question


# ---------------------------------------------------------------------------
# Tests
# ---------------------------------------------------------------------------


def small_test(**kw):
    return ag.Test(
        "t1",
        "Sample",
        (
            ag.Question("a", SINGLE_CHOICE, "?", 1, "1/2", ("x", "y")),
            ag.Question("b", TRUE_FALSE, "?", False, "1/3"),
        ),
        **kw,
    )


def test_test_needs_questions():
    with pytest.raises(ValueError):
        ag.Test("t", "empty", ())


def test_test_rejects_duplicate_question_ids():
    question = ag.Question("a", TRUE_FALSE, "?", True, 1)
    with pytest.raises(ValueError):
        ag.Test("t", "dup", (question, question))


def test_total_weight_is_an_exact_sum():
    assert small_test().total_weight == Fraction(5, 6)


def test_question_lookup():
    test = small_test()
    assert test.question("b").kind == TRUE_FALSE
    with pytest.raises(ag.UnknownQuestionId):
        test.question("zz")


def test_test_round_trips_with_both_kinds():
    pull = small_test()
    push = small_test(kind=ag.Exam(scheduled_at=40))
    assert ag.Test.from_jsonable(pull.to_jsonable()) == pull
    assert ag.Test.from_jsonable(push.to_jsonable()) == push


def test_unknown_test_kind_is_rejected():
    with pytest.raises(ValueError):
        kind_from_jsonable({"kind": "quiz"})


# ---------------------------------------------------------------------------
# Matching boundaries
# ---------------------------------------------------------------------------


def test_single_choice_matching():
    question = q(SINGLE_CHOICE, 1, options=("a", "b", "c"))
    assert ag.answer_matches(question, 1)
    assert not ag.answer_matches(question, 2)
    assert not ag.answer_matches(question, True)  # bools are not indices
    assert not ag.answer_matches(question, "1")
    assert not ag.answer_matches(question, None)


def test_multiple_choice_matching_is_set_equality():
    question = q(MULTIPLE_CHOICE, [0, 2], options=("a", "b", "c"))
    assert ag.answer_matches(question, [2, 0])
    assert ag.answer_matches(question, (0, 2))
    assert ag.answer_matches(question, {0, 2})
    assert ag.answer_matches(question, [0, 2, 0])  # duplicates collapse
    assert ag.answer_matches(question, ["0", "2"])  # digits count as indices
    assert not ag.answer_matches(question, [0])  # subset earns nothing
    assert not ag.answer_matches(question, [0, 1, 2])  # superset too
    assert not ag.answer_matches(question, 0)
    assert not ag.answer_matches(question, "02")
    assert not ag.answer_matches(question, [0, "x"])


def test_true_false_matching():
    question = q(TRUE_FALSE, True)
    assert ag.answer_matches(question, True)
    assert not ag.answer_matches(question, False)
    assert not ag.answer_matches(question, 1)
    assert not ag.answer_matches(question, "true")


def test_numeric_matching_compares_decimals():
    question = q(FILL_NUMERIC, "0.5")
    assert ag.answer_matches(question, "0.5")
    assert ag.answer_matches(question, 0.5)
    assert ag.answer_matches(question, ".5")
    assert ag.answer_matches(question, "0.50")
    assert not ag.answer_matches(question, "1/2")
    assert not ag.answer_matches(question, None)
    assert not ag.answer_matches(question, True)
    assert not ag.answer_matches(question, "abc")
    whole = q(FILL_NUMERIC, "2.0")
    assert ag.answer_matches(whole, 2)
    assert ag.answer_matches(whole, "2")


def test_text_matching_trims_and_casefolds():
    question = q(FILL_TEXT, "mars")
    assert ag.answer_matches(question, "mars")
    assert ag.answer_matches(question, "  Mars ")
    assert ag.answer_matches(question, "MARS")
    assert not ag.answer_matches(question, "mars!")
    assert not ag.answer_matches(question, 42)
    sharp = q(FILL_TEXT, "straße")
    assert ag.answer_matches(sharp, "STRASSE")


# ---------------------------------------------------------------------------
# Grading
# ---------------------------------------------------------------------------


def test_grade_scores_and_breakdown():
    result = ag.grade(small_test(), {"a": 1, "b": True})
    assert result.score == Fraction(1, 2)
    assert result.max_score == Fraction(5, 6)
    assert result.breakdown == {"a": Fraction(1, 2), "b": Fraction(0)}


def test_unanswered_questions_score_zero():
    result = ag.grade(small_test(), {})
    assert result.score == 0
    assert result.breakdown == {"a": Fraction(0), "b": Fraction(0)}


def test_answers_for_foreign_questions_are_rejected():
    with pytest.raises(ag.UnknownQuestionId):
        ag.grade(small_test(), {"zz": 1})


def test_no_partial_credit():
    test = ag.Test(
        "t", "multi", (ag.Question("m", MULTIPLE_CHOICE, "?", [0, 1], 4, ("a", "b", "c")),)
    )
    assert ag.grade(test, {"m": [0]}).score == 0
    assert ag.grade(test, {"m": [0, 1]}).score == 4


# ---------------------------------------------------------------------------
# Submissions, reports, progress
# ---------------------------------------------------------------------------


def test_submission_score_must_fit_the_scale():
    with pytest.raises(ValueError):
        ag.Submission("t", AgentId(1), {}, Fraction(9), Fraction(5), 0)
    with pytest.raises(ValueError):
        ag.Submission("t", AgentId(1), {}, Fraction(-1), Fraction(5), 0)


def test_submission_round_trips():
    sub = ag.Submission("t", AgentId(7), {"a": [0, 2]}, Fraction(5, 2), Fraction(17, 2), 12)
    assert ag.Submission.from_jsonable(sub.to_jsonable()) == sub


def test_exam_report_round_trips():
    sub = ag.Submission("t", AgentId(7), {}, Fraction(1), Fraction(2), 3)
    report = ag.ExamReport("t", ("north", "south"), ("river",), (sub,))
    assert ag.ExamReport.from_jsonable(report.to_jsonable()) == report


def test_exam_report_rejects_delivered_and_missed_overlap():
    with pytest.raises(ValueError):
        ag.ExamReport("t", ("north",), ("north",), ())


def test_progress_record_round_trips_and_stays_minimal():
    record = ag.ProgressRecord(AgentId(3), "t9", Fraction(7, 2), at=44)
    assert ag.ProgressRecord.from_jsonable(record.to_jsonable()) == record
    # The persisted shape carries no answers and no scale, by design.
    assert set(record.to_jsonable()) == {"student", "test_id", "score", "at"}
