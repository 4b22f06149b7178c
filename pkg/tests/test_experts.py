from __future__ import annotations

import datetime as dt
import json

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expertrade.experts import (
    BackendError,
    ComparisonChoice,
    ExpertKind,
    ExpertReport,
    FiveClassLabel,
    LatentScoreMock,
    MissingPrediction,
    MockBackend,
    RemoteBackend,
    RemoteConfig,
    ScriptedBackend,
    UnknownLabel,
    build_general_compare_prompt,
    build_news_prompt,
    general_compare,
    general_predict,
    parse_choice,
    parse_response,
    render_response,
    summarize_reports,
)
from expertrade.experts.backends import digest_votes, eps_growth_class, majority
from expertrade.market_data import MovementLabel

DAY = dt.date(2023, 12, 15)
RISE, FALL = MovementLabel.RISE, MovementLabel.FALL


def report(kind, prediction, reasoning=None, ticker="AAPL", date=DAY):
    return ExpertReport(kind, ticker, date, prediction, reasoning, render_response(prediction, reasoning))


def four_reports(ticker="AAPL", market=FALL):
    return [
        report(ExpertKind.NEWS, RISE, "Upbeat coverage of the product cycle. Services keep growing.", ticker),
        report(ExpertKind.MARKET, market, None, ticker),
        report(ExpertKind.ALPHA, RISE, None, ticker),
        report(ExpertKind.FUNDAMENTAL, FiveClassLabel.MODERATE_RISE, "Margins improved.", ticker),
    ]


# --- parsing ---------------------------------------------------------------


def test_parse_reasoning_and_prediction():
    pred, why = parse_response("Reasoning: strong demand...\nPrediction: Rise", ExpertKind.NEWS)
    assert pred is RISE and why == "strong demand..."


def test_parse_case_fold_five_class():
    pred, why = parse_response("Prediction: MODERATE RISE", ExpertKind.FUNDAMENTAL)
    assert pred is FiveClassLabel.MODERATE_RISE and why is None


def test_parse_last_prediction_wins_and_trailing_commentary():
    raw = "Prediction: Fall\nReasoning: changed my mind\nPrediction:  rise (high confidence)"
    assert parse_response(raw, ExpertKind.MARKET)[0] is RISE


def test_parse_errors():
    with pytest.raises(MissingPrediction):
        parse_response("I think it goes up", ExpertKind.NEWS)
    with pytest.raises(UnknownLabel) as err:
        parse_response("Prediction: Sideways", ExpertKind.NEWS)
    assert "Sideways" in str(err.value)
    with pytest.raises(UnknownLabel):
        parse_response("Prediction: Rise", ExpertKind.FUNDAMENTAL)


def test_parse_choice():
    assert parse_choice("Stock AAA", "AAA", "BBB") is ComparisonChoice.STOCK_A
    assert parse_choice("I prefer stock bbb.", "AAA", "BBB") is ComparisonChoice.STOCK_B
    with pytest.raises(UnknownLabel):
        parse_choice("Stock CCC", "AAA", "BBB")
    with pytest.raises(MissingPrediction):
        parse_choice("no idea", "AAA", "BBB")


_reasoning = st.text(alphabet="abcdefghij klmnop.,!?", min_size=1, max_size=80).filter(
    lambda s: s.strip() and "prediction" not in s.lower() and "reasoning" not in s.lower()
)


@settings(max_examples=100, deadline=None)
@given(
    kind=st.sampled_from([ExpertKind.NEWS, ExpertKind.MARKET, ExpertKind.ALPHA, ExpertKind.FUNDAMENTAL]),
    data=st.data(),
    reasoning=st.one_of(st.none(), _reasoning),
)
def test_parse_render_round_trip(kind, data, reasoning):
    labels = list(FiveClassLabel) if kind is ExpertKind.FUNDAMENTAL else [RISE, FALL]
    pred = data.draw(st.sampled_from(labels))
    expected_reasoning = reasoning.strip() if reasoning else None
    assert parse_response(render_response(pred, reasoning), kind) == (pred, expected_reasoning)


# --- summaries -------------------------------------------------------------


def test_summary_within_budget_keeps_everything_in_fixed_order():
    reports = four_reports()
    summary = summarize_reports(list(reversed(reports)), budget=2000)
    assert summary.kinds == (ExpertKind.NEWS, ExpertKind.MARKET, ExpertKind.ALPHA, ExpertKind.FUNDAMENTAL)
    for r in reports:
        if r.reasoning:
            assert r.reasoning in summary.text
    assert summary.text.startswith("Input from News Analyst:")


def test_summary_truncates_at_sentence_boundary():
    long = " ".join(f"Sentence number {i} is here." for i in range(200))
    r = report(ExpertKind.NEWS, RISE, long)
    for budget in (60, 200, 500, 1000):
        summary = summarize_reports([r], budget=budget)
        assert len(summary.text) <= budget
        assert summary.text.endswith("- Prediction: Rise")
        body = summary.text.split("- Reasoning: ")[-1] if "Reasoning" in summary.text else ""
        if body:
            assert body.split("\n")[0].endswith(".")


@settings(max_examples=60, deadline=None)
@given(budget=st.integers(300, 3000), n=st.integers(0, 40))
def test_summary_length_never_exceeds_budget(budget, n):
    text = " ".join(f"Word{i} goes here." for i in range(n)) or None
    reports = [report(k, FiveClassLabel.NO_CHANGE if k is ExpertKind.FUNDAMENTAL else FALL, text)
               for k in (ExpertKind.NEWS, ExpertKind.MARKET, ExpertKind.ALPHA, ExpertKind.FUNDAMENTAL)]
    assert len(summarize_reports(reports, budget).text) <= budget


def test_summary_budget_too_small_for_headers():
    with pytest.raises(ValueError, match="cannot hold"):
        summarize_reports(four_reports(), budget=100)


def test_summary_two_reports_only():
    summary = summarize_reports(four_reports()[1:3])
    assert summary.kinds == (ExpertKind.MARKET, ExpertKind.ALPHA)
    assert summary.text.count("Input from") == 2


def test_summary_rejects_bad_input():
    with pytest.raises(ValueError):
        summarize_reports([])
    r = four_reports()
    with pytest.raises(ValueError):
        summarize_reports([r[0], r[0]])
    with pytest.raises(ValueError):
        summarize_reports([r[0], four_reports("MSFT")[1]])


# --- mocks and the General Expert -----------------------------------------


def test_majority_vote_scenario_predicts_rise():
    summary = summarize_reports(four_reports())
    votes = digest_votes(summary.text)
    assert votes == {ExpertKind.NEWS: 1, ExpertKind.MARKET: -1, ExpertKind.ALPHA: 1, ExpertKind.FUNDAMENTAL: 1}
    out = general_predict(summary, MockBackend())
    assert out.prediction is RISE
    assert "Prediction: Rise" in out.raw_response


def test_majority_tie_breaks():
    assert majority({ExpertKind.NEWS: 1, ExpertKind.MARKET: -1}) == -1
    assert majority({ExpertKind.NEWS: -1, ExpertKind.MARKET: 1}) == 1
    assert majority({ExpertKind.NEWS: 0}) == -1


@pytest.mark.parametrize(
    "growth,label",
    [(0.2, "Strong Rise"), (0.05, "Moderate Rise"), (0.0, "No Change"), (-0.02, "No Change"),
     (-0.05, "Moderate Fall"), (-0.5, "Strong Fall")],
)
def test_eps_growth_class(growth, label):
    assert eps_growth_class(growth).value == label


def test_news_mock_counts_sentiment():
    bundle = build_news_prompt("Strong growth and a record quarter, despite one lawsuit.", 1)
    assert MockBackend().answer(bundle).endswith("Prediction: Rise")
    assert MockBackend().answer(build_news_prompt("Weak guidance.", 1)).endswith("Prediction: Fall")


def test_compare_latent_scores():
    sa = summarize_reports(four_reports("AAA"))
    sb = summarize_reports(four_reports("BBB"))
    mock = LatentScoreMock({"AAA": 2.0, "BBB": 1.0})
    assert general_compare(sa, sb, mock).choice is ComparisonChoice.STOCK_A
    assert general_compare(sb, sa, mock).choice is ComparisonChoice.STOCK_B


class Sequenced:
    identity = "seq"
    deterministic = False

    def __init__(self, answers):
        self.answers = list(answers)
        self.calls = 0

    def answer(self, bundle):
        self.calls += 1
        return self.answers.pop(0)


def test_compare_retries_then_parses():
    sa, sb = summarize_reports(four_reports("AAA")), summarize_reports(four_reports("BBB"))
    backend = Sequenced(["garbage", "Stock ZZZ", "Stock BBB"])
    result = general_compare(sa, sb, backend, retries=3)
    assert result.choice is ComparisonChoice.STOCK_B
    assert result.attempts == 3 and not result.fallback and backend.calls == 3


@pytest.mark.parametrize("first,second,winner", [("AAA", "BBB", "AAA"), ("BBB", "AAA", "AAA")])
def test_compare_falls_back_to_smaller_ticker(first, second, winner):
    sa, sb = summarize_reports(four_reports(first)), summarize_reports(four_reports(second))
    result = general_compare(sa, sb, Sequenced(["?"] * 3), retries=3)
    assert result.fallback and result.attempts == 3 and result.winner == winner


def test_compare_rejects_same_ticker_and_propagates_backend_errors():
    s = summarize_reports(four_reports("AAA"))
    with pytest.raises(ValueError):
        general_compare(s, s, MockBackend())

    class Broken:
        identity, deterministic = "broken", True

        def answer(self, bundle):
            raise BackendError("down")

    with pytest.raises(BackendError):
        general_compare(s, summarize_reports(four_reports("BBB")), Broken())


@settings(max_examples=50, deadline=None)
@given(ma=st.sampled_from([RISE, FALL]), mb=st.sampled_from([RISE, FALL]))
def test_compare_symmetric_mock_flips_with_argument_order(ma, mb):
    sa = summarize_reports(four_reports("AAA", market=ma))
    sb = summarize_reports(four_reports("BBB", market=mb))
    forward = general_compare(sa, sb, MockBackend())
    backward = general_compare(sb, sa, MockBackend())
    if ma != mb:
        assert forward.winner == backward.winner
    else:
        assert forward.choice is ComparisonChoice.STOCK_A and backward.choice is ComparisonChoice.STOCK_A


# --- scripted backend ------------------------------------------------------


def test_scripted_replay(tmp_path):
    path = tmp_path / "script.jsonl"
    rows = [
        {"kind": "news", "ticker": "AAPL", "date": "2023-12-15", "response": "Prediction: Fall"},
        {"kind": "general_compare", "ticker": "AAA|BBB", "date": "2023-12-15", "response": "Stock BBB"},
    ]
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    backend = ScriptedBackend.from_jsonl(path)
    assert backend.answer(build_news_prompt("anything", 1, ticker="AAPL", date=DAY)) == "Prediction: Fall"
    cmp_bundle = build_general_compare_prompt("AAA", "a", "BBB", "b", 1, date=DAY)
    assert backend.answer(cmp_bundle) == "Stock BBB"
    with pytest.raises(BackendError):
        backend.answer(build_news_prompt("x", 1, ticker="MSFT", date=DAY))


def test_scripted_rejects_malformed_lines(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"kind": "news"}\n')
    with pytest.raises(ValueError, match="missing keys"):
        ScriptedBackend.from_jsonl(path)


# --- remote backend --------------------------------------------------------


def chat(text):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


def remote(handler, **cfg):
    sleeps = []
    config = RemoteConfig(url="https://llm.test/v1/chat", model="m1", **cfg)
    backend = RemoteBackend(config, httpx.Client(transport=httpx.MockTransport(handler)), sleep=sleeps.append)
    return backend, sleeps


def test_remote_request_shape_and_auth(monkeypatch):
    monkeypatch.setenv("EXPERTRADE_API_KEY", "sekret")
    seen = []

    def handler(request):
        seen.append(request)
        return chat("Prediction: Rise")

    backend, _ = remote(handler)
    bundle = build_news_prompt("article", 1)
    assert backend.answer(bundle) == "Prediction: Rise"
    body = json.loads(seen[0].content)
    assert body == {
        "model": "m1",
        "messages": [{"role": "system", "content": bundle.instruction}, {"role": "user", "content": bundle.prompt}],
    }
    assert seen[0].headers["Authorization"] == "Bearer sekret"
    assert seen[0].method == "POST"


def test_remote_retries_with_backoff():
    statuses = iter([503, 429, 200])

    def handler(request):
        code = next(statuses)
        return chat("ok") if code == 200 else httpx.Response(code)

    backend, sleeps = remote(handler, backoff_base=0.5, max_retries=3)
    assert backend.answer(build_news_prompt("a", 1)) == "ok"
    assert sleeps == [0.5, 1.0]


def test_remote_transport_errors_exhaust_retries():
    calls = []

    def handler(request):
        calls.append(1)
        raise httpx.ConnectError("refused", request=request)

    backend, sleeps = remote(handler, max_retries=2, backoff_base=1.0, backoff_max=1.5)
    with pytest.raises(BackendError, match="3 attempts"):
        backend.answer(build_news_prompt("a", 1))
    assert len(calls) == 3 and sleeps == [1.0, 1.5]


def test_remote_client_error_is_not_retried():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(401, text="bad key")

    backend, _ = remote(handler)
    with pytest.raises(BackendError, match="401"):
        backend.answer(build_news_prompt("a", 1))
    assert len(calls) == 1


def test_remote_custom_response_path():
    backend, _ = remote(lambda r: httpx.Response(200, json={"out": {"text": "Stock AAA"}}), response_path="out.text")
    assert backend.answer(build_news_prompt("a", 1)) == "Stock AAA"
    backend, _ = remote(lambda r: httpx.Response(200, json={"nope": 1}))
    with pytest.raises(BackendError):
        backend.answer(build_news_prompt("a", 1))


def test_remote_in_flight_bound():
    import threading
    import time

    active, peak, lock = [0], [0], threading.Lock()

    def handler(request):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        time.sleep(0.02)
        with lock:
            active[0] -= 1
        return chat("x")

    backend, _ = remote(handler, max_in_flight=2)
    threads = [threading.Thread(target=backend.answer, args=(build_news_prompt("a", 1),)) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak[0] <= 2
