import json

import pytest
import requests

from tableforge import prompts
from tableforge.llm import (
    ChatRequest,
    ExtractionError,
    GenerationError,
    MockChatProvider,
    RemoteChatProvider,
    TransportError,
    double_cell,
    extract_json_object,
    generate_description,
    mock_description,
)
from tableforge.serialize import to_llm_json
from tableforge.tables import Table


class TestChatRequest:
    def test_defaults(self):
        req = ChatRequest(user_prompt="hi")
        assert req.system_prompt == prompts.SYSTEM_PROMPT
        assert req.max_output_tokens == 1024
        assert req.temperature == 0.7

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            ChatRequest(user_prompt="hi", temperature=-0.1)

    def test_zero_max_tokens_rejected(self):
        with pytest.raises(ValueError):
            ChatRequest(user_prompt="hi", max_output_tokens=0)


class TestExtractJsonObject:
    def test_bare_object(self):
        assert extract_json_object('{"a": 1}') == '{"a": 1}'

    def test_prose_wrapped(self):
        s = 'Sure! Here is the table:\n{"a": 1}\nHope that helps.'
        assert extract_json_object(s) == '{"a": 1}'

    def test_first_object_wins(self):
        assert extract_json_object('{"a": 1} {"b": 2}') == '{"a": 1}'

    def test_braces_inside_strings(self):
        s = '{"a": "{not a nested object}", "b": 2}'
        assert json.loads(extract_json_object(s)) == {
            "a": "{not a nested object}",
            "b": 2,
        }

    def test_unbalanced_prefix_skipped(self):
        s = '{oops {"a": 1}'
        assert extract_json_object(s) == '{"a": 1}'

    def test_array_is_not_an_object(self):
        with pytest.raises(ExtractionError):
            extract_json_object('[1, 2, 3]')

    def test_no_json_raises(self):
        with pytest.raises(ExtractionError):
            extract_json_object("no structured data here")


class _FakeResponse:
    def __init__(self, status_code=200, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("not json")
        return self._payload


class _FakeSession:
    """Scripted session: pops one outcome per post() call."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append(
            {"url": url, "json": json, "headers": headers, "timeout": timeout}
        )
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


def _ok_response(content="hello"):
    return _FakeResponse(
        payload={"choices": [{"message": {"content": content}}]}
    )


def _provider(session, **kwargs):
    kwargs.setdefault("sleep", lambda s: None)
    return RemoteChatProvider(
        endpoint="http://models.internal",
        model="test-model",
        session=session,
        **kwargs,
    )


class TestRemoteChatProvider:
    def test_success_returns_first_choice_content(self):
        session = _FakeSession([_ok_response("the answer")])
        assert _provider(session).chat(ChatRequest("q")) == "the answer"
        call = session.calls[0]
        assert call["url"] == "http://models.internal/v1/chat/completions"
        assert call["json"]["model"] == "test-model"
        assert call["json"]["messages"][0]["role"] == "system"
        assert call["json"]["messages"][1] == {"role": "user", "content": "q"}

    def test_trailing_slash_normalized(self):
        session = _FakeSession([_ok_response()])
        p = RemoteChatProvider(
            endpoint="http://models.internal/",
            model="m",
            session=session,
        )
        p.chat(ChatRequest("q"))
        assert session.calls[0]["url"].count("//") == 1

    def test_bearer_token_from_env(self, monkeypatch):
        monkeypatch.setenv("TEST_LLM_TOKEN", "sekrit")
        session = _FakeSession([_ok_response()])
        _provider(session, token_env="TEST_LLM_TOKEN").chat(ChatRequest("q"))
        headers = session.calls[0]["headers"]
        assert headers["Authorization"] == "Bearer sekrit"

    def test_no_auth_header_when_env_unset(self, monkeypatch):
        monkeypatch.delenv("TEST_LLM_TOKEN", raising=False)
        session = _FakeSession([_ok_response()])
        _provider(session, token_env="TEST_LLM_TOKEN").chat(ChatRequest("q"))
        assert "Authorization" not in session.calls[0]["headers"]

    def test_server_error_retried_then_succeeds(self):
        session = _FakeSession(
            [_FakeResponse(status_code=503), _ok_response("late")]
        )
        sleeps = []
        p = _provider(session, sleep=sleeps.append)
        assert p.chat(ChatRequest("q")) == "late"
        assert len(session.calls) == 2
        assert sleeps == [0.5]

    def test_connection_error_retried(self):
        session = _FakeSession(
            [requests.ConnectionError("down"), _ok_response()]
        )
        assert _provider(session).chat(ChatRequest("q")) == "hello"

    def test_exhausted_retries_raise(self):
        session = _FakeSession([_FakeResponse(status_code=500)] * 3)
        sleeps = []
        with pytest.raises(TransportError, match="3 attempts"):
            _provider(session, sleep=sleeps.append).chat(ChatRequest("q"))
        assert len(session.calls) == 3
        # exponential backoff doubles the wait each retry
        assert sleeps == [0.5, 1.0]

    def test_client_error_fails_fast(self):
        session = _FakeSession(
            [_FakeResponse(status_code=401, text="denied")] * 3
        )
        with pytest.raises(TransportError, match="401"):
            _provider(session).chat(ChatRequest("q"))
        assert len(session.calls) == 1

    def test_malformed_payload_raises(self):
        session = _FakeSession([_FakeResponse(payload={"choices": []})])
        with pytest.raises(TransportError, match="malformed"):
            _provider(session).chat(ChatRequest("q"))


def _mock_reply(table, operation, seed=0):
    prompt = prompts.build_edit_prompt(to_llm_json(table, seed), operation)
    return json.loads(MockChatProvider().chat(ChatRequest(prompt)))


class TestMockChatProvider:
    def test_concatenation_appends_note_column(self, text_table):
        out = _mock_reply(text_table, prompts.CONCAT_OPERATION)
        assert out["column_names"][-1] == "synthetic_note"
        added = [row[-1] for row in out["cell_data"]]
        assert added == ["gen-0", "gen-1"]

    def test_edit_uppercases_first_textual_column(self):
        t = Table(
            id="t",
            title="Ranks",
            description="",
            column_names=("Rank", "Name"),
            rows=(("1", "ada"), ("2", "grace")),
        )
        out = _mock_reply(t, prompts.EDIT_OPERATION)
        assert out["column_names"][-1] == "Name_upper"
        assert [r[-1] for r in out["cell_data"]] == ["ADA", "GRACE"]

    def test_calculation_doubles_first_numerical_column(self, numeric_table):
        out = _mock_reply(numeric_table, prompts.CALC_OPERATION, seed=1)
        assert out["column_names"][-1] == "Score_x2"
        for row in out["cell_data"]:
            assert row[-1] == double_cell(row[1])

    def test_update_rewrites_metadata_only(self, text_table):
        out = _mock_reply(text_table, prompts.UPDATE_OPERATION)
        assert out["title"] == f"Updated: {text_table.title}"
        assert all(c.endswith("_v2") for c in out["column_names"])
        assert out["description"] == mock_description(
            out["title"], out["column_names"]
        )
        kept = [tuple(r) for r in out["cell_data"]]
        assert all(r in text_table.rows for r in kept)

    def test_output_key_order_matches_input_contract(self, text_table):
        prompt = prompts.build_edit_prompt(
            to_llm_json(text_table, 0), prompts.CONCAT_OPERATION
        )
        raw = MockChatProvider().chat(ChatRequest(prompt))
        assert list(json.loads(raw).keys()) == [
            "cell_data",
            "description",
            "title",
            "column_names",
        ]

    def test_description_prompt_answered(self, text_table):
        prompt = prompts.build_description_prompt(to_llm_json(text_table, 0))
        reply = MockChatProvider().chat(ChatRequest(prompt))
        assert reply == mock_description(
            text_table.title, list(text_table.column_names)
        )

    def test_unrecognized_prompt_echoes_table(self, text_table):
        raw = to_llm_json(text_table, 0)
        reply = MockChatProvider().chat(
            ChatRequest(f"Summarize:\n{raw}\nThanks.")
        )
        assert json.loads(reply) == json.loads(raw)

    def test_never_raises_on_garbage(self):
        assert MockChatProvider().chat(ChatRequest("no json at all")) == "{}"


class TestMockHelpers:
    def test_mock_description_with_title(self):
        assert (
            mock_description("Games", ["Year", "Host"])
            == "Table about Games with columns Year, Host."
        )

    def test_mock_description_without_title(self):
        assert mock_description("", ["a"]) == "Table with columns a."

    @pytest.mark.parametrize(
        "cell,expected",
        [
            ("2", "4"),
            ("-3", "-6"),
            ("2.5", "5.0"),
            ("1,000", "2000"),
            ("1e3", "2000.0"),
            ("abc", ""),
            ("", ""),
        ],
    )
    def test_double_cell(self, cell, expected):
        assert double_cell(cell) == expected


class _EmptyProvider:
    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = 0

    def chat(self, req):
        self.calls += 1
        return self.replies.pop(0)


class TestGenerateDescription:
    def test_mock_round_trip(self, text_table, mock_provider):
        text = generate_description(mock_provider, text_table, seed=0)
        assert text == mock_description(
            text_table.title, list(text_table.column_names)
        )

    def test_empty_reply_retried_once(self, text_table):
        p = _EmptyProvider(["", "eventually"])
        assert generate_description(p, text_table, seed=0) == "eventually"
        assert p.calls == 2

    def test_whitespace_counts_as_empty(self, text_table):
        p = _EmptyProvider(["  \n", "\t"])
        with pytest.raises(GenerationError, match=text_table.id):
            generate_description(p, text_table, seed=0)
        assert p.calls == 2
