import json

from fastapi.testclient import TestClient

from tablebridge import BridgeConfig, create_app

TABLE = {
    "cell_data": [["alice", "12", "red"], ["bob", "7", "blue"]],
    "description": "scores",
    "title": "Player Scores",
    "column_names": ["Player", "Score", "Team"],
}


def chat(client, prompt, model=None, messages=None):
    body = {
        "messages": messages
        or [
            {"role": "system", "content": "You edit tables."},
            {"role": "user", "content": prompt},
        ]
    }
    if model is not None:
        body["model"] = model
    return client.post("/v1/chat/completions", json=body)


def content_of(response) -> str:
    return response.json()["choices"][0]["message"]["content"]


def prompt_for(instruction: str) -> str:
    return f"{json.dumps(TABLE)}\n\nEdit the tabular data:\n\n{instruction}"


class TestChatRules:
    def test_concatenation_adds_two_columns(self, client):
        r = chat(
            client,
            prompt_for(
                "Make up two new columns with reasonable and diverse values."
            ),
        )
        out = json.loads(content_of(r))
        assert out["column_names"][:3] == TABLE["column_names"]
        assert len(out["column_names"]) == 5
        for i, row in enumerate(out["cell_data"]):
            assert row[:3] == TABLE["cell_data"][i]
            assert len(row) == 5

    def test_edit_appends_reversed_text_column(self, client):
        r = chat(
            client,
            prompt_for("Some options are but not limited to: binning, ..."),
        )
        out = json.loads(content_of(r))
        assert out["column_names"] == [
            "Player",
            "Score",
            "Team",
            "Player_reversed",
        ]
        assert [row[3] for row in out["cell_data"]] == ["ecila", "bob"]

    def test_calculation_triples_first_numeric_column(self, client):
        r = chat(
            client,
            prompt_for(
                "numerical columns using a type of calculation "
                "(mathematical calculations, aggregations)"
            ),
        )
        out = json.loads(content_of(r))
        assert out["column_names"][3] == "Score_x3"
        assert [row[3] for row in out["cell_data"]] == ["36", "21"]

    def test_update_changes_metadata_only(self, client):
        r = chat(
            client,
            prompt_for(
                "Update title, column names, and description to match "
                "the updated cell data."
            ),
        )
        out = json.loads(content_of(r))
        assert out["cell_data"] == TABLE["cell_data"]
        assert out["column_names"] == TABLE["column_names"]
        assert out["title"] != TABLE["title"]
        assert out["description"] != TABLE["description"]

    def test_description_request_returns_prose(self, client):
        r = chat(
            client,
            f"{json.dumps(TABLE)}\n\nWrite a brief description of the "
            "json-formated tabular datapoint shown above.",
        )
        text = content_of(r)
        assert "Player Scores" in text
        assert not text.strip().startswith("{")

    def test_unrecognized_instruction_echoes_table(self, client):
        r = chat(client, f"{json.dumps(TABLE)}\n\nTranslate to French.")
        assert json.loads(content_of(r)) == TABLE

    def test_no_table_in_prompt(self, client):
        r = chat(client, "Make up two new columns please")
        assert content_of(r) == "{}"

    def test_deterministic(self, client):
        p = prompt_for("Make up two new columns now.")
        assert content_of(chat(client, p)) == content_of(chat(client, p))


class TestChatErrors:
    def test_empty_messages_rejected(self, client):
        r = client.post("/v1/chat/completions", json={"messages": []})
        assert r.status_code == 422

    def test_missing_user_message_rejected(self, client):
        r = chat(
            client,
            "",
            messages=[{"role": "system", "content": "only system"}],
        )
        assert r.status_code == 400

    def test_malformed_body_rejected(self, client):
        r = client.post("/v1/chat/completions", json={"prompt": "hi"})
        assert r.status_code == 422

    def test_negative_temperature_rejected(self, client):
        r = client.post(
            "/v1/chat/completions",
            json={
                "messages": [{"role": "user", "content": "hi"}],
                "temperature": -1.0,
            },
        )
        assert r.status_code == 422

    def test_unknown_model(self, client):
        r = chat(client, "hello", model="mystery-model")
        assert r.status_code == 400

    def test_model_failure_is_5xx(self, client):
        r = chat(client, "hello", model="always-fail")
        assert r.status_code == 500


class TestChatAuth:
    def test_token_enforced(self, monkeypatch):
        monkeypatch.setenv("TABLEBRIDGE_TOKEN", "hunter2")
        client = TestClient(create_app(BridgeConfig()))
        r = chat(client, "hello")
        assert r.status_code == 401
        r = client.post(
            "/v1/chat/completions",
            json={"messages": [{"role": "user", "content": "hi"}]},
            headers={"Authorization": "Bearer hunter2"},
        )
        assert r.status_code == 200
