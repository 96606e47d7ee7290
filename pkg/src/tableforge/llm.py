"""Chat-completion providers and completion parsing.

Two providers implement the same one-method protocol: a remote client
speaking the common chat-completions wire shape, and a rule-based mock
that applies each table-editing instruction deterministically so the
pipeline can be exercised offline. The mock's transforms are intentionally
simple enough to recompute in tests.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import requests

from . import prompts
from .serialize import to_llm_json
from .tables import Table, cell_is_numeric

DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 1024
CHAT_COMPLETIONS_PATH = "/v1/chat/completions"


class LlmError(Exception):
    """Base class for provider and parsing failures."""


class TransportError(LlmError):
    """The remote endpoint could not be reached or kept failing."""


class ExtractionError(LlmError):
    """No JSON object could be extracted from a completion."""


class GenerationError(LlmError):
    """The provider returned an unusable (e.g. empty) completion."""


@dataclass(frozen=True)
class ChatRequest:
    user_prompt: str
    system_prompt: str = prompts.SYSTEM_PROMPT
    max_output_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")


class ChatProvider(Protocol):
    def chat(self, req: ChatRequest) -> str: ...


def extract_json_object(completion: str) -> str:
    """Return the first substring of ``completion`` that parses as a JSON
    object.

    Models often wrap their JSON in prose; this finds the first balanced
    ``{...}`` that decodes to an object. Raises :class:`ExtractionError`
    when there is none.
    """
    decoder = json.JSONDecoder()
    start = completion.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(completion, start)
        except json.JSONDecodeError:
            pass
        else:
            if isinstance(obj, dict):
                end = _object_end(completion, start, decoder)
                return completion[start:end]
        start = completion.find("{", start + 1)
    raise ExtractionError("completion contains no parseable JSON object")


def _object_end(text: str, start: int, decoder: json.JSONDecoder) -> int:
    _, end = decoder.raw_decode(text, start)
    return end


class RemoteChatProvider:
    """Client for any server speaking the chat-completions shape.

    POSTs {model, messages, temperature, max_tokens} and reads the first
    choice's message content. Transient failures are retried with
    exponential backoff; ``retries=2`` means up to 3 attempts total.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        token_env: str | None = None,
        path: str = CHAT_COMPLETIONS_PATH,
        retries: int = 2,
        backoff_s: float = 0.5,
        timeout_s: float = 60.0,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.url = endpoint.rstrip("/") + path
        self.model = model
        self.token_env = token_env
        self.retries = retries
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s
        self.session = session if session is not None else requests.Session()
        self._sleep = sleep

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.token_env:
            token = os.environ.get(self.token_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def chat(self, req: ChatRequest) -> str:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                self._sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                resp = self.session.post(
                    self.url,
                    json=body,
                    headers=self._headers(),
                    timeout=self.timeout_s,
                )
            except requests.RequestException as e:
                last_error = e
                continue
            if resp.status_code >= 500:
                last_error = TransportError(
                    f"server error {resp.status_code} from {self.url}"
                )
                continue
            if resp.status_code != 200:
                raise TransportError(
                    f"request rejected with {resp.status_code}: "
                    f"{resp.text[:200]}"
                )
            try:
                payload = resp.json()
                return payload["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as e:
                raise TransportError(
                    f"malformed response from {self.url}: {e}"
                ) from e
        raise TransportError(
            f"giving up on {self.url} after {self.retries + 1} attempts: "
            f"{last_error}"
        )


class MockChatProvider:
    """Deterministic stand-in for a chat model.

    Recognizes each operation instruction inside the user prompt and
    applies a fixed rule to the embedded table JSON:

    * concatenation: append column "synthetic_note", cell i = "gen-<i>"
    * edit: append "<first textual column>_upper" with uppercased cells
    * calculation: append "<first numerical column>_x2" with doubled cells
    * update: prefix the title with "Updated: ", suffix every column name
      with "_v2", and rewrite the description from the new metadata

    Pure function of (seed, request); never raises.
    """

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def chat(self, req: ChatRequest) -> str:
        try:
            return self._respond(req.user_prompt)
        except Exception:
            # contract: the mock never errors
            return "{}"

    def _respond(self, prompt: str) -> str:
        obj = json.loads(extract_json_object(prompt))
        cells = [list(r) for r in obj.get("cell_data", [])]
        cols = [str(c) for c in obj.get("column_names", [])]
        title = str(obj.get("title", ""))
        description = str(obj.get("description", ""))

        if "brief description" in prompt:
            return mock_description(title, cols)
        if prompts.CONCAT_OPERATION in prompt:
            cols = cols + ["synthetic_note"]
            cells = [row + [f"gen-{i}"] for i, row in enumerate(cells)]
        elif prompts.EDIT_OPERATION in prompt:
            j = _first_column(cells, cols, numerical=False)
            cols = cols + [f"{cols[j]}_upper"]
            cells = [row + [str(row[j]).upper()] for row in cells]
        elif prompts.CALC_OPERATION in prompt:
            j = _first_column(cells, cols, numerical=True)
            cols = cols + [f"{cols[j]}_x2"]
            cells = [row + [double_cell(str(row[j]))] for row in cells]
        elif prompts.UPDATE_OPERATION in prompt:
            title = f"Updated: {title}"
            cols = [f"{c}_v2" for c in cols]
            description = mock_description(title, cols)
        else:
            return json.dumps(obj, ensure_ascii=False)

        out = {
            "cell_data": cells,
            "description": description,
            "title": title,
            "column_names": cols,
        }
        return json.dumps(out, ensure_ascii=False)


def mock_description(title: str, column_names: list[str]) -> str:
    """The mock's description template, shared with its update rule."""
    cols = ", ".join(column_names)
    if title:
        return f"Table about {title} with columns {cols}."
    return f"Table with columns {cols}."


def double_cell(cell: str) -> str:
    """Double a numeric cell, keeping integers integral. Non-numeric
    cells map to the empty cell."""
    s = cell.strip().replace(",", "")
    if not cell_is_numeric(cell):
        return ""
    try:
        return str(2 * int(s))
    except ValueError:
        return repr(2 * float(s))


def _first_column(
    cells: list[list[object]], cols: list[str], numerical: bool
) -> int:
    """Index of the first column matching the wanted kind, else 0."""
    for j in range(len(cols)):
        values = [str(row[j]) for row in cells if len(row) > j]
        non_empty = [v for v in values if v.strip()]
        if not non_empty:
            is_num = False
        else:
            frac = sum(1 for v in non_empty if cell_is_numeric(v)) / len(
                non_empty
            )
            is_num = frac >= 0.9
        if is_num == numerical:
            return j
    return 0


def generate_description(
    provider: ChatProvider,
    t: Table,
    seed: int,
    temperature: float = DEFAULT_TEMPERATURE,
    max_output_tokens: int = DEFAULT_MAX_TOKENS,
) -> str:
    """Ask the provider for a short description of ``t``.

    The prompt embeds the sampled-row JSON view of the table. An empty
    completion is retried once, then raises :class:`GenerationError`.
    """
    req = ChatRequest(
        user_prompt=prompts.build_description_prompt(to_llm_json(t, seed)),
        temperature=temperature,
        max_output_tokens=max_output_tokens,
    )
    for _ in range(2):
        text = provider.chat(req).strip()
        if text:
            return text
    raise GenerationError(f"empty description for table {t.id}")
